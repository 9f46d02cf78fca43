// Copyright 2026 The mtgrpo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mtgrpo/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mtgrpo/rng.hpp"

namespace mtgrpo {

namespace {

// Lower-triangular factor C with C C^T = A for a symmetric positive
// semidefinite A. Zero pivots give zero columns.
std::vector<std::vector<double>> psd_factor(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  constexpr double tol = 1e-9;
  std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= c[j][k] * c[j][k];
    if (d < -tol) throw std::invalid_argument("alignment matrix is not positive semidefinite");
    const double pivot = d > tol ? std::sqrt(d) : 0.0;
    c[j][j] = pivot;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= c[i][k] * c[j][k];
      if (pivot == 0.0) {
        if (std::abs(s) > 1e-6) throw std::invalid_argument("alignment matrix is not positive semidefinite");
      } else {
        c[i][j] = s / pivot;
      }
    }
  }
  return c;
}

void validate_alignment(const std::vector<std::vector<double>>& a, std::size_t k) {
  if (a.size() != k) throw std::invalid_argument("alignment matrix must be K x K");
  for (std::size_t i = 0; i < k; ++i) {
    if (a[i].size() != k) throw std::invalid_argument("alignment matrix must be K x K");
    if (a[i][i] != 1.0) throw std::invalid_argument("alignment matrix must have unit diagonal");
    for (std::size_t j = 0; j < k; ++j) {
      if (!(a[i][j] >= -1.0 && a[i][j] <= 1.0)) throw std::invalid_argument("alignment entries must lie in [-1, 1]");
      if (a[i][j] != a[j][i]) throw std::invalid_argument("alignment matrix must be symmetric");
    }
  }
}

std::span<const TokenId> content(std::span<const TokenId> full) { return full.subspan(std::min<std::size_t>(1, full.size())); }

}  // namespace

std::string to_string(RewardShape shape) {
  switch (shape) {
    case RewardShape::kBinaryExec: return "binary_exec";
    case RewardShape::kPassRatio: return "pass_ratio";
    case RewardShape::kCoverage: return "coverage";
    case RewardShape::kSimilarity: return "similarity";
  }
  return "unknown";
}

RewardShape parse_reward_shape(const std::string& name) {
  if (name == "binary_exec") return RewardShape::kBinaryExec;
  if (name == "pass_ratio") return RewardShape::kPassRatio;
  if (name == "coverage") return RewardShape::kCoverage;
  if (name == "similarity") return RewardShape::kSimilarity;
  throw std::invalid_argument("unknown reward shape '" + name + "'");
}

double default_beta_base(RewardShape shape) {
  switch (shape) {
    case RewardShape::kPassRatio:
    case RewardShape::kCoverage: return 1e-2;
    case RewardShape::kBinaryExec:
    case RewardShape::kSimilarity: return 1e-4;
  }
  return 1e-2;
}

std::size_t TaskSpec::prompt_index(std::int64_t prompt_id) const {
  for (std::size_t i = 0; i < prompt_pool.size(); ++i)
    if (prompt_pool[i].prompt_id == prompt_id) return i;
  throw std::invalid_argument("task '" + task_id + "' has no prompt " + std::to_string(prompt_id));
}

std::size_t Suite::task_index(const std::string& task_id) const {
  for (std::size_t k = 0; k < tasks.size(); ++k)
    if (tasks[k].task_id == task_id) return k;
  throw std::invalid_argument("unknown task '" + task_id + "'");
}

Suite make_suite(const SuiteConfig& config) {
  const std::size_t K = config.tasks.size();
  if (K == 0) throw std::invalid_argument("suite needs at least one task");
  const auto [V, L, F] = config.policy;
  if (V < 3 || L < 2) throw std::invalid_argument("suite needs V >= 3 and L >= 2");
  const std::size_t task_block = config.task_features ? K : 0;
  if (F < 2 + task_block) throw std::invalid_argument("feature_dim too small for the feature layout");
  if (config.coverage_set_size == 0 || config.coverage_set_size > V - 1) {
    throw std::invalid_argument("coverage_set_size must lie in [1, V-1]");
  }
  std::set<std::string> ids;
  for (const auto& t : config.tasks) {
    if (t.pool_size == 0) throw std::invalid_argument("task '" + t.task_id + "' has an empty prompt pool");
    if (!ids.insert(t.task_id).second) throw std::invalid_argument("duplicate task id '" + t.task_id + "'");
    if (!(t.difficulty >= 0.0 && t.difficulty <= 1.0)) throw std::invalid_argument("difficulty must lie in [0, 1]");
    if (t.beta_base && !(*t.beta_base > 0.0)) throw std::invalid_argument("beta_base must be positive");
  }

  std::vector<std::vector<double>> alignment = config.alignment;
  if (alignment.empty()) {
    alignment.assign(K, std::vector<double>(K, 0.0));
    for (std::size_t k = 0; k < K; ++k) alignment[k][k] = 1.0;
  }
  validate_alignment(alignment, K);
  const auto factor = psd_factor(alignment);

  std::size_t max_pool = 0;
  for (const auto& t : config.tasks) max_pool = std::max(max_pool, t.pool_size);

  Rng rng(derive_seed(config.seed, {0x5u}));
  const std::size_t shared_dims = F - 1 - task_block;
  const double feature_scale = 1.0 / std::sqrt(static_cast<double>(shared_dims));
  std::vector<std::vector<double>> shared(max_pool, std::vector<double>(shared_dims));
  for (auto& row : shared)
    for (double& x : row) x = feature_scale * rng.normal();

  // Independent latent sources, one per task slot; mixed by `factor`.
  const std::size_t C = L - 1;  // content positions
  const std::size_t T = V - 1;  // candidate tokens 1..V-1
  std::vector<std::vector<double>> pref(K, std::vector<double>(T));
  std::vector<std::vector<double>> core(K, std::vector<double>(C * T));
  std::vector<std::vector<double>> noise(K, std::vector<double>(max_pool * C * T));
  for (std::size_t j = 0; j < K; ++j) {
    for (double& x : pref[j]) x = rng.normal();
    for (double& x : core[j]) x = rng.normal();
    for (double& x : noise[j]) x = rng.normal();
  }
  // Per-prompt difficulty multiplier, shared across tasks so that prompt i
  // is comparably hard everywhere.
  std::vector<double> prompt_u(max_pool);
  for (double& u : prompt_u) u = 2.0 * rng.uniform();

  Suite suite;
  suite.policy = config.policy;
  suite.format_token = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& tc = config.tasks[k];
    TaskSpec task;
    task.task_id = tc.task_id;
    task.reward_shape = tc.reward_shape;
    task.difficulty = tc.difficulty;
    task.beta_base = tc.beta_base.value_or(default_beta_base(tc.reward_shape));
    for (std::size_t i = 0; i < tc.pool_size; ++i) {
      PromptContext prompt;
      prompt.prompt_id = static_cast<std::int64_t>(i);
      prompt.task_id = tc.task_id;
      prompt.features.assign(F, 0.0);
      prompt.features[0] = 1.0;
      if (config.task_features) prompt.features[1 + k] = 1.0;
      std::copy(shared[i].begin(), shared[i].end(), prompt.features.begin() + static_cast<std::ptrdiff_t>(1 + task_block));

      PromptTarget target;
      target.difficulty = std::min(1.0, tc.difficulty * prompt_u[i]);
      const double noise_weight = config.difficulty_scale * target.difficulty;
      std::vector<double> token_score(T, 0.0);
      target.sequence.resize(C);
      for (std::size_t p = 0; p < C; ++p) {
        double best = -1e300;
        std::size_t arg = 0;
        for (std::size_t v = 0; v < T; ++v) {
          double s = 0.0;
          for (std::size_t j = 0; j <= k; ++j) {
            if (factor[k][j] == 0.0) continue;
            const double z = config.token_preference * pref[j][v] + config.position_core * core[j][p * T + v] +
                             noise_weight * noise[j][(i * C + p) * T + v];
            s += factor[k][j] * z;
          }
          token_score[v] += s;
          if (s > best) {
            best = s;
            arg = v;
          }
        }
        target.sequence[p] = static_cast<TokenId>(arg + 1);
      }
      std::vector<std::size_t> order(T);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return token_score[a] > token_score[b]; });
      for (std::size_t m = 0; m < config.coverage_set_size; ++m) target.token_set.push_back(static_cast<TokenId>(order[m] + 1));
      std::sort(target.token_set.begin(), target.token_set.end());

      task.prompt_pool.push_back(std::move(prompt));
      task.targets.push_back(std::move(target));
    }
    suite.tasks.push_back(std::move(task));
  }
  return suite;
}

double binary_exec_reward(std::span<const TokenId> sequence, std::span<const TokenId> target) {
  if (sequence.size() != target.size()) return 0.0;
  return std::equal(sequence.begin(), sequence.end(), target.begin()) ? 1.0 : 0.0;
}

double pass_ratio_reward(std::span<const TokenId> sequence, std::span<const TokenId> target) {
  if (target.empty()) throw std::invalid_argument("pass_ratio_reward: empty target");
  if (sequence.size() != target.size()) throw std::invalid_argument("pass_ratio_reward: length mismatch");
  std::size_t hits = 0;
  for (std::size_t p = 0; p < target.size(); ++p) hits += sequence[p] == target[p] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(target.size());
}

double coverage_reward(std::span<const TokenId> sequence, std::span<const TokenId> target_set) {
  const std::set<TokenId> wanted(target_set.begin(), target_set.end());
  if (wanted.empty()) throw std::invalid_argument("coverage_reward: empty target set");
  std::set<TokenId> covered;
  for (auto t : sequence)
    if (wanted.count(t)) covered.insert(t);
  return static_cast<double>(covered.size()) / static_cast<double>(wanted.size());
}

double similarity_reward(std::span<const TokenId> sequence, std::span<const TokenId> reference) {
  return text_similarity(sequence, reference);
}

double shape_metric(RewardShape shape, std::span<const TokenId> full_sequence, const PromptTarget& target) {
  const auto body = content(full_sequence);
  switch (shape) {
    case RewardShape::kBinaryExec: return binary_exec_reward(body, target.sequence);
    case RewardShape::kPassRatio: return pass_ratio_reward(body, target.sequence);
    case RewardShape::kCoverage: return coverage_reward(body, target.token_set);
    case RewardShape::kSimilarity: return similarity_reward(body, target.sequence);
  }
  return 0.0;
}

double rollout_reward(const Suite& suite, const TaskSpec& task, std::size_t prompt_index,
                      std::span<const TokenId> full_sequence) {
  const bool compliant = !full_sequence.empty() && full_sequence[0] == suite.format_token;
  return fuse_reward(shape_metric(task.reward_shape, full_sequence, task.targets.at(prompt_index)), compliant).fused;
}

void score_rollouts(const TaskSpec& task, RolloutGroup& group, const std::vector<bool>& format_flags) {
  const std::size_t idx = task.prompt_index(group.prompt_id);
  if (format_flags.size() != group.size()) throw std::invalid_argument("score_rollouts: one format flag per rollout");
  group.rewards.resize(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double metric = shape_metric(task.reward_shape, group.sequences[i], task.targets[idx]);
    group.rewards[i] = fuse_reward(metric, static_cast<bool>(format_flags[i])).fused;
  }
}

void score_rollouts(const Suite& suite, const TaskSpec& task, RolloutGroup& group) {
  std::vector<bool> flags(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    flags[i] = !group.sequences[i].empty() && group.sequences[i][0] == suite.format_token;
  }
  score_rollouts(task, group, flags);
}

double exact_expected_reward(const PolicyParams& params, const Suite& suite, const TaskSpec& task,
                             std::size_t prompt_index) {
  const auto& prompt = task.prompt_pool.at(prompt_index);
  const auto logp = position_log_probs(params, prompt);
  const std::size_t V = params.shape.vocab_size;
  double total = 0.0;
  for_each_sequence(params.shape, 65536, [&](const Sequence& seq) {
    double lp = 0.0;
    for (std::size_t p = 0; p < seq.size(); ++p) lp += logp[p * V + static_cast<std::size_t>(seq[p])];
    total += std::exp(lp) * rollout_reward(suite, task, prompt_index, seq);
  });
  return total;
}

}  // namespace mtgrpo
