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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtgrpo/policy.hpp"
#include "mtgrpo/rewards.hpp"

namespace mtgrpo {

/// Synthetic analogues of the four verifiable coding rewards.
enum class RewardShape { kBinaryExec, kPassRatio, kCoverage, kSimilarity };

std::string to_string(RewardShape shape);
RewardShape parse_reward_shape(const std::string& name);

/// KL base coefficient per shape: 1e-2 for the code-producing analogues
/// (pass_ratio, coverage), 1e-4 for the others.
double default_beta_base(RewardShape shape);

/// Hidden answer for one prompt. Position 0 of a rollout is the format
/// slot; `sequence` covers positions 1..L-1.
struct PromptTarget {
  Sequence sequence;
  std::vector<TokenId> token_set;  // sorted, distinct
  double difficulty = 0.0;
};

struct TaskSpec {
  std::string task_id;
  RewardShape reward_shape = RewardShape::kPassRatio;
  std::vector<PromptContext> prompt_pool;
  std::vector<PromptTarget> targets;  // indexed like prompt_pool
  double beta_base = 1e-2;
  double difficulty = 0.5;

  /// Index of `prompt_id` in the pool; throws std::invalid_argument if absent.
  std::size_t prompt_index(std::int64_t prompt_id) const;
};

struct TaskConfig {
  std::string task_id;
  RewardShape reward_shape = RewardShape::kPassRatio;
  std::size_t pool_size = 16;
  double difficulty = 0.5;
  std::optional<double> beta_base;  // defaults by shape
};

struct SuiteConfig {
  std::vector<TaskConfig> tasks;
  PolicyShape policy{16, 16, 16};
  /// K x K, symmetric, unit diagonal, entries in [-1, 1], positive
  /// semidefinite. Empty means identity.
  std::vector<std::vector<double>> alignment;
  std::uint64_t seed = 1;
  std::size_t coverage_set_size = 4;
  /// Weight of the per-token preference shared by all prompts of a task.
  double token_preference = 1.0;
  /// Weight of the per-position core shared by all prompts of a task.
  double position_core = 1.0;
  /// Scale mapping prompt difficulty to the weight of prompt-specific noise.
  double difficulty_scale = 3.0;
  /// Append a one-hot task block to the prompt features.
  bool task_features = true;

  friend bool operator==(const SuiteConfig&, const SuiteConfig&) = default;
};

inline bool operator==(const TaskConfig& a, const TaskConfig& b) {
  return a.task_id == b.task_id && a.reward_shape == b.reward_shape && a.pool_size == b.pool_size &&
         a.difficulty == b.difficulty && a.beta_base == b.beta_base;
}

struct Suite {
  PolicyShape policy;
  TokenId format_token = 0;
  std::vector<TaskSpec> tasks;

  std::size_t task_index(const std::string& task_id) const;
};

/// Builds the task suite. Deterministic in `config`.
///
/// Feature layout of every prompt: [1, one-hot task (optional), shared prompt
/// features]. Prompt i of every task uses the same shared features, so tasks
/// see the same inputs and differ only in targets.
///
/// Targets come from latent scores s_k[i, p, v] (tokens v >= 1) that mix a
/// per-token preference, a per-position core and prompt-specific noise whose
/// weight grows with the prompt's difficulty. Latents of different tasks are
/// correlated through a factor of the alignment matrix, so alignment +1
/// gives identical targets and -1 gives argmax/argmin opposites.
Suite make_suite(const SuiteConfig& config);

// Reward shapes. All operate on the content part of a rollout.

double binary_exec_reward(std::span<const TokenId> sequence, std::span<const TokenId> target);
double pass_ratio_reward(std::span<const TokenId> sequence, std::span<const TokenId> target);
double coverage_reward(std::span<const TokenId> sequence, std::span<const TokenId> target_set);
double similarity_reward(std::span<const TokenId> sequence, std::span<const TokenId> reference);

/// Shape metric of a full rollout (format slot stripped) against a target.
double shape_metric(RewardShape shape, std::span<const TokenId> full_sequence, const PromptTarget& target);

/// Fused reward of a full rollout: format flag is `seq[0] == format_token`.
double rollout_reward(const Suite& suite, const TaskSpec& task, std::size_t prompt_index,
                      std::span<const TokenId> full_sequence);

/// Fills `group.rewards`. The format flag of each rollout is taken from its
/// leading token.
void score_rollouts(const Suite& suite, const TaskSpec& task, RolloutGroup& group);

/// Variant with explicit per-rollout format flags.
void score_rollouts(const TaskSpec& task, RolloutGroup& group, const std::vector<bool>& format_flags);

/// Sum over all V^L sequences of pi(seq | q) * reward(seq). V^L <= 65536.
double exact_expected_reward(const PolicyParams& params, const Suite& suite, const TaskSpec& task,
                             std::size_t prompt_index);

}  // namespace mtgrpo
