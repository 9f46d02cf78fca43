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

#include "mtgrpo/trainer.hpp"

#include <numeric>
#include <stdexcept>

#include "mtgrpo/error.hpp"
#include "mtgrpo/rng.hpp"

namespace mtgrpo {

namespace {

constexpr std::uint64_t kInitStream = 0x1;
constexpr std::uint64_t kScheduleStream = 0x2;
constexpr std::uint64_t kRolloutStream = 0x3;
constexpr std::uint64_t kEvalStream = 0x4;

struct ScoredGroup {
  std::size_t task = 0;
  std::size_t prompt_index = 0;
  RolloutGroup group;
};

double mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

TrainState init_train_state(const RunConfig& config, const Suite& suite) {
  TrainState s;
  s.root_seed = config.seed;
  s.params = make_random_params(suite.policy, derive_seed(config.seed, {kInitStream}), config.init_scale);
  s.old_params = s.params;
  s.ref_params = s.params;
  std::vector<std::string> ids;
  for (const auto& t : suite.tasks) ids.push_back(t.task_id);
  s.ledger = UtilityLedger(ids, config.alpha);
  return s;
}

TrainState train_step(const TrainState& state, const Suite& suite, const RunConfig& config, StepRecord* record) {
  TrainState next = state;
  const std::int64_t t = state.step + 1;
  const std::size_t K = suite.tasks.size();
  const auto& opt = config.optimizer;
  StepRecord rec;
  rec.step = t;

  // Phase 1: fold statistics of step t-1 into the task EMAs.
  fold_task_statistics(next.ledger, t);

  // Phases 2-3: quotas, then prompt EMAs, weights and selection.
  for (std::size_t k = 0; k < K; ++k) fold_prompt_statistics(next.ledger, k, t);
  ScheduleOptions sched_opts;
  sched_opts.uniform_quotas = config.ablation == Ablation::kUniformQuotas;
  sched_opts.uniform_prompts = config.ablation == Ablation::kRandomPrompts;
  const auto sched_seed = derive_seed(state.root_seed, {kScheduleStream, static_cast<std::uint64_t>(t)});
  rec.schedule = build_schedule(next.ledger, suite.tasks, config.budget, config.tau, sched_seed, t, sched_opts);
  check_decision(rec.schedule, config.budget);
  const auto& utilities = rec.schedule.task_utilities;

  // Phase 4: freeze the behaviour policy, roll out and score.
  next.old_params = next.params;
  std::vector<ScoredGroup> groups;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& task = suite.tasks[k];
    for (auto pid : rec.schedule.selected_prompts[k]) {
      ScoredGroup sg;
      sg.task = k;
      sg.prompt_index = task.prompt_index(pid);
      const auto seed = derive_seed(state.root_seed, {kRolloutStream, static_cast<std::uint64_t>(t), k,
                                                      static_cast<std::uint64_t>(pid)});
      sg.group = sample_rollouts(next.old_params, task.prompt_pool[sg.prompt_index], config.group_size, seed);
      score_rollouts(suite, task, sg.group);
      groups.push_back(std::move(sg));
    }
  }
  std::vector<TaskBatch> batches(K);
  for (const auto& sg : groups) {
    batches[sg.task].prompts.push_back(&suite.tasks[sg.task].prompt_pool[sg.prompt_index]);
    batches[sg.task].groups.push_back(&sg.group);
  }

  // Phase 5: per-task KL coefficients, objectives and one ascent step.
  rec.tasks.resize(K);
  std::vector<TaskLossBreakdown> breakdowns(K);
  TensorSet total_grad = next.params.tensors.zeros_like();
  std::vector<double> betas(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& task = suite.tasks[k];
    auto& tr = rec.tasks[k];
    tr.task_id = task.task_id;
    tr.pot_ema = next.ledger.tasks[k].ema_pot;
    tr.syn_ema = next.ledger.tasks[k].ema_syn;
    tr.utility = utilities[k];
    tr.stats_step = next.ledger.tasks[k].stats_step;
    tr.quota_fractional = rec.schedule.fractional_quotas[k];
    tr.quota_integer = rec.schedule.integer_quotas[k];
    tr.rollouts = tr.quota_integer * config.group_size;

    const double base = config.ablation == Ablation::kUniformBeta ? config.uniform_beta : task.beta_base;
    const double lambda = config.ablation == Ablation::kFixedBeta ? 0.0 : opt.lambda_kl;
    betas[k] = dynamic_kl_coefficient(base, lambda, utilities[k].combined);
    tr.beta = betas[k];
    if (batches[k].groups.empty()) continue;

    auto res = task_objective(batches[k], next.params, next.ref_params, betas[k], opt.clip_eps, opt.ratio_base);
    res.breakdown.quota_weight = static_cast<double>(tr.quota_integer) / static_cast<double>(config.budget);
    breakdowns[k] = res.breakdown;
    total_grad.axpy(res.breakdown.quota_weight, res.gradient);
    tr.trained = true;
    tr.loss = res.breakdown;

    std::vector<double> means, variances;
    for (const auto* g : batches[k].groups) {
      means.push_back(mean(g->rewards));
      variances.push_back(reward_variance(g->rewards));
    }
    tr.mean_reward = mean(means);
    tr.reward_variance = task_potential(variances);
  }
  rec.multitask_objective = multitask_objective(breakdowns, rec.schedule.integer_quotas, config.budget);
  const double progress = config.steps > 0 ? static_cast<double>(t - 1) / static_cast<double>(config.steps) : 0.0;
  rec.update = optimizer_step(next.params, total_grad, next.optimizer, opt, progress);
  if (!next.params.tensors.all_finite()) throw NumericError("parameters became non-finite at step " + std::to_string(t));

  // Phase 6: task gradients at the updated parameters, gradient EMAs and
  // instantaneous utilities for the next step.
  for (std::size_t k = 0; k < K; ++k) {
    if (batches[k].groups.empty()) continue;
    const auto res = task_objective(batches[k], next.params, next.ref_params, betas[k], opt.clip_eps, opt.ratio_base);
    gradient_ema_update(next.ledger, k, compress_gradient(res.gradient));
    auto& ts = next.ledger.tasks[k];
    ts.pending_pot = rec.tasks[k].reward_variance;
    ts.pending_step = t;
    rec.tasks[k].pot_instant = rec.tasks[k].reward_variance;
  }
  for (std::size_t k = 0; k < K; ++k) {
    auto& ts = next.ledger.tasks[k];
    ts.pending_syn = ledger_synergy(next.ledger, k);
    ts.pending_step = t;
    rec.tasks[k].syn_instant = *ts.pending_syn;
  }
  for (const auto& sg : groups) {
    record_prompt_observation(next.ledger, sg.task, sg.group.prompt_id, sg.group.rewards, t);
  }
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = i + 1; j < K; ++j) {
      const auto& a = next.ledger.tasks[i].grad_ema;
      const auto& b = next.ledger.tasks[j].grad_ema;
      const double c = (a.empty() || b.empty()) ? 0.0 : cosine_similarity(a, b);
      rec.similarities.push_back({i, j, c});
    }
  }

  next.ledger.step = t;
  next.step = t;
  if (record) *record = std::move(rec);
  return next;
}

double EvalResult::sampled_mean() const { return mean(sampled); }
double EvalResult::greedy_mean() const { return mean(greedy); }

EvalResult evaluate(const PolicyParams& params, const Suite& suite, std::size_t n_rollouts, std::uint64_t seed) {
  if (n_rollouts == 0) throw std::invalid_argument("evaluate: n_rollouts must be positive");
  EvalResult out;
  for (std::size_t k = 0; k < suite.tasks.size(); ++k) {
    const auto& task = suite.tasks[k];
    double sampled = 0.0, greedy = 0.0;
    for (std::size_t i = 0; i < task.prompt_pool.size(); ++i) {
      const auto& prompt = task.prompt_pool[i];
      auto group = sample_rollouts(params, prompt, n_rollouts,
                                   derive_seed(seed, {kEvalStream, k, static_cast<std::uint64_t>(prompt.prompt_id)}));
      score_rollouts(suite, task, group);
      sampled += mean(group.rewards);
      greedy += rollout_reward(suite, task, i, greedy_sequence(params, prompt));
    }
    const double n = static_cast<double>(task.prompt_pool.size());
    out.sampled.push_back(sampled / n);
    out.greedy.push_back(greedy / n);
  }
  return out;
}

std::uint64_t evaluation_seed(const RunConfig& config) { return derive_seed(config.seed, {kEvalStream}); }

TrainResult resume(TrainState state, const RunConfig& config, const Suite& suite, const StepCallback& on_step) {
  TrainResult result;
  result.initial_eval = evaluate(state.params, suite, config.eval_rollouts, evaluation_seed(config));
  while (static_cast<std::size_t>(state.step) < config.steps) {
    StepRecord rec;
    state = train_step(state, suite, config, &rec);
    if (on_step) on_step(rec, state);
  }
  result.final_eval = evaluate(state.params, suite, config.eval_rollouts, evaluation_seed(config));
  result.final_params = state.params;
  result.final_state = std::move(state);
  return result;
}

TrainResult train(const RunConfig& config, const Suite& suite, const StepCallback& on_step) {
  config.validate();
  return resume(init_train_state(config, suite), config, suite, on_step);
}

}  // namespace mtgrpo
