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
#include <functional>
#include <string>
#include <vector>

#include "mtgrpo/config.hpp"
#include "mtgrpo/envs.hpp"
#include "mtgrpo/optimizer.hpp"
#include "mtgrpo/policy.hpp"
#include "mtgrpo/scheduler.hpp"
#include "mtgrpo/utility.hpp"

namespace mtgrpo {

struct TrainState {
  std::int64_t step = 0;
  PolicyParams params;
  PolicyParams old_params;
  PolicyParams ref_params;  // frozen copy of the initial policy
  UtilityLedger ledger;
  OptimizerState optimizer;
  std::uint64_t root_seed = 0;
};

/// Cold-start state: random initial policy (scale `init_scale`), reference
/// equal to it, zeroed ledger.
TrainState init_train_state(const RunConfig& config, const Suite& suite);

struct TaskStepRecord {
  std::string task_id;
  // Utilities used by this step's schedule (EMAs after folding step t-1).
  double pot_ema = 0.0;
  double syn_ema = 0.0;
  TaskUtilityBreakdown utility;
  std::int64_t stats_step = 0;  // step whose statistics the EMAs last absorbed
  double quota_fractional = 0.0;
  std::size_t quota_integer = 0;
  std::size_t rollouts = 0;
  double beta = 0.0;  // KL coefficient this step
  // Phase 5 (empty when the task had no prompts this step).
  bool trained = false;
  TaskLossBreakdown loss;
  double mean_reward = 0.0;
  double reward_variance = 0.0;  // task potential: mean per-prompt variance
  // Phase 6 instantaneous utilities.
  double pot_instant = 0.0;
  double syn_instant = 0.0;
};

struct PairSimilarity {
  std::size_t i = 0;
  std::size_t j = 0;
  double cosine = 0.0;
};

struct StepRecord {
  std::int64_t step = 0;
  std::vector<TaskStepRecord> tasks;
  std::vector<PairSimilarity> similarities;  // gradient EMAs, i < j
  ScheduleDecision schedule;
  double multitask_objective = 0.0;
  StepReport update;
};

/// Runs one iteration of the six-phase loop and returns the new state. The
/// input state is left untouched, so a failed step can be retried from it.
TrainState train_step(const TrainState& state, const Suite& suite, const RunConfig& config,
                      StepRecord* record = nullptr);

struct EvalResult {
  std::vector<double> sampled;  // per task, mean fused reward of fresh rollouts
  std::vector<double> greedy;   // per task, fused reward of the argmax sequence
  double sampled_mean() const;
  double greedy_mean() const;
};

/// Mean reward per task over every prompt in the pool, `n_rollouts` fresh
/// rollouts each.
EvalResult evaluate(const PolicyParams& params, const Suite& suite, std::size_t n_rollouts, std::uint64_t seed);

struct TrainResult {
  PolicyParams final_params;
  TrainState final_state;
  EvalResult initial_eval;
  EvalResult final_eval;
};

using StepCallback = std::function<void(const StepRecord&, const TrainState&)>;

/// Runs `config.steps` iterations from cold start, invoking `on_step` after
/// each one, then evaluates the final policy.
TrainResult train(const RunConfig& config, const Suite& suite, const StepCallback& on_step = {});

/// Continues an existing state up to `config.steps` total iterations.
TrainResult resume(TrainState state, const RunConfig& config, const Suite& suite, const StepCallback& on_step = {});

/// Evaluation seed used for the final report, shared by paired runs.
std::uint64_t evaluation_seed(const RunConfig& config);

}  // namespace mtgrpo
