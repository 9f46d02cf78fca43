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
#include <span>
#include <string>
#include <vector>

#include "mtgrpo/policy.hpp"

namespace mtgrpo {

enum class UpdateRule { kSgd, kAdamW };
enum class LrSchedule { kConstant, kCosine };
/// Denominator of the probability ratio: the policy that generated the
/// rollouts, or the frozen reference (literal reading of the GRPO ratio).
enum class RatioBase { kOld, kReference };

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double clip_eps = 0.2;
  double grad_clip_norm = 1.0;
  double lambda_kl = 0.2;
  UpdateRule update_rule = UpdateRule::kSgd;
  LrSchedule schedule = LrSchedule::kConstant;
  RatioBase ratio_base = RatioBase::kOld;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Settings used for 7B-scale LLM post-training: AdamW, lr 5e-7, cosine.
OptimizerConfig llm_preset();

std::string to_string(UpdateRule rule);
std::string to_string(LrSchedule schedule);
std::string to_string(RatioBase base);
UpdateRule parse_update_rule(const std::string& s);
LrSchedule parse_lr_schedule(const std::string& s);
RatioBase parse_ratio_base(const std::string& s);

struct TaskLossBreakdown {
  double surrogate = 0.0;
  double kl_term = 0.0;
  double beta_used = 0.0;
  double objective = 0.0;  // surrogate - beta_used * kl_term
  double quota_weight = 0.0;
};

/// A_i = (r_i - mean) / (std + eps), population std.
std::vector<double> group_advantages(std::span<const double> rewards, double eps = 1e-8);

/// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

/// max(0, beta_base * (1 + lambda * utility)).
double dynamic_kl_coefficient(double beta_base, double lambda, double task_utility);

/// Rollout groups of one task together with their prompts.
struct TaskBatch {
  std::vector<const PromptContext*> prompts;
  std::vector<const RolloutGroup*> groups;
};

struct TaskObjectiveResult {
  TaskLossBreakdown breakdown;
  TensorSet gradient;  // d objective / d params
};

/// GRPO objective of one task:
///   surrogate = mean_q (1/G) sum_i clipped_surrogate(exp(log pi - log pi_base), A_i)
///   kl_term   = mean_q token_kl(params, reference, q)
///   objective = surrogate - beta * kl_term
/// The ratio base is the stored behaviour log-probability (RatioBase::kOld)
/// or the reference policy (RatioBase::kReference).
TaskObjectiveResult task_objective(const TaskBatch& batch, const PolicyParams& params, const PolicyParams& reference,
                                   double beta, double clip_eps, RatioBase ratio_base = RatioBase::kOld,
                                   bool with_gradient = true);

/// sum_k (N_k / B) * J_k over tasks with a breakdown.
double multitask_objective(std::span<const TaskLossBreakdown> breakdowns, std::span<const std::size_t> quotas,
                           std::size_t budget);

struct OptimizerState {
  std::int64_t steps = 0;
  TensorSet m;
  TensorSet v;
};

struct StepReport {
  double grad_norm = 0.0;  // before clipping
  double clip_scale = 1.0;
  double learning_rate = 0.0;
};

/// Gradient ascent step. Clips the global gradient norm to
/// `grad_clip_norm`, then applies SGD or AdamW (decoupled weight decay).
/// `progress` in [0, 1] drives the cosine schedule.
StepReport optimizer_step(PolicyParams& params, const TensorSet& gradient, OptimizerState& state,
                          const OptimizerConfig& config, double progress = 0.0);

}  // namespace mtgrpo
