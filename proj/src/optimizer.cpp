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

#include "mtgrpo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mtgrpo {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("clip_eps must lie in (0, 1)");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("grad_clip_norm must be positive");
  if (!(lambda_kl >= 0.0)) throw std::invalid_argument("lambda_kl must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("AdamW betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
}

OptimizerConfig llm_preset() {
  OptimizerConfig c;
  c.learning_rate = 5e-7;
  c.update_rule = UpdateRule::kAdamW;
  c.schedule = LrSchedule::kCosine;
  return c;
}

std::string to_string(UpdateRule rule) { return rule == UpdateRule::kSgd ? "sgd" : "adamw"; }
std::string to_string(LrSchedule s) { return s == LrSchedule::kConstant ? "constant" : "cosine"; }
std::string to_string(RatioBase b) { return b == RatioBase::kOld ? "old" : "reference"; }

UpdateRule parse_update_rule(const std::string& s) {
  if (s == "sgd") return UpdateRule::kSgd;
  if (s == "adamw") return UpdateRule::kAdamW;
  throw std::invalid_argument("unknown update rule '" + s + "'");
}

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::kConstant;
  if (s == "cosine") return LrSchedule::kCosine;
  throw std::invalid_argument("unknown lr schedule '" + s + "'");
}

RatioBase parse_ratio_base(const std::string& s) {
  if (s == "old") return RatioBase::kOld;
  if (s == "reference") return RatioBase::kReference;
  throw std::invalid_argument("unknown ratio base '" + s + "'");
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps) {
  if (rewards.empty()) throw std::invalid_argument("group_advantages: empty group");
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return std::vector<double>(rewards.size(), 0.0);
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> a(rewards.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (rewards[i] - mean) / (sd + eps);
  return a;
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double dynamic_kl_coefficient(double beta_base, double lambda, double task_utility) {
  return std::max(0.0, beta_base * (1.0 + lambda * task_utility));
}

TaskObjectiveResult task_objective(const TaskBatch& batch, const PolicyParams& params, const PolicyParams& reference,
                                   double beta, double clip_eps, RatioBase ratio_base, bool with_gradient) {
  if (batch.groups.empty()) throw std::invalid_argument("task_objective: no rollout groups");
  if (batch.groups.size() != batch.prompts.size()) throw std::invalid_argument("task_objective: prompts/groups mismatch");
  const auto [V, L, F] = params.shape;
  const double nq = static_cast<double>(batch.groups.size());

  TaskObjectiveResult out;
  if (with_gradient) out.gradient = params.tensors.zeros_like();
  double surrogate = 0.0;
  double kl = 0.0;
  std::vector<double> dlogits(L * V);

  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const auto& prompt = *batch.prompts[g];
    const auto& group = *batch.groups[g];
    if (group.size() == 0 || group.rewards.size() != group.size() || group.logprobs_behavior.size() != group.size()) {
      throw std::invalid_argument("task_objective: malformed rollout group");
    }
    const auto logp = position_log_probs(params, prompt);
    std::vector<double> ref_logp;
    if (ratio_base == RatioBase::kReference) ref_logp = position_log_probs(reference, prompt);
    const auto adv = group_advantages(group.rewards);
    const double G = static_cast<double>(group.size());

    std::fill(dlogits.begin(), dlogits.end(), 0.0);
    double coeff_sum = 0.0;
    double group_surrogate = 0.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& seq = group.sequences[i];
      double lp = 0.0, base = 0.0;
      for (std::size_t p = 0; p < L; ++p) {
        const std::size_t idx = p * V + static_cast<std::size_t>(seq[p]);
        lp += logp[idx];
        if (ratio_base == RatioBase::kReference) base += ref_logp[idx];
      }
      if (ratio_base == RatioBase::kOld) base = group.logprobs_behavior[i];
      const double ratio = std::exp(lp - base);
      const double unclipped = ratio * adv[i];
      const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv[i];
      group_surrogate += std::min(unclipped, clipped);
      if (with_gradient && unclipped <= clipped) {
        // d(ratio * A) = A * ratio * d log pi; the clipped branch is flat.
        const double c = adv[i] * ratio / (G * nq);
        coeff_sum += c;
        for (std::size_t p = 0; p < L; ++p) dlogits[p * V + static_cast<std::size_t>(seq[p])] += c;
      }
    }
    surrogate += group_surrogate / G;
    kl += token_kl(params, reference, prompt);

    if (with_gradient) {
      for (std::size_t p = 0; p < L; ++p)
        for (std::size_t v = 0; v < V; ++v) dlogits[p * V + v] -= coeff_sum * std::exp(logp[p * V + v]);
      backprop_logits(params, prompt, dlogits, out.gradient);
      if (beta != 0.0) out.gradient.axpy(-beta / nq, grad_token_kl(params, reference, prompt));
    }
  }

  out.breakdown.surrogate = surrogate / nq;
  out.breakdown.kl_term = kl / nq;
  out.breakdown.beta_used = beta;
  out.breakdown.objective = out.breakdown.surrogate - beta * out.breakdown.kl_term;
  return out;
}

double multitask_objective(std::span<const TaskLossBreakdown> breakdowns, std::span<const std::size_t> quotas,
                           std::size_t budget) {
  if (breakdowns.size() != quotas.size()) throw std::invalid_argument("multitask_objective: size mismatch");
  if (budget == 0) throw std::invalid_argument("multitask_objective: budget must be positive");
  double total = 0.0;
  for (std::size_t k = 0; k < quotas.size(); ++k) {
    if (quotas[k] == 0) continue;
    total += static_cast<double>(quotas[k]) / static_cast<double>(budget) * breakdowns[k].objective;
  }
  return total;
}

StepReport optimizer_step(PolicyParams& params, const TensorSet& gradient, OptimizerState& state,
                          const OptimizerConfig& config, double progress) {
  if (!params.tensors.same_structure(gradient)) throw std::invalid_argument("optimizer_step: gradient structure mismatch");
  StepReport rep;
  rep.grad_norm = gradient.norm();
  if (!std::isfinite(rep.grad_norm)) throw std::invalid_argument("optimizer_step: non-finite gradient");
  rep.clip_scale = rep.grad_norm > config.grad_clip_norm ? config.grad_clip_norm / rep.grad_norm : 1.0;
  rep.learning_rate = config.learning_rate;
  if (config.schedule == LrSchedule::kCosine) {
    rep.learning_rate *= 0.5 * (1.0 + std::cos(std::numbers::pi * std::clamp(progress, 0.0, 1.0)));
  }
  const double lr = rep.learning_rate;
  ++state.steps;

  if (config.update_rule == UpdateRule::kSgd) {
    params.tensors.axpy(lr * rep.clip_scale, gradient);
    return rep;
  }

  if (state.m.layers.empty()) {
    state.m = params.tensors.zeros_like();
    state.v = params.tensors.zeros_like();
  }
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.steps));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.steps));
  for (std::size_t l = 0; l < params.tensors.layers.size(); ++l) {
    auto& w = params.tensors.layers[l].data;
    auto& m = state.m.layers[l].data;
    auto& v = state.v.layers[l].data;
    const auto& g = gradient.layers[l].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * rep.clip_scale;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      w[i] -= lr * config.weight_decay * w[i];
      w[i] += lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.adam_eps);
    }
  }
  return rep;
}

}  // namespace mtgrpo
