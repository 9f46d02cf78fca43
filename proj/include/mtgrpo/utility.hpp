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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtgrpo/tensor.hpp"

namespace mtgrpo {

inline constexpr double kNormEps = 1e-8;

// ---------------------------------------------------------------------------
// Raw statistics

/// Population variance (divide by G).
double reward_variance(std::span<const double> rewards);

/// Mean of per-prompt reward variances.
double task_potential(std::span<const double> prompt_variances);

inline double prompt_potential(std::span<const double> rewards) { return reward_variance(rewards); }

/// current - last, or 0 when the prompt has no earlier observation.
double prompt_progress(double current_mean, std::optional<double> last_mean);

/// alpha * new_value + (1 - alpha) * prev.
double ema_update(double prev, double new_value, double alpha);

/// (v - min) / (max - min + eps), into [0, 1].
std::vector<double> normalize_unit(std::span<const double> values, double eps = kNormEps);

/// 2 * normalize_unit - 1, into [-1, 1].
std::vector<double> normalize_signed(std::span<const double> values, double eps = kNormEps);

// ---------------------------------------------------------------------------
// Gradient compression

struct LayerSpan {
  std::string name;
  std::size_t start = 0;
  std::size_t length = 0;
  friend bool operator==(const LayerSpan&, const LayerSpan&) = default;
};

/// One vector per task: every layer summed over all axes but the last,
/// concatenated in layer order.
struct CompressedGradient {
  std::vector<double> vector;
  std::vector<LayerSpan> layer_offsets;

  std::size_t dim() const { return vector.size(); }
};

CompressedGradient compress_gradient(const TensorSet& grad);

/// Compressed dimension D_r for a layer structure.
std::size_t compressed_dim(const TensorSet& structure);

/// <u, v> / (|u| |v|), clamped to [-1, 1]; 0 when either vector is zero.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const CompressedGradient& u, const CompressedGradient& v);

/// Mean cosine between task k's gradient and every other task's. 0 for K = 1.
double task_synergy(std::size_t k, std::span<const std::vector<double>> grads);

// ---------------------------------------------------------------------------
// Ledger

struct TaskUtilityState {
  double ema_pot = 0.0;
  double ema_syn = 0.0;
  std::vector<double> grad_ema;  // empty until the first gradient arrives
  // Instantaneous utilities observed at `pending_step`, folded into the EMAs
  // at the start of the next step.
  std::optional<double> pending_pot;
  std::optional<double> pending_syn;
  std::optional<std::int64_t> pending_step;
  // Step whose statistics were last folded in (0: none yet).
  std::int64_t stats_step = 0;
};

struct PromptUtilityState {
  double ema_pot = 0.0;
  double ema_prog = 0.0;
  std::optional<double> last_mean_reward;
  std::optional<std::int64_t> last_seen_step;
  std::optional<double> pending_pot;
  std::optional<double> pending_prog;
  std::int64_t stats_step = 0;
};

struct UtilityLedger {
  double alpha = 0.9;
  std::int64_t step = 0;
  std::vector<std::string> task_ids;
  std::vector<TaskUtilityState> tasks;
  /// Lazily tracked prompts, per task, keyed by prompt id.
  std::vector<std::map<std::int64_t, PromptUtilityState>> prompts;

  UtilityLedger() = default;
  UtilityLedger(std::vector<std::string> ids, double alpha);

  std::size_t num_tasks() const { return tasks.size(); }
};

/// grad_ema[k] <- alpha * grad + (1 - alpha) * grad_ema[k]. A missing EMA
/// counts as the zero vector. Dimension is fixed after the first update.
void gradient_ema_update(UtilityLedger& ledger, std::size_t k, const CompressedGradient& grad);

/// Synergy of task k computed from the current gradient EMAs.
double ledger_synergy(const UtilityLedger& ledger, std::size_t k);

/// Folds pending task statistics into the scalar EMAs. Only statistics from
/// steps earlier than `step` are accepted.
void fold_task_statistics(UtilityLedger& ledger, std::int64_t step);

/// Same for the tracked prompts of task k.
void fold_prompt_statistics(UtilityLedger& ledger, std::size_t k, std::int64_t step);

/// Records the rollout rewards of one prompt at `step`: potential = reward
/// variance, progress = mean minus mean at the previous observation.
void record_prompt_observation(UtilityLedger& ledger, std::size_t k, std::int64_t prompt_id,
                               std::span<const double> rewards, std::int64_t step);

struct TaskUtilityBreakdown {
  double pot_normalized = 0.0;
  double syn_normalized = 0.0;
  double combined = 0.0;
};

/// Normalized EMA potential (into [0,1]) plus normalized EMA synergy (into
/// [-1,1]), normalized across all tasks.
std::vector<TaskUtilityBreakdown> task_utility_breakdown(const UtilityLedger& ledger);
double combined_task_utility(const UtilityLedger& ledger, std::size_t k);

/// Utility of every prompt in `pool_ids`. Tracked prompts are normalized
/// within the task (potential into [0,1], progress into [-1,1]); untracked
/// prompts get 0.
std::vector<double> prompt_utilities(const UtilityLedger& ledger, std::size_t k,
                                     std::span<const std::int64_t> pool_ids);
double combined_prompt_utility(const UtilityLedger& ledger, std::size_t k, std::int64_t prompt_id);

nlohmann::json ledger_to_json(const UtilityLedger& ledger);
UtilityLedger ledger_from_json(const nlohmann::json& j);

}  // namespace mtgrpo
