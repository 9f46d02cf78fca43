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

#include "mtgrpo/envs.hpp"
#include "mtgrpo/utility.hpp"

namespace mtgrpo {

// Quota and selection vectors are indexed in suite task order; that order is
// also the rounding order, so its last entry absorbs the rounding residue.

/// N_k = B * softmax(U / tau)_k, computed with max subtraction.
std::vector<double> allocate_quotas(std::span<const double> utilities, std::size_t budget, double tau,
                                    std::vector<std::string>* warnings = nullptr);

/// Stochastic rounding: floor(N_k) + 1 with probability frac(N_k). The last
/// task takes B minus the others. If that would be negative, it is set to 0
/// and the deficit is taken from the largest quota (with a warning).
std::vector<std::size_t> round_quotas(std::span<const double> fractional, std::size_t budget, std::uint64_t seed,
                                      std::vector<std::string>* warnings = nullptr);

/// Caps each quota at its pool size and hands the excess to the tasks with
/// spare room, proportionally to their quotas (largest remainder).
std::vector<std::size_t> cap_quotas(std::span<const std::size_t> quotas, std::span<const std::size_t> pool_sizes,
                                    std::vector<std::string>* warnings = nullptr);

/// w(q) = sigmoid(U(q)) / sum sigmoid(U(q')).
std::vector<double> prompt_weights(std::span<const double> utilities);

/// Sequential weighted draws without replacement, renormalizing over the
/// remaining items after each draw. Returns pool indices in draw order.
std::vector<std::size_t> sample_without_replacement(std::span<const double> weights, std::size_t n,
                                                    std::uint64_t seed);

struct ScheduleOptions {
  bool uniform_quotas = false;  // ignore task utilities when allocating
  bool uniform_prompts = false;  // ignore prompt utilities when sampling
};

struct ScheduleDecision {
  std::int64_t step = 0;
  std::vector<TaskUtilityBreakdown> task_utilities;
  std::vector<double> fractional_quotas;
  std::vector<std::size_t> integer_quotas;
  std::vector<std::vector<double>> prompt_weights;          // per task, pool order
  std::vector<std::vector<std::int64_t>> selected_prompts;  // per task, draw order
  std::uint64_t seed_used = 0;
  std::vector<std::string> warnings;
};

/// Task utilities -> softmax quotas -> stochastic rounding -> pool caps ->
/// prompt utilities -> sigmoid weights -> weighted sampling.
ScheduleDecision build_schedule(const UtilityLedger& ledger, std::span<const TaskSpec> tasks, std::size_t budget,
                                double tau, std::uint64_t seed, std::int64_t step = 0,
                                const ScheduleOptions& options = {});

/// Throws std::logic_error if a decision breaks budget, selection-count or
/// distinctness invariants.
void check_decision(const ScheduleDecision& decision, std::size_t budget);

}  // namespace mtgrpo
