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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mtgrpo/config.hpp"
#include "mtgrpo/trainer.hpp"

namespace mtgrpo {

// Run directory layout:
//   config.json      resolved configuration snapshot
//   allocation.csv   step,task_id,utility_pot_ema,utility_syn_ema,utility_combined,quota_fractional,quota_integer
//   utility.csv      step,task_id,stats_step,pot_normalized,syn_normalized,beta,rollouts,pot_instant,syn_instant
//   similarity.csv   step,task_i,task_j,cosine
//   loss.csv         step,task_id,surrogate,kl_term,beta_used,objective,mean_reward,reward_variance
//   prompts.csv      step,task_id,prompt_id,weight,selected   (verbose mode only)
//   summary.json     final evaluation
//   checkpoint.json  final training state
inline constexpr const char* kAllocationHeader =
    "step,task_id,utility_pot_ema,utility_syn_ema,utility_combined,quota_fractional,quota_integer";
inline constexpr const char* kUtilityHeader =
    "step,task_id,stats_step,pot_normalized,syn_normalized,beta,rollouts,pot_instant,syn_instant";
inline constexpr const char* kSimilarityHeader = "step,task_i,task_j,cosine";
inline constexpr const char* kLossHeader =
    "step,task_id,surrogate,kl_term,beta_used,objective,mean_reward,reward_variance";
inline constexpr const char* kPromptHeader = "step,task_id,prompt_id,weight,selected";

/// Formats a double with 17 significant digits (exact round trip).
std::string format_real(double x);

class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& dir, bool verbose_prompts);

  void write_step(const StepRecord& record, const Suite& suite);
  void flush();

 private:
  std::ofstream allocation_;
  std::ofstream utility_;
  std::ofstream similarity_;
  std::ofstream loss_;
  std::ofstream prompts_;
  bool verbose_;
};

struct ReplayReport {
  std::size_t steps = 0;
  std::size_t rows_checked = 0;
  std::vector<std::string> violations;
  std::vector<std::string> summary;  // human-readable lines

  bool ok() const { return violations.empty(); }
};

/// Re-reads every trace in a run directory and checks budget conservation,
/// rollout counts, step monotonicity, EMA causality, loss identities,
/// similarity ranges and (if present) prompt selection consistency.
ReplayReport replay_run(const std::filesystem::path& dir);

}  // namespace mtgrpo
