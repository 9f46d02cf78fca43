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
#include <optional>
#include <string>

#include "json.hpp"
#include "mtgrpo/envs.hpp"
#include "mtgrpo/optimizer.hpp"

namespace mtgrpo {

enum class Ablation { kNone, kUniformQuotas, kRandomPrompts, kFixedBeta, kUniformBeta };

std::string to_string(Ablation a);
/// Accepts "none", "uniform-quotas", "random-prompts", "fixed-beta",
/// "uniform-beta"; throws std::invalid_argument otherwise.
Ablation parse_ablation(const std::string& name);

struct RunConfig {
  SuiteConfig suite;
  std::size_t budget = 64;      // B, prompts per step
  std::size_t group_size = 8;   // G, rollouts per prompt
  std::size_t steps = 300;      // M
  double tau = 1.0;
  double alpha = 0.9;
  OptimizerConfig optimizer;
  /// KL base applied to every task under the uniform-beta ablation.
  double uniform_beta = 5e-3;
  double init_scale = 0.01;
  std::uint64_t seed = 1;
  /// Seed of the task suite; the run seed when unset.
  std::optional<std::uint64_t> suite_seed;
  std::size_t eval_rollouts = 32;
  Ablation ablation = Ablation::kNone;
  std::filesystem::path out_dir = "runs/default";
  bool verbose_prompts = false;

  /// Throws std::invalid_argument if any field is out of range.
  void validate() const;

  /// Suite configuration with the effective seed filled in.
  SuiteConfig effective_suite() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// The default four-task suite: one task per reward shape.
RunConfig default_run_config();

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace mtgrpo
