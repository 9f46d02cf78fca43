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
#include <ostream>
#include <string>

#include "mtgrpo/config.hpp"
#include "mtgrpo/trainer.hpp"

namespace mtgrpo {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitViolations = 3 };

struct CliOptions {
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::string> ablation;
  bool verbose_prompts = false;
};

/// Loads the config and applies command-line overrides.
RunConfig resolve_config(const CliOptions& options);

struct RunOutcome {
  TrainResult result;
  std::filesystem::path dir;
};

/// Trains and writes the full run directory (config snapshot, traces,
/// summary, checkpoint).
RunOutcome run_to_directory(const RunConfig& config);

int cmd_train(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_ablate(const CliOptions& options, const std::string& ablation, std::ostream& out, std::ostream& err);

struct CompressionBench {
  std::size_t full_params = 0;
  std::size_t compressed_dim = 0;
  double reduction_ratio = 0.0;
  double overhead_seconds = 0.0;  // compression + pairwise cosines, per step
  double forward_backward_seconds = 0.0;
  double overhead_percent = 0.0;
};

CompressionBench bench_compression(const RunConfig& config, std::size_t repeats = 5);
int cmd_bench_compression(const CliOptions& options, std::ostream& out, std::ostream& err);

int cmd_replay(const std::filesystem::path& trace_dir, std::ostream& out, std::ostream& err);

}  // namespace mtgrpo
