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

#include <filesystem>

#include "json.hpp"
#include "mtgrpo/trainer.hpp"

namespace mtgrpo {

inline constexpr const char* kCheckpointFormat = "mtgrpo.checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// JSON container:
///   {"format": "mtgrpo.checkpoint", "version": 1, "step": t, "root_seed": s,
///    "policy": P, "reference": P, "ledger": {...},
///    "optimizer": {"steps": n, "m": [layers], "v": [layers]}}
/// where P = {"vocab_size", "seq_len", "feature_dim",
///            "layers": [{"name", "shape", "data"}]}.
/// Doubles are written in shortest round-trip form, so restore is exact.
nlohmann::json checkpoint_to_json(const TrainState& state);
TrainState checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

nlohmann::json params_to_json(const PolicyParams& params);
PolicyParams params_from_json(const nlohmann::json& j);

}  // namespace mtgrpo
