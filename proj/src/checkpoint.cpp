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

#include "mtgrpo/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace mtgrpo {

using nlohmann::json;

namespace {

json layers_to_json(const TensorSet& set) {
  json out = json::array();
  for (const auto& l : set.layers) out.push_back({{"name", l.name}, {"shape", l.shape}, {"data", l.data}});
  return out;
}

TensorSet layers_from_json(const json& j) {
  TensorSet set;
  for (const auto& jl : j) {
    set.layers.emplace_back(jl.at("name").get<std::string>(), jl.at("shape").get<std::vector<std::size_t>>(),
                            jl.at("data").get<std::vector<double>>());
  }
  return set;
}

}  // namespace

json params_to_json(const PolicyParams& p) {
  return {{"vocab_size", p.shape.vocab_size},
          {"seq_len", p.shape.seq_len},
          {"feature_dim", p.shape.feature_dim},
          {"layers", layers_to_json(p.tensors)}};
}

PolicyParams params_from_json(const json& j) {
  PolicyParams p;
  p.shape.vocab_size = j.at("vocab_size").get<std::size_t>();
  p.shape.seq_len = j.at("seq_len").get<std::size_t>();
  p.shape.feature_dim = j.at("feature_dim").get<std::size_t>();
  p.tensors = layers_from_json(j.at("layers"));
  p.validate();
  return p;
}

json checkpoint_to_json(const TrainState& s) {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"step", s.step},
          {"root_seed", s.root_seed},
          {"policy", params_to_json(s.params)},
          {"reference", params_to_json(s.ref_params)},
          {"ledger", ledger_to_json(s.ledger)},
          {"optimizer", {{"steps", s.optimizer.steps}, {"m", layers_to_json(s.optimizer.m)}, {"v", layers_to_json(s.optimizer.v)}}}};
}

TrainState checkpoint_from_json(const json& j) {
  if (j.value("format", std::string{}) != kCheckpointFormat) throw std::invalid_argument("not a checkpoint file");
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::invalid_argument("unsupported checkpoint version " + j.at("version").dump());
  }
  TrainState s;
  s.step = j.at("step").get<std::int64_t>();
  s.root_seed = j.at("root_seed").get<std::uint64_t>();
  s.params = params_from_json(j.at("policy"));
  s.old_params = s.params;
  s.ref_params = params_from_json(j.at("reference"));
  s.ledger = ledger_from_json(j.at("ledger"));
  const auto& o = j.at("optimizer");
  s.optimizer.steps = o.at("steps").get<std::int64_t>();
  s.optimizer.m = layers_from_json(o.at("m"));
  s.optimizer.v = layers_from_json(o.at("v"));
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(state).dump() << '\n';
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open checkpoint '" + path.string() + "'");
  return checkpoint_from_json(json::parse(in));
}

}  // namespace mtgrpo
