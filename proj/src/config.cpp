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

#include "mtgrpo/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace mtgrpo {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw std::invalid_argument("unknown config key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kUniformQuotas: return "uniform-quotas";
    case Ablation::kRandomPrompts: return "random-prompts";
    case Ablation::kFixedBeta: return "fixed-beta";
    case Ablation::kUniformBeta: return "uniform-beta";
  }
  return "none";
}

Ablation parse_ablation(const std::string& name) {
  for (auto a : {Ablation::kNone, Ablation::kUniformQuotas, Ablation::kRandomPrompts, Ablation::kFixedBeta,
                 Ablation::kUniformBeta}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown ablation '" + name +
                              "' (expected uniform-quotas, random-prompts, fixed-beta or uniform-beta)");
}

void RunConfig::validate() const {
  if (suite.tasks.empty()) throw std::invalid_argument("config needs at least one task");
  if (budget == 0) throw std::invalid_argument("budget must be positive");
  if (group_size == 0) throw std::invalid_argument("group_size must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(uniform_beta > 0.0)) throw std::invalid_argument("uniform_beta must be positive");
  if (!(init_scale >= 0.0)) throw std::invalid_argument("init_scale must be non-negative");
  if (eval_rollouts == 0) throw std::invalid_argument("eval_rollouts must be positive");
  optimizer.validate();
  std::size_t capacity = 0;
  for (const auto& t : suite.tasks) capacity += t.pool_size;
  if (budget > capacity) throw std::invalid_argument("budget exceeds the combined prompt pools");
}

SuiteConfig RunConfig::effective_suite() const {
  SuiteConfig s = suite;
  s.seed = suite_seed.value_or(seed);
  return s;
}

RunConfig default_run_config() {
  RunConfig c;
  c.suite.policy = {16, 16, 16};
  c.suite.tasks = {
      {"exec", RewardShape::kBinaryExec, 24, 0.3, std::nullopt},
      {"pass", RewardShape::kPassRatio, 24, 0.6, std::nullopt},
      {"cover", RewardShape::kCoverage, 24, 0.5, std::nullopt},
      {"sim", RewardShape::kSimilarity, 24, 0.6, std::nullopt},
  };
  c.suite.alignment = {
      {1.0, 0.6, 0.3, 0.0},
      {0.6, 1.0, 0.3, 0.0},
      {0.3, 0.3, 1.0, 0.0},
      {0.0, 0.0, 0.0, 1.0},
  };
  c.optimizer.update_rule = UpdateRule::kAdamW;
  c.optimizer.learning_rate = 5e-2;
  return c;
}

json to_json(const RunConfig& c) {
  json tasks = json::array();
  for (const auto& t : c.suite.tasks) {
    json jt{{"id", t.task_id},
            {"shape", to_string(t.reward_shape)},
            {"pool_size", t.pool_size},
            {"difficulty", t.difficulty}};
    if (t.beta_base) jt["beta_base"] = *t.beta_base;
    tasks.push_back(std::move(jt));
  }
  json suite{{"vocab_size", c.suite.policy.vocab_size},
             {"seq_len", c.suite.policy.seq_len},
             {"feature_dim", c.suite.policy.feature_dim},
             {"alignment", c.suite.alignment},
             {"coverage_set_size", c.suite.coverage_set_size},
             {"token_preference", c.suite.token_preference},
             {"position_core", c.suite.position_core},
             {"difficulty_scale", c.suite.difficulty_scale},
             {"task_features", c.suite.task_features},
             {"tasks", std::move(tasks)}};
  if (c.suite_seed) suite["seed"] = *c.suite_seed;
  const auto& o = c.optimizer;
  json opt{{"learning_rate", o.learning_rate},   {"clip_eps", o.clip_eps},
           {"grad_clip_norm", o.grad_clip_norm}, {"lambda_kl", o.lambda_kl},
           {"update_rule", to_string(o.update_rule)}, {"schedule", to_string(o.schedule)},
           {"ratio_base", to_string(o.ratio_base)},   {"adam_beta1", o.adam_beta1},
           {"adam_beta2", o.adam_beta2},              {"adam_eps", o.adam_eps},
           {"weight_decay", o.weight_decay}};
  json run{{"budget", c.budget},
           {"group_size", c.group_size},
           {"steps", c.steps},
           {"tau", c.tau},
           {"alpha", c.alpha},
           {"uniform_beta", c.uniform_beta},
           {"init_scale", c.init_scale},
           {"seed", c.seed},
           {"eval_rollouts", c.eval_rollouts},
           {"ablation", to_string(c.ablation)},
           {"out_dir", c.out_dir.string()},
           {"verbose_prompts", c.verbose_prompts}};
  return json{{"run", std::move(run)}, {"optimizer", std::move(opt)}, {"suite", std::move(suite)}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c = default_run_config();
  reject_unknown(j, {"run", "optimizer", "suite"}, "");
  if (auto it = j.find("run"); it != j.end()) {
    const auto& r = *it;
    reject_unknown(r, {"budget", "group_size", "steps", "tau", "alpha", "uniform_beta", "init_scale", "seed",
                       "eval_rollouts", "ablation", "out_dir", "verbose_prompts"},
                   "run");
    read(r, "budget", c.budget);
    read(r, "group_size", c.group_size);
    read(r, "steps", c.steps);
    read(r, "tau", c.tau);
    read(r, "alpha", c.alpha);
    read(r, "uniform_beta", c.uniform_beta);
    read(r, "init_scale", c.init_scale);
    read(r, "seed", c.seed);
    read(r, "eval_rollouts", c.eval_rollouts);
    read(r, "verbose_prompts", c.verbose_prompts);
    if (r.contains("ablation")) c.ablation = parse_ablation(r.at("ablation").get<std::string>());
    if (r.contains("out_dir")) c.out_dir = r.at("out_dir").get<std::string>();
  }
  if (auto it = j.find("optimizer"); it != j.end()) {
    const auto& o = *it;
    reject_unknown(o, {"learning_rate", "clip_eps", "grad_clip_norm", "lambda_kl", "update_rule", "schedule",
                       "ratio_base", "adam_beta1", "adam_beta2", "adam_eps", "weight_decay"},
                   "optimizer");
    read(o, "learning_rate", c.optimizer.learning_rate);
    read(o, "clip_eps", c.optimizer.clip_eps);
    read(o, "grad_clip_norm", c.optimizer.grad_clip_norm);
    read(o, "lambda_kl", c.optimizer.lambda_kl);
    read(o, "adam_beta1", c.optimizer.adam_beta1);
    read(o, "adam_beta2", c.optimizer.adam_beta2);
    read(o, "adam_eps", c.optimizer.adam_eps);
    read(o, "weight_decay", c.optimizer.weight_decay);
    if (o.contains("update_rule")) c.optimizer.update_rule = parse_update_rule(o.at("update_rule").get<std::string>());
    if (o.contains("schedule")) c.optimizer.schedule = parse_lr_schedule(o.at("schedule").get<std::string>());
    if (o.contains("ratio_base")) c.optimizer.ratio_base = parse_ratio_base(o.at("ratio_base").get<std::string>());
  }
  if (auto it = j.find("suite"); it != j.end()) {
    const auto& s = *it;
    reject_unknown(s, {"vocab_size", "seq_len", "feature_dim", "alignment", "coverage_set_size", "token_preference",
                       "position_core", "difficulty_scale", "task_features", "tasks", "seed"},
                   "suite");
    read(s, "vocab_size", c.suite.policy.vocab_size);
    read(s, "seq_len", c.suite.policy.seq_len);
    read(s, "feature_dim", c.suite.policy.feature_dim);
    read(s, "coverage_set_size", c.suite.coverage_set_size);
    read(s, "token_preference", c.suite.token_preference);
    read(s, "position_core", c.suite.position_core);
    read(s, "difficulty_scale", c.suite.difficulty_scale);
    read(s, "task_features", c.suite.task_features);
    if (s.contains("seed")) c.suite_seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("tasks")) {
      c.suite.tasks.clear();
      for (const auto& jt : s.at("tasks")) {
        reject_unknown(jt, {"id", "shape", "pool_size", "difficulty", "beta_base"}, "suite.tasks[]");
        TaskConfig t;
        t.task_id = jt.at("id").get<std::string>();
        t.reward_shape = parse_reward_shape(jt.at("shape").get<std::string>());
        read(jt, "pool_size", t.pool_size);
        read(jt, "difficulty", t.difficulty);
        if (jt.contains("beta_base")) t.beta_base = jt.at("beta_base").get<double>();
        c.suite.tasks.push_back(std::move(t));
      }
      // A task list without an explicit alignment gets the identity.
      if (!s.contains("alignment")) c.suite.alignment.clear();
    }
    if (s.contains("alignment")) c.suite.alignment = s.at("alignment").get<std::vector<std::vector<double>>>();
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << to_json(config).dump(2) << '\n';
}

}  // namespace mtgrpo
