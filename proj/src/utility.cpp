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

#include "mtgrpo/utility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtgrpo {

double reward_variance(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("reward_variance: empty reward list");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double acc = 0.0;
  for (double r : rewards) acc += (r - mean) * (r - mean);
  return acc / static_cast<double>(rewards.size());
}

double task_potential(std::span<const double> prompt_variances) {
  if (prompt_variances.empty()) throw std::invalid_argument("task_potential: no prompts");
  double acc = 0.0;
  for (double v : prompt_variances) acc += v;
  return acc / static_cast<double>(prompt_variances.size());
}

double prompt_progress(double current_mean, std::optional<double> last_mean) {
  if (!std::isfinite(current_mean)) throw std::invalid_argument("prompt_progress: non-finite mean");
  return last_mean ? current_mean - *last_mean : 0.0;
}

double ema_update(double prev, double new_value, double alpha) {
  return alpha * new_value + (1.0 - alpha) * prev;
}

std::vector<double> normalize_unit(std::span<const double> values, double eps) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - min + eps;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / range;
  return out;
}

std::vector<double> normalize_signed(std::span<const double> values, double eps) {
  auto out = normalize_unit(values, eps);
  for (double& x : out) x = 2.0 * x - 1.0;
  return out;
}

CompressedGradient compress_gradient(const TensorSet& grad) {
  CompressedGradient out;
  out.vector.reserve(compressed_dim(grad));
  for (const auto& layer : grad.layers) {
    const std::size_t n = layer.last_dim();
    const std::size_t start = out.vector.size();
    out.vector.resize(start + n, 0.0);
    for (std::size_t i = 0; i < layer.numel(); ++i) out.vector[start + i % n] += layer.data[i];
    out.layer_offsets.push_back({layer.name, start, n});
  }
  return out;
}

std::size_t compressed_dim(const TensorSet& structure) {
  std::size_t d = 0;
  for (const auto& l : structure.layers) d += l.last_dim();
  return d;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  // 1 - |u^ - v^|^2 / 2 (or its mirror for opposed vectors) is exactly +-1
  // for identical or negated inputs.
  const double nu = std::sqrt(uu), nv = std::sqrt(vv);
  const double sign = uv >= 0.0 ? 1.0 : -1.0;
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double diff = u[i] / nu - sign * (v[i] / nv);
    d += diff * diff;
  }
  return std::clamp(sign * (1.0 - 0.5 * d), -1.0, 1.0);
}

double cosine_similarity(const CompressedGradient& u, const CompressedGradient& v) {
  return cosine_similarity(u.vector, v.vector);
}

double task_synergy(std::size_t k, std::span<const std::vector<double>> grads) {
  if (k >= grads.size()) throw std::invalid_argument("task_synergy: task index out of range");
  if (grads.size() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < grads.size(); ++j) {
    if (j == k) continue;
    if (grads[k].empty() || grads[j].empty()) continue;  // zero vector: cosine 0
    acc += cosine_similarity(grads[k], grads[j]);
  }
  return acc / static_cast<double>(grads.size() - 1);
}

UtilityLedger::UtilityLedger(std::vector<std::string> ids, double a)
    : alpha(a), task_ids(std::move(ids)), tasks(task_ids.size()), prompts(task_ids.size()) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("EMA alpha must lie in (0, 1]");
}

void gradient_ema_update(UtilityLedger& ledger, std::size_t k, const CompressedGradient& grad) {
  auto& ema = ledger.tasks.at(k).grad_ema;
  if (ema.empty()) ema.assign(grad.dim(), 0.0);
  if (ema.size() != grad.dim()) throw std::invalid_argument("gradient_ema_update: dimension changed");
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = ema_update(ema[i], grad.vector[i], ledger.alpha);
}

double ledger_synergy(const UtilityLedger& ledger, std::size_t k) {
  std::vector<std::vector<double>> grads;
  grads.reserve(ledger.tasks.size());
  for (const auto& t : ledger.tasks) grads.push_back(t.grad_ema);
  return task_synergy(k, grads);
}

void fold_task_statistics(UtilityLedger& ledger, std::int64_t step) {
  for (auto& t : ledger.tasks) {
    if (!t.pending_step) continue;
    if (*t.pending_step >= step) throw std::logic_error("task statistics from the current step cannot be folded");
    if (t.pending_pot) t.ema_pot = ema_update(t.ema_pot, *t.pending_pot, ledger.alpha);
    if (t.pending_syn) t.ema_syn = ema_update(t.ema_syn, *t.pending_syn, ledger.alpha);
    t.stats_step = *t.pending_step;
    t.pending_pot.reset();
    t.pending_syn.reset();
    t.pending_step.reset();
  }
}

void fold_prompt_statistics(UtilityLedger& ledger, std::size_t k, std::int64_t step) {
  for (auto& [id, p] : ledger.prompts.at(k)) {
    if (!p.pending_pot && !p.pending_prog) continue;
    if (!p.last_seen_step || *p.last_seen_step >= step) {
      throw std::logic_error("prompt statistics from the current step cannot be folded");
    }
    if (p.pending_pot) p.ema_pot = ema_update(p.ema_pot, *p.pending_pot, ledger.alpha);
    if (p.pending_prog) p.ema_prog = ema_update(p.ema_prog, *p.pending_prog, ledger.alpha);
    p.stats_step = *p.last_seen_step;
    p.pending_pot.reset();
    p.pending_prog.reset();
  }
}

void record_prompt_observation(UtilityLedger& ledger, std::size_t k, std::int64_t prompt_id,
                               std::span<const double> rewards, std::int64_t step) {
  auto& p = ledger.prompts.at(k)[prompt_id];
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  p.pending_pot = prompt_potential(rewards);
  p.pending_prog = prompt_progress(mean, p.last_mean_reward);
  p.last_mean_reward = mean;
  p.last_seen_step = step;
}

std::vector<TaskUtilityBreakdown> task_utility_breakdown(const UtilityLedger& ledger) {
  std::vector<double> pot, syn;
  for (const auto& t : ledger.tasks) {
    pot.push_back(t.ema_pot);
    syn.push_back(t.ema_syn);
  }
  const auto pn = normalize_unit(pot);
  const auto sn = normalize_signed(syn);
  std::vector<TaskUtilityBreakdown> out(ledger.tasks.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {pn[k], sn[k], pn[k] + sn[k]};
  return out;
}

double combined_task_utility(const UtilityLedger& ledger, std::size_t k) {
  return task_utility_breakdown(ledger).at(k).combined;
}

std::vector<double> prompt_utilities(const UtilityLedger& ledger, std::size_t k,
                                     std::span<const std::int64_t> pool_ids) {
  const auto& tracked = ledger.prompts.at(k);
  std::vector<double> pot, prog;
  for (const auto& [id, p] : tracked) {
    pot.push_back(p.ema_pot);
    prog.push_back(p.ema_prog);
  }
  const auto pn = normalize_unit(pot);
  const auto gn = normalize_signed(prog);
  std::map<std::int64_t, double> utility;
  std::size_t i = 0;
  for (const auto& [id, p] : tracked) {
    utility[id] = pn[i] + gn[i];
    ++i;
  }
  std::vector<double> out;
  out.reserve(pool_ids.size());
  for (auto id : pool_ids) {
    auto it = utility.find(id);
    out.push_back(it == utility.end() ? 0.0 : it->second);
  }
  return out;
}

double combined_prompt_utility(const UtilityLedger& ledger, std::size_t k, std::int64_t prompt_id) {
  const std::int64_t ids[] = {prompt_id};
  return prompt_utilities(ledger, k, ids)[0];
}

namespace {

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace

nlohmann::json ledger_to_json(const UtilityLedger& ledger) {
  nlohmann::json j;
  j["alpha"] = ledger.alpha;
  j["step"] = ledger.step;
  j["tasks"] = nlohmann::json::array();
  for (std::size_t k = 0; k < ledger.tasks.size(); ++k) {
    const auto& t = ledger.tasks[k];
    nlohmann::json jt{{"task_id", ledger.task_ids[k]},
                      {"ema_pot", t.ema_pot},
                      {"ema_syn", t.ema_syn},
                      {"grad_ema", t.grad_ema},
                      {"pending_pot", opt(t.pending_pot)},
                      {"pending_syn", opt(t.pending_syn)},
                      {"pending_step", opt(t.pending_step)},
                      {"stats_step", t.stats_step}};
    nlohmann::json jp = nlohmann::json::array();
    for (const auto& [id, p] : ledger.prompts[k]) {
      jp.push_back({{"prompt_id", id},
                    {"ema_pot", p.ema_pot},
                    {"ema_prog", p.ema_prog},
                    {"last_mean_reward", opt(p.last_mean_reward)},
                    {"last_seen_step", opt(p.last_seen_step)},
                    {"pending_pot", opt(p.pending_pot)},
                    {"pending_prog", opt(p.pending_prog)},
                    {"stats_step", p.stats_step}});
    }
    jt["prompts"] = std::move(jp);
    j["tasks"].push_back(std::move(jt));
  }
  return j;
}

UtilityLedger ledger_from_json(const nlohmann::json& j) {
  std::vector<std::string> ids;
  for (const auto& jt : j.at("tasks")) ids.push_back(jt.at("task_id").get<std::string>());
  UtilityLedger ledger(ids, j.at("alpha").get<double>());
  ledger.step = j.at("step").get<std::int64_t>();
  std::size_t k = 0;
  for (const auto& jt : j.at("tasks")) {
    auto& t = ledger.tasks[k];
    t.ema_pot = jt.at("ema_pot").get<double>();
    t.ema_syn = jt.at("ema_syn").get<double>();
    t.grad_ema = jt.at("grad_ema").get<std::vector<double>>();
    t.pending_pot = opt_from<double>(jt.at("pending_pot"));
    t.pending_syn = opt_from<double>(jt.at("pending_syn"));
    t.pending_step = opt_from<std::int64_t>(jt.at("pending_step"));
    t.stats_step = jt.at("stats_step").get<std::int64_t>();
    for (const auto& jp : jt.at("prompts")) {
      auto& p = ledger.prompts[k][jp.at("prompt_id").get<std::int64_t>()];
      p.ema_pot = jp.at("ema_pot").get<double>();
      p.ema_prog = jp.at("ema_prog").get<double>();
      p.last_mean_reward = opt_from<double>(jp.at("last_mean_reward"));
      p.last_seen_step = opt_from<std::int64_t>(jp.at("last_seen_step"));
      p.pending_pot = opt_from<double>(jp.at("pending_pot"));
      p.pending_prog = opt_from<double>(jp.at("pending_prog"));
      p.stats_step = jp.at("stats_step").get<std::int64_t>();
    }
    ++k;
  }
  return ledger;
}

}  // namespace mtgrpo
