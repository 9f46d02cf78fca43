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

#include "mtgrpo/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mtgrpo/rng.hpp"

namespace mtgrpo {

std::vector<double> allocate_quotas(std::span<const double> utilities, std::size_t budget, double tau,
                                    std::vector<std::string>* warnings) {
  if (!(tau > 0.0)) throw std::invalid_argument("allocate_quotas: tau must be positive");
  if (utilities.empty()) throw std::invalid_argument("allocate_quotas: no tasks");
  if (budget < utilities.size() && warnings) {
    warnings->push_back("budget " + std::to_string(budget) + " is smaller than the number of tasks");
  }
  const double mx = *std::max_element(utilities.begin(), utilities.end());
  std::vector<double> out(utilities.size());
  double z = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::exp((utilities[k] - mx) / tau);
    z += out[k];
  }
  for (double& x : out) x = static_cast<double>(budget) * x / z;
  return out;
}

std::vector<std::size_t> round_quotas(std::span<const double> fractional, std::size_t budget, std::uint64_t seed,
                                      std::vector<std::string>* warnings) {
  if (fractional.empty()) throw std::invalid_argument("round_quotas: no tasks");
  double sum = 0.0;
  for (double x : fractional) {
    if (!(x >= 0.0)) throw std::invalid_argument("round_quotas: quotas must be non-negative");
    sum += x;
  }
  if (std::abs(sum - static_cast<double>(budget)) > 1e-6) {
    throw std::invalid_argument("round_quotas: fractional quotas do not sum to the budget");
  }
  Rng rng(seed);
  const std::size_t K = fractional.size();
  std::vector<std::size_t> out(K, 0);
  long long assigned = 0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double lo = std::floor(fractional[k]);
    const double frac = fractional[k] - lo;
    out[k] = static_cast<std::size_t>(lo) + (rng.uniform() < frac ? 1 : 0);
    assigned += static_cast<long long>(out[k]);
  }
  long long last = static_cast<long long>(budget) - assigned;
  if (last < 0) {
    for (long long d = 0; d < -last; ++d) --*std::max_element(out.begin(), out.end() - 1);
    if (warnings) warnings->push_back("rounding deficit of " + std::to_string(-last) + " taken from the largest quota");
    last = 0;
  }
  out[K - 1] = static_cast<std::size_t>(last);
  return out;
}

std::vector<std::size_t> cap_quotas(std::span<const std::size_t> quotas, std::span<const std::size_t> pool_sizes,
                                    std::vector<std::string>* warnings) {
  if (quotas.size() != pool_sizes.size()) throw std::invalid_argument("cap_quotas: size mismatch");
  const std::size_t total = std::accumulate(quotas.begin(), quotas.end(), std::size_t{0});
  const std::size_t capacity = std::accumulate(pool_sizes.begin(), pool_sizes.end(), std::size_t{0});
  if (total > capacity) throw std::invalid_argument("budget exceeds the combined prompt pools");
  std::vector<std::size_t> out(quotas.begin(), quotas.end());
  std::size_t excess = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k] > pool_sizes[k]) {
      excess += out[k] - pool_sizes[k];
      if (warnings) {
        warnings->push_back("quota " + std::to_string(out[k]) + " of task #" + std::to_string(k) +
                            " exceeds its pool of " + std::to_string(pool_sizes[k]));
      }
      out[k] = pool_sizes[k];
    }
  }
  while (excess > 0) {
    std::vector<std::size_t> open;
    double weight_sum = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out[k] < pool_sizes[k]) {
        open.push_back(k);
        weight_sum += static_cast<double>(out[k]);
      }
    }
    // Proportional shares, floors first, then largest remainders.
    std::vector<double> share(open.size());
    for (std::size_t i = 0; i < open.size(); ++i) {
      const double w = weight_sum > 0.0 ? static_cast<double>(out[open[i]]) / weight_sum : 1.0 / open.size();
      share[i] = w * static_cast<double>(excess);
    }
    std::vector<std::size_t> give(open.size());
    std::size_t given = 0;
    for (std::size_t i = 0; i < open.size(); ++i) {
      give[i] = static_cast<std::size_t>(std::floor(share[i]));
      given += give[i];
    }
    std::vector<std::size_t> order(open.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return share[a] - std::floor(share[a]) > share[b] - std::floor(share[b]);
    });
    for (std::size_t i = 0; given < excess && i < order.size(); ++i, ++given) ++give[order[i]];
    std::size_t placed = 0;
    for (std::size_t i = 0; i < open.size(); ++i) {
      const std::size_t k = open[i];
      const std::size_t room = pool_sizes[k] - out[k];
      const std::size_t g = std::min(room, give[i]);
      out[k] += g;
      placed += g;
    }
    excess -= placed;
  }
  return out;
}

std::vector<double> prompt_weights(std::span<const double> utilities) {
  if (utilities.empty()) throw std::invalid_argument("prompt_weights: empty pool");
  std::vector<double> w(utilities.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = 1.0 / (1.0 + std::exp(-utilities[i]));
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

std::vector<std::size_t> sample_without_replacement(std::span<const double> weights, std::size_t n,
                                                    std::uint64_t seed) {
  if (n > weights.size()) throw std::invalid_argument("sample_without_replacement: n exceeds pool size");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("sample_without_replacement: invalid weight");
  Rng rng(seed);
  std::vector<double> remaining(weights.begin(), weights.end());
  std::vector<bool> taken(weights.size(), false);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t draw = 0; draw < n; ++draw) {
    double total = 0.0;
    for (std::size_t i = 0; i < remaining.size(); ++i)
      if (!taken[i]) total += remaining[i];
    std::size_t pick = remaining.size();
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        if (taken[i]) continue;
        acc += remaining[i];
        if (remaining[i] > 0.0) pick = i;
        if (u < acc) break;
      }
    } else {
      // Only zero-weight items remain: take them uniformly.
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < taken.size(); ++i)
        if (!taken[i]) open.push_back(i);
      pick = open[rng.below(open.size())];
    }
    taken[pick] = true;
    out.push_back(pick);
  }
  return out;
}

ScheduleDecision build_schedule(const UtilityLedger& ledger, std::span<const TaskSpec> tasks, std::size_t budget,
                                double tau, std::uint64_t seed, std::int64_t step, const ScheduleOptions& options) {
  if (tasks.size() != ledger.num_tasks()) throw std::invalid_argument("build_schedule: ledger/task count mismatch");
  ScheduleDecision d;
  d.step = step;
  d.seed_used = seed;
  d.task_utilities = task_utility_breakdown(ledger);

  std::vector<double> utilities(tasks.size(), 0.0);
  if (!options.uniform_quotas) {
    for (std::size_t k = 0; k < tasks.size(); ++k) utilities[k] = d.task_utilities[k].combined;
  }
  d.fractional_quotas = allocate_quotas(utilities, budget, tau, &d.warnings);
  const auto rounded = round_quotas(d.fractional_quotas, budget, derive_seed(seed, {1}), &d.warnings);
  std::vector<std::size_t> pools;
  for (const auto& t : tasks) pools.push_back(t.prompt_pool.size());
  d.integer_quotas = cap_quotas(rounded, pools, &d.warnings);

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    std::vector<std::int64_t> ids;
    for (const auto& p : tasks[k].prompt_pool) ids.push_back(p.prompt_id);
    std::vector<double> u(ids.size(), 0.0);
    if (!options.uniform_prompts) u = prompt_utilities(ledger, k, ids);
    d.prompt_weights.push_back(prompt_weights(u));
    const auto picks = sample_without_replacement(d.prompt_weights.back(), d.integer_quotas[k], derive_seed(seed, {2, k}));
    std::vector<std::int64_t> chosen;
    for (auto i : picks) chosen.push_back(ids[i]);
    d.selected_prompts.push_back(std::move(chosen));
  }
  return d;
}

void check_decision(const ScheduleDecision& d, std::size_t budget) {
  const std::size_t total = std::accumulate(d.integer_quotas.begin(), d.integer_quotas.end(), std::size_t{0});
  if (total != budget) throw std::logic_error("integer quotas do not sum to the budget");
  if (d.selected_prompts.size() != d.integer_quotas.size()) throw std::logic_error("selection/quota size mismatch");
  for (std::size_t k = 0; k < d.integer_quotas.size(); ++k) {
    if (d.selected_prompts[k].size() != d.integer_quotas[k]) throw std::logic_error("selection count != quota");
    std::set<std::int64_t> distinct(d.selected_prompts[k].begin(), d.selected_prompts[k].end());
    if (distinct.size() != d.selected_prompts[k].size()) throw std::logic_error("duplicate prompt in selection");
  }
}

}  // namespace mtgrpo
