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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "mtgrpo/envs.hpp"
#include "mtgrpo/rng.hpp"
#include "mtgrpo/scheduler.hpp"

using namespace mtgrpo;

namespace {

std::size_t total(const std::vector<std::size_t>& q) { return std::accumulate(q.begin(), q.end(), std::size_t{0}); }

std::vector<TaskSpec> pools(std::vector<std::size_t> sizes) {
  std::vector<TaskSpec> tasks;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    TaskSpec t;
    t.task_id = "t" + std::to_string(k);
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      PromptContext q;
      q.prompt_id = static_cast<std::int64_t>(100 * k + i);
      t.prompt_pool.push_back(q);
      t.targets.emplace_back();
    }
    tasks.push_back(t);
  }
  return tasks;
}

}  // namespace

TEST_CASE("allocate_quotas hand values") {
  for (double q : allocate_quotas(std::vector<double>{0.3, 0.3, 0.3, 0.3}, 128, 1.0)) CHECK(q == doctest::Approx(32.0).epsilon(1e-12));
  const auto two = allocate_quotas(std::vector<double>{1.0, 0.0}, 100, 1.0);
  const double sig = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(two[0] == doctest::Approx(100.0 * sig).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(100.0 * (1.0 - sig)).epsilon(1e-12));
  CHECK(two[0] == doctest::Approx(73.10585786300049).epsilon(1e-12));

  const std::vector<double> u{0.5, -0.2, 1.3};
  for (double q : allocate_quotas(u, 90, 100.0)) CHECK(std::abs(q - 30.0) < 0.5);
  const auto sharp = allocate_quotas(u, 90, 0.01);
  CHECK(sharp[2] > 89.999);

  CHECK_THROWS_AS(allocate_quotas(u, 90, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(allocate_quotas(u, 90, -1.0), std::invalid_argument);
  std::vector<std::string> warnings;
  allocate_quotas(u, 2, 1.0, &warnings);
  CHECK(warnings.size() == 1);
}

TEST_CASE("allocate_quotas properties") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> u(2 + rng.below(6));
    for (double& x : u) x = rng.normal() * 3.0;
    const auto q = allocate_quotas(u, 64, 0.7);
    CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(64.0).epsilon(1e-12));

    auto shifted = u;
    for (double& x : shifted) x += 5.0;
    const auto qs = allocate_quotas(shifted, 64, 0.7);
    for (std::size_t k = 0; k < q.size(); ++k) CHECK(qs[k] == doctest::Approx(q[k]).epsilon(1e-12));

    auto raised = u;
    raised[0] += rng.uniform();
    CHECK(allocate_quotas(raised, 64, 0.7)[0] >= q[0]);
  }
  // Numerically stable for large utilities.
  const auto big = allocate_quotas(std::vector<double>{1000.0, 999.0}, 10, 1.0);
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] + big[1] == doctest::Approx(10.0));
}

TEST_CASE("round_quotas keeps the budget") {
  const std::vector<double> whole{16.0, 24.0, 8.0, 16.0};
  CHECK(round_quotas(whole, 64, 3) == std::vector<std::size_t>{16, 24, 8, 16});

  const std::vector<double> f{31.5, 32.5, 32.0, 32.0};
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto q = round_quotas(f, 128, seed);
    REQUIRE(total(q) == 128);
    for (std::size_t k = 0; k + 1 < 4; ++k) CHECK(std::abs(static_cast<double>(q[k]) - f[k]) <= 1.0);
    CHECK(std::abs(static_cast<double>(q[3]) - f[3]) <= 2.0);
  }
  CHECK_THROWS_AS(round_quotas(f, 127, 1), std::invalid_argument);
  CHECK_THROWS_AS(round_quotas(std::vector<double>{-1.0, 2.0}, 1, 1), std::invalid_argument);
}

TEST_CASE("round_quotas redistributes a deficit without going negative") {
  // Nine tasks at 1.1 and a last task at 0.1: rounding up often overshoots.
  std::vector<double> f(9, 1.1);
  f.push_back(0.1);
  bool warned = false;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    std::vector<std::string> warnings;
    const auto q = round_quotas(f, 10, seed, &warnings);
    REQUIRE(total(q) == 10);
    warned = warned || !warnings.empty();
  }
  CHECK(warned);
}

TEST_CASE("stochastic rounding is unbiased") {
  const std::vector<double> f{31.5, 32.5, 32.0, 32.0};
  double sum = 0.0;
  const int n = 100000;
  for (int seed = 0; seed < n; ++seed) sum += static_cast<double>(round_quotas(f, 128, static_cast<std::uint64_t>(seed))[0]);
  CHECK(std::abs(sum / n - 31.5) < 0.02);
}

TEST_CASE("cap_quotas moves excess to tasks with room") {
  std::vector<std::string> warnings;
  const auto q = cap_quotas(std::vector<std::size_t>{30, 10, 24}, std::vector<std::size_t>{20, 40, 40}, &warnings);
  CHECK(q[0] == 20);
  CHECK(total(q) == 64);
  CHECK(q[1] >= 10);
  CHECK(q[2] >= 24);
  CHECK(warnings.size() == 1);
  CHECK(cap_quotas(std::vector<std::size_t>{3, 3}, std::vector<std::size_t>{5, 5}) == std::vector<std::size_t>{3, 3});
  CHECK_THROWS_AS(cap_quotas(std::vector<std::size_t>{6, 6}, std::vector<std::size_t>{5, 5}), std::invalid_argument);
}

TEST_CASE("prompt weights") {
  for (double w : prompt_weights(std::vector<double>{0, 0, 0, 0, 0})) CHECK(w == doctest::Approx(0.2).epsilon(1e-15));
  const auto w = prompt_weights(std::vector<double>{10.0, -10.0});
  const double a = 1.0 / (1.0 + std::exp(-10.0)), b = 1.0 / (1.0 + std::exp(10.0));
  CHECK(w[0] == doctest::Approx(a / (a + b)).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(0.99995).epsilon(1e-5));
  CHECK(w[1] == doctest::Approx(0.0000454).epsilon(1e-2));
  const auto m = prompt_weights(std::vector<double>{0.3, -1.0, 2.0, 0.0});
  CHECK(m[2] > m[0]);
  CHECK(m[0] > m[3]);
  CHECK(m[3] > m[1]);
  CHECK(std::accumulate(m.begin(), m.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sampling without replacement") {
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  auto all = sample_without_replacement(w, 4, 9);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(sample_without_replacement(w, 3, 5) == sample_without_replacement(w, 3, 5));
  CHECK_THROWS_AS(sample_without_replacement(w, 5, 1), std::invalid_argument);

  const std::vector<double> w3{0.5, 0.3, 0.2};
  std::vector<double> first(3, 0.0);
  const int n = 100000;
  for (int s = 0; s < n; ++s) first[sample_without_replacement(w3, 1, static_cast<std::uint64_t>(s))[0]] += 1.0 / n;
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(first[i] - w3[i]) < 0.01);

  const std::vector<double> uniform(10, 0.1);
  std::vector<double> incl(10, 0.0);
  for (int s = 0; s < n; ++s)
    for (auto i : sample_without_replacement(uniform, 3, static_cast<std::uint64_t>(s) + 7777)) incl[i] += 1.0 / n;
  for (double f : incl) CHECK(std::abs(f - 0.3) < 0.01);

  // Zero-weight items are only drawn once the positive mass is exhausted.
  const std::vector<double> zeros{0.0, 0.7, 0.0, 0.3};
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto pick = sample_without_replacement(zeros, 3, s);
    std::set<std::size_t> firsts{pick[0], pick[1]};
    CHECK(firsts == std::set<std::size_t>{1, 3});
  }
}

TEST_CASE("build_schedule from a fresh ledger is symmetric") {
  const auto tasks = pools({20, 20, 20, 20});
  UtilityLedger ledger({"t0", "t1", "t2", "t3"}, 0.9);
  const auto d = build_schedule(ledger, tasks, 64, 1.0, 42, 1);
  for (double q : d.fractional_quotas) CHECK(q == 16.0);
  CHECK(d.integer_quotas == std::vector<std::size_t>{16, 16, 16, 16});
  for (const auto& w : d.prompt_weights)
    for (double x : w) CHECK(x == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_NOTHROW(check_decision(d, 64));
  CHECK(d.selected_prompts[2][0] / 100 == 2);
  const auto again = build_schedule(ledger, tasks, 64, 1.0, 42, 1);
  CHECK(again.selected_prompts == d.selected_prompts);
}

TEST_CASE("build_schedule favours a high-utility task") {
  const auto tasks = pools({64, 64, 64, 64});
  UtilityLedger ledger({"t0", "t1", "t2", "t3"}, 0.9);
  // Task 1 normalizes to U = 2, the others to U = -1: e^3 / (e^3 + 3) > 0.85.
  for (std::size_t k = 0; k < 4; ++k) {
    ledger.tasks[k].ema_pot = k == 1 ? 1.0 : 0.0;
    ledger.tasks[k].ema_syn = k == 1 ? 1.0 : 0.0;
  }
  const auto d = build_schedule(ledger, tasks, 64, 1.0, 3, 1);
  CHECK(d.fractional_quotas[1] > 0.85 * 64);
  CHECK_NOTHROW(check_decision(d, 64));

  ScheduleOptions uniform;
  uniform.uniform_quotas = true;
  const auto u = build_schedule(ledger, tasks, 64, 0.2, 3, 1, uniform);
  for (double q : u.fractional_quotas) CHECK(q == 16.0);
}

TEST_CASE("schedule invariants hold on random ledgers") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 1 + rng.below(5);
    std::vector<std::size_t> sizes;
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < K; ++k) {
      sizes.push_back(8 + rng.below(20));
      ids.push_back("t" + std::to_string(k));
    }
    const auto tasks = pools(sizes);
    UtilityLedger ledger(ids, 0.9);
    for (std::size_t k = 0; k < K; ++k) {
      ledger.tasks[k].ema_pot = rng.uniform();
      ledger.tasks[k].ema_syn = rng.uniform() * 2 - 1;
      for (int p = 0; p < 5; ++p) {
        auto& st = ledger.prompts[k][tasks[k].prompt_pool[rng.below(sizes[k])].prompt_id];
        st.ema_pot = rng.uniform();
        st.ema_prog = rng.normal();
      }
    }
    const std::size_t budget = std::min<std::size_t>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), 1 + rng.below(48));
    const auto d = build_schedule(ledger, tasks, budget, 0.5 + rng.uniform(), rng.next(), trial);
    REQUIRE_NOTHROW(check_decision(d, budget));
    for (std::size_t k = 0; k < K; ++k) {
      CHECK(d.integer_quotas[k] <= sizes[k]);
      for (auto id : d.selected_prompts[k]) CHECK(id / 100 == static_cast<std::int64_t>(k));
    }
  }
}

TEST_CASE("single task takes the whole budget") {
  const auto tasks = pools({40});
  UtilityLedger ledger({"t0"}, 0.9);
  ledger.tasks[0].ema_pot = 0.4;
  const auto d = build_schedule(ledger, tasks, 32, 1.0, 1, 1);
  CHECK(d.fractional_quotas[0] == 32.0);
  CHECK(d.integer_quotas[0] == 32);
}
