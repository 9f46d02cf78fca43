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

#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "mtgrpo/error.hpp"
#include "mtgrpo/policy.hpp"
#include "mtgrpo/rng.hpp"
#include "oracles.hpp"

using namespace mtgrpo;

namespace {

PromptContext unit_prompt(std::size_t F) {
  PromptContext q;
  q.prompt_id = 3;
  q.features.assign(F, 0.0);
  q.features[0] = 1.0;
  return q;
}

// Logit +1e6 on `argmax[p]` and -1e6 elsewhere, via the weight on feature 0.
PolicyParams one_hot_policy(std::size_t V, const Sequence& argmax) {
  const std::size_t L = argmax.size();
  PolicyParams params = make_uniform_params({V, L, 1});
  auto& W = params.tensors.at(kWeightLayer).data;
  for (std::size_t p = 0; p < L; ++p)
    for (std::size_t v = 0; v < V; ++v) W[p * V + v] = static_cast<int>(v) == argmax[p] ? 1e6 : -1e6;
  return params;
}

}  // namespace

TEST_CASE("parameter layout and validation") {
  const auto params = make_random_params({5, 3, 4}, 1, 0.1);
  CHECK_NOTHROW(params.validate());
  CHECK(params.tensors.at(kWeightLayer).shape == std::vector<std::size_t>{3, 5, 4});
  CHECK(params.tensors.at(kBiasLayer).shape == std::vector<std::size_t>{5});
  CHECK(make_random_params({5, 3, 4}, 1, 0.1) == params);
  CHECK_FALSE(make_random_params({5, 3, 4}, 2, 0.1) == params);

  auto bad = params;
  bad.tensors.layers[0].data[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = params;
  bad.tensors.layers.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("one-hot logits sample only the argmax sequence") {
  const Sequence target{2, 0, 3};
  const auto params = one_hot_policy(4, target);
  const auto group = sample_rollouts(params, unit_prompt(1), 16, 99);
  REQUIRE(group.size() == 16);
  for (const auto& s : group.sequences) CHECK(s == target);
  CHECK(std::abs(sequence_log_prob(params, unit_prompt(1), target)) < 1e-6);
  CHECK(greedy_sequence(params, unit_prompt(1)) == target);
}

TEST_CASE("sampling is seeded and behaviour log-probs are exact") {
  const auto params = make_random_params({4, 3, 3}, 8, 1.0);
  const auto q = oracle::random_prompt(3, 17);
  const auto a = sample_rollouts(params, q, 12, 5);
  const auto b = sample_rollouts(params, q, 12, 5);
  CHECK(a.sequences == b.sequences);
  CHECK(a.logprobs_behavior == b.logprobs_behavior);
  CHECK(a.prompt_id == q.prompt_id);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.logprobs_behavior[i] == sequence_log_prob(params, q, a.sequences[i]));
  CHECK(sample_rollouts(params, q, 12, 6).sequences != a.sequences);
  CHECK_THROWS_AS(sample_rollouts(params, q, 0, 5), std::invalid_argument);
}

TEST_CASE("uniform policy token frequencies converge to 1/V") {
  const auto params = make_uniform_params({4, 1, 2});
  const auto group = sample_rollouts(params, unit_prompt(2), 100000, 2024);
  std::vector<double> freq(4, 0.0);
  for (const auto& s : group.sequences) freq[static_cast<std::size_t>(s[0])] += 1.0 / 100000.0;
  for (double f : freq) CHECK(std::abs(f - 0.25) < 0.01);
}

TEST_CASE("sampled sequences follow the exact distribution") {
  const auto params = make_random_params({3, 2, 2}, 4, 1.5);
  const auto q = oracle::random_prompt(2, 4);
  const auto table = oracle::softmax_table(params, q);
  const auto group = sample_rollouts(params, q, 200000, 77);
  std::map<Sequence, double> counts;
  for (const auto& s : group.sequences) counts[s] += 1.0 / 200000.0;
  for (const auto& s : oracle::all_sequences(3, 2)) CHECK(std::abs(counts[s] - oracle::sequence_prob(table, s)) < 0.005);
}

TEST_CASE("sequence_log_prob hand values and brute-force oracle") {
  const auto uniform = make_uniform_params({4, 3, 2});
  CHECK(sequence_log_prob(uniform, unit_prompt(2), Sequence{0, 3, 1}) == doctest::Approx(3.0 * std::log(0.25)).epsilon(1e-12));
  CHECK(sequence_log_prob(uniform, unit_prompt(2), Sequence{0, 3, 1}) == doctest::Approx(-4.158883).epsilon(1e-6));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto params = make_random_params({3, 3, 4}, seed, 2.0);
    const auto q = oracle::random_prompt(4, seed + 100);
    const auto table = oracle::softmax_table(params, q);
    double total = 0.0;
    for (const auto& s : oracle::all_sequences(3, 3)) {
      const double lp = sequence_log_prob(params, q, s);
      CHECK(lp <= 0.0);
      CHECK(lp == doctest::Approx(std::log(oracle::sequence_prob(table, s))).epsilon(1e-10));
      total += std::exp(lp);
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(sequence_log_prob(uniform, unit_prompt(2), Sequence{0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(sequence_log_prob(uniform, unit_prompt(2), Sequence{0, 1, 4}), std::invalid_argument);
  CHECK_THROWS_AS(sequence_log_prob(uniform, unit_prompt(3), Sequence{0, 1, 2}), std::invalid_argument);
}

TEST_CASE("non-finite logits raise a numeric error") {
  auto params = make_uniform_params({3, 2, 2});
  params.tensors.at(kBiasLayer).data[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(compute_logits(params, unit_prompt(2)), NumericError);
  CHECK_THROWS_AS(sample_rollouts(params, unit_prompt(2), 2, 1), NumericError);
}

TEST_CASE("token_kl closed forms") {
  const auto params = make_random_params({4, 3, 2}, 3, 1.0);
  const auto q = oracle::random_prompt(2, 3);
  CHECK(std::abs(token_kl(params, params, q)) < 1e-12);

  const auto uniform = make_uniform_params({2, 1, 1});
  auto ref = make_uniform_params({2, 1, 1});
  ref.tensors.at(kBiasLayer).data = {std::log(0.9), std::log(0.1)};
  const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(token_kl(uniform, ref, unit_prompt(1)) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(token_kl(uniform, ref, unit_prompt(1)) == doctest::Approx(0.510826).epsilon(1e-6));

  CHECK_THROWS_AS(token_kl(params, make_uniform_params({4, 2, 2}), q), std::invalid_argument);
}

TEST_CASE("token_kl is the position mean of categorical KL and non-negative") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto p = make_random_params({3, 2, 2}, seed, 1.5);
    const auto r = make_random_params({3, 2, 2}, seed + 5000, 1.5);
    const auto q = oracle::random_prompt(2, seed);
    const double kl = token_kl(p, r, q);
    REQUIRE(kl >= 0.0);
    if (seed % 100 == 0) {
      const auto tp = oracle::softmax_table(p, q);
      const auto tr = oracle::softmax_table(r, q);
      double manual = 0.0;
      for (std::size_t pos = 0; pos < 2; ++pos)
        for (std::size_t v = 0; v < 3; ++v) manual += tp[pos][v] * std::log(tp[pos][v] / tr[pos][v]);
      CHECK(kl == doctest::Approx(manual / 2.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("grad_log_prob matches central differences") {
  Rng pick(31);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const PolicyShape shape{4, 3, 3};
    const auto params = make_random_params(shape, seed, 0.8);
    const auto q = oracle::random_prompt(3, seed + 40);
    const auto seq = sample_rollouts(params, q, 1, seed).sequences[0];
    const auto analytic = grad_log_prob(params, q, seq).flatten();
    const auto numeric = oracle::finite_difference(
        params, [&](const PolicyParams& p) { return sequence_log_prob(p, q, seq); });
    REQUIRE(analytic.size() == numeric.size());
    for (int i = 0; i < 32; ++i) {
      const auto c = pick.below(analytic.size());
      CHECK(oracle::relative_error(analytic[c], numeric[c]) < 1e-5);
    }
  }
}

TEST_CASE("grad_log_prob equals (onehot - softmax) outer features on a 2x2 instance") {
  PolicyParams params = make_uniform_params({2, 1, 2});
  params.tensors.at(kWeightLayer).data = {0.3, -0.2, 0.5, 0.1};
  params.tensors.at(kBiasLayer).data = {0.05, -0.15};
  PromptContext q;
  q.features = {0.7, -1.2};
  const double z0 = 0.3 * 0.7 - 0.2 * -1.2 + 0.05;
  const double z1 = 0.5 * 0.7 + 0.1 * -1.2 - 0.15;
  const double p1 = std::exp(z1) / (std::exp(z0) + std::exp(z1));
  const double p0 = 1.0 - p1;
  const auto g = grad_log_prob(params, q, Sequence{1});
  const auto& gw = g.at(kWeightLayer).data;
  CHECK(gw[0] == doctest::Approx(-p0 * 0.7).epsilon(1e-12));
  CHECK(gw[1] == doctest::Approx(-p0 * -1.2).epsilon(1e-12));
  CHECK(gw[2] == doctest::Approx((1.0 - p1) * 0.7).epsilon(1e-12));
  CHECK(gw[3] == doctest::Approx((1.0 - p1) * -1.2).epsilon(1e-12));
  CHECK(g.at(kBiasLayer).data[0] == doctest::Approx(-p0).epsilon(1e-12));
  CHECK(g.at(kBiasLayer).data[1] == doctest::Approx(1.0 - p1).epsilon(1e-12));
}

TEST_CASE("saturated policy has vanishing log-prob gradient") {
  const Sequence target{1, 2};
  const auto params = one_hot_policy(3, target);
  const auto g = grad_log_prob(params, unit_prompt(1), target);
  for (double x : g.flatten()) CHECK(std::abs(x) < 1e-6);
}

TEST_CASE("grad_token_kl matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = make_random_params({3, 2, 3}, seed, 1.0);
    const auto r = make_random_params({3, 2, 3}, seed + 9, 1.0);
    const auto q = oracle::random_prompt(3, seed);
    const auto analytic = grad_token_kl(p, r, q).flatten();
    const auto numeric = oracle::finite_difference(p, [&](const PolicyParams& x) { return token_kl(x, r, q); });
    for (std::size_t i = 0; i < analytic.size(); ++i) CHECK(oracle::relative_error(analytic[i], numeric[i]) < 1e-5);
  }
}

TEST_CASE("for_each_sequence enumerates V^L sequences in order") {
  std::vector<Sequence> seen;
  for_each_sequence({3, 2, 1}, 4096, [&](const Sequence& s) { seen.push_back(s); });
  CHECK(seen == oracle::all_sequences(3, 2));
  CHECK_THROWS_AS(for_each_sequence({16, 4, 1}, 4096, [](const Sequence&) {}), std::invalid_argument);
}
