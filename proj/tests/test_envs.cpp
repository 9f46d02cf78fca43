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
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "mtgrpo/envs.hpp"
#include "mtgrpo/rewards.hpp"
#include "mtgrpo/rng.hpp"
#include "oracles.hpp"

using namespace mtgrpo;

namespace {

SuiteConfig two_task_config(double a, RewardShape shape = RewardShape::kPassRatio) {
  SuiteConfig c;
  c.policy = {6, 5, 8};
  c.tasks = {{"a", shape, 10, 0.5, std::nullopt}, {"b", shape, 10, 0.5, std::nullopt}};
  c.alignment = {{1.0, a}, {a, 1.0}};
  c.seed = 12;
  return c;
}

// Binary task over V=2, L=2 built by hand: content target is token 1.
Suite tiny_binary_suite() {
  Suite s;
  s.policy = {2, 2, 1};
  TaskSpec t;
  t.task_id = "bin";
  t.reward_shape = RewardShape::kBinaryExec;
  PromptContext q;
  q.prompt_id = 0;
  q.task_id = "bin";
  q.features = {1.0};
  t.prompt_pool.push_back(q);
  PromptTarget target;
  target.sequence = {1};
  target.token_set = {1};
  t.targets.push_back(target);
  s.tasks.push_back(t);
  return s;
}

}  // namespace

TEST_CASE("shape metrics hand values") {
  const std::vector<TokenId> target{1, 2, 3, 4, 5};
  CHECK(binary_exec_reward(target, target) == 1.0);
  CHECK(binary_exec_reward(std::vector<TokenId>{1, 2, 3, 4, 6}, target) == 0.0);

  CHECK(pass_ratio_reward(target, target) == 1.0);
  CHECK(pass_ratio_reward(std::vector<TokenId>{0, 0, 0, 0, 0}, target) == 0.0);
  CHECK(pass_ratio_reward(std::vector<TokenId>{1, 2, 3, 0, 0}, target) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK_THROWS_AS(pass_ratio_reward(std::vector<TokenId>{1}, target), std::invalid_argument);

  const std::vector<TokenId> set{2, 4, 6, 8};
  CHECK(coverage_reward(std::vector<TokenId>{8, 6, 4, 2, 2}, set) == 1.0);
  CHECK(coverage_reward(std::vector<TokenId>{1, 3, 5}, set) == 0.0);
  CHECK(coverage_reward(std::vector<TokenId>{2, 2, 4, 5}, set) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(similarity_reward(target, target) == text_similarity(target, target));
  CHECK(similarity_reward(target, target) > 0.99);
  CHECK(similarity_reward(std::vector<TokenId>{7, 8, 9, 10, 11}, target) < 0.05);
}

TEST_CASE("binary reward fires on exactly one sequence of a V=2, L=2 space") {
  const std::vector<TokenId> target{1, 0};
  int hits = 0;
  for (const auto& s : oracle::all_sequences(2, 2)) hits += binary_exec_reward(s, target) == 1.0 ? 1 : 0;
  CHECK(hits == 1);
}

TEST_CASE("pass ratio and coverage are monotone") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TokenId> target(6), seq(6);
    for (auto& t : target) t = static_cast<TokenId>(rng.below(5));
    for (auto& t : seq) t = static_cast<TokenId>(rng.below(5));
    const std::size_t p = rng.below(6);
    auto fixed = seq;
    fixed[p] = target[p];
    CHECK(pass_ratio_reward(fixed, target) >= pass_ratio_reward(seq, target));

    const std::vector<TokenId> set{1, 3};
    if (seq[p] != 1 && seq[p] != 3) {
      auto covered = seq;
      covered[p] = rng.below(2) == 0 ? 1 : 3;
      CHECK(coverage_reward(covered, set) >= coverage_reward(seq, set));
    }
  }
}

TEST_CASE("similarity reward equals the text metric on token ids") {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    std::vector<TokenId> a(5), b(5);
    for (auto& t : a) t = static_cast<TokenId>(rng.below(4));
    for (auto& t : b) t = static_cast<TokenId>(rng.below(4));
    CHECK(similarity_reward(a, b) ==
          doctest::Approx((bleu4(a, b) + rouge_l(a, b) + meteor_exact(a, b)) / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("make_suite is deterministic and well formed") {
  const auto c = two_task_config(0.0);
  const auto s1 = make_suite(c);
  const auto s2 = make_suite(c);
  REQUIRE(s1.tasks.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& t = s1.tasks[k];
    CHECK(t.prompt_pool.size() == 10);
    CHECK(t.targets.size() == 10);
    CHECK(t.beta_base == default_beta_base(RewardShape::kPassRatio));
    for (std::size_t i = 0; i < t.targets.size(); ++i) {
      CHECK(t.targets[i].sequence == s2.tasks[k].targets[i].sequence);
      CHECK(t.prompt_pool[i].features == s2.tasks[k].prompt_pool[i].features);
      CHECK(t.prompt_pool[i].features.size() == 8);
      CHECK(t.prompt_pool[i].features[0] == 1.0);
      CHECK(t.prompt_pool[i].features[1 + k] == 1.0);
      CHECK(t.targets[i].sequence.size() == 4);
      CHECK(t.targets[i].token_set.size() == c.coverage_set_size);
      for (auto tok : t.targets[i].sequence) {
        CHECK(tok >= 1);
        CHECK(tok < 6);
      }
    }
  }
  auto other = c;
  other.seed = 13;
  CHECK(make_suite(other).tasks[0].targets[0].sequence != s1.tasks[0].targets[0].sequence);
}

TEST_CASE("alignment +1 gives identical targets, -1 gives disjoint argmax") {
  const auto same = make_suite(two_task_config(1.0));
  for (std::size_t i = 0; i < 10; ++i) CHECK(same.tasks[0].targets[i].sequence == same.tasks[1].targets[i].sequence);

  const auto opposite = make_suite(two_task_config(-1.0));
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& a = opposite.tasks[0].targets[i].sequence;
    const auto& b = opposite.tasks[1].targets[i].sequence;
    for (std::size_t p = 0; p < a.size(); ++p) CHECK(a[p] != b[p]);
  }

  const auto independent = make_suite(two_task_config(0.0));
  int equal = 0;
  for (std::size_t i = 0; i < 10; ++i) equal += independent.tasks[0].targets[i].sequence == independent.tasks[1].targets[i].sequence;
  CHECK(equal < 10);
}

TEST_CASE("difficulty controls target spread across prompts") {
  auto c = two_task_config(0.0);
  c.tasks[0].difficulty = 0.0;
  const auto s = make_suite(c);
  std::set<Sequence> easy;
  for (const auto& t : s.tasks[0].targets) easy.insert(t.sequence);
  CHECK(easy.size() == 1);
  std::set<Sequence> hard;
  for (const auto& t : s.tasks[1].targets) hard.insert(t.sequence);
  CHECK(hard.size() > 1);
}

TEST_CASE("invalid suites are rejected") {
  auto c = two_task_config(0.5);
  c.alignment = {{1.0, 0.5}, {0.4, 1.0}};
  CHECK_THROWS_AS(make_suite(c), std::invalid_argument);
  c.alignment = {{0.9, 0.5}, {0.5, 1.0}};
  CHECK_THROWS_AS(make_suite(c), std::invalid_argument);
  c.alignment = {{1.0, 1.5}, {1.5, 1.0}};
  CHECK_THROWS_AS(make_suite(c), std::invalid_argument);

  SuiteConfig three;
  three.policy = {6, 5, 8};
  three.tasks = {{"a", RewardShape::kPassRatio, 4, 0.5, std::nullopt},
                 {"b", RewardShape::kPassRatio, 4, 0.5, std::nullopt},
                 {"c", RewardShape::kPassRatio, 4, 0.5, std::nullopt}};
  three.alignment = {{1, 0.9, 0.9}, {0.9, 1, -0.9}, {0.9, -0.9, 1}};  // not PSD
  CHECK_THROWS_AS(make_suite(three), std::invalid_argument);

  auto dup = two_task_config(0.0);
  dup.tasks[1].task_id = "a";
  CHECK_THROWS_AS(make_suite(dup), std::invalid_argument);
  auto empty = two_task_config(0.0);
  empty.tasks[0].pool_size = 0;
  CHECK_THROWS_AS(make_suite(empty), std::invalid_argument);
}

TEST_CASE("beta bases follow the reward shape unless overridden") {
  CHECK(default_beta_base(RewardShape::kPassRatio) == 1e-2);
  CHECK(default_beta_base(RewardShape::kCoverage) == 1e-2);
  CHECK(default_beta_base(RewardShape::kBinaryExec) == 1e-4);
  CHECK(default_beta_base(RewardShape::kSimilarity) == 1e-4);
  auto c = two_task_config(0.0);
  c.tasks[1].beta_base = 3e-3;
  CHECK(make_suite(c).tasks[1].beta_base == 3e-3);
  for (auto shape : {RewardShape::kBinaryExec, RewardShape::kPassRatio, RewardShape::kCoverage, RewardShape::kSimilarity})
    CHECK(parse_reward_shape(to_string(shape)) == shape);
  CHECK_THROWS_AS(parse_reward_shape("bogus"), std::invalid_argument);
}

TEST_CASE("score_rollouts fuses metric and format flag") {
  const auto suite = make_suite(two_task_config(0.0));
  const auto& task = suite.tasks[0];
  const auto& target = task.targets[3].sequence;
  RolloutGroup g;
  g.prompt_id = 3;
  Sequence perfect{suite.format_token};
  perfect.insert(perfect.end(), target.begin(), target.end());
  Sequence unformatted = perfect;
  unformatted[0] = 1;
  Sequence half = perfect;
  half[1] = target[0] == 1 ? 2 : 1;
  half[2] = target[1] == 1 ? 2 : 1;
  g.sequences = {perfect, unformatted, half, perfect};
  score_rollouts(suite, task, g);
  CHECK(g.rewards[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.rewards[1] == doctest::Approx(-0.05).epsilon(1e-12));
  CHECK(g.rewards[2] == doctest::Approx(0.5 * 0.5 + 0.5).epsilon(1e-12));
  CHECK(g.rewards[3] == g.rewards[0]);

  // Element-wise oracle: explicit per-rollout flags reproduce the same rewards.
  RolloutGroup h = g;
  score_rollouts(task, h, {true, false, true, true});
  CHECK(h.rewards == g.rewards);
  score_rollouts(task, h, {false, false, false, false});
  for (double r : h.rewards) CHECK(r == doctest::Approx(-0.05).epsilon(1e-12));

  RolloutGroup missing;
  missing.prompt_id = 99;
  missing.sequences = {perfect};
  CHECK_THROWS_AS(score_rollouts(suite, task, missing), std::invalid_argument);
}

TEST_CASE("exact expected reward by enumeration") {
  const auto s = tiny_binary_suite();
  const auto uniform = make_uniform_params({2, 2, 1});
  // (0,0): 0.5, (0,1): 1.0, (1,*): -0.05 each.
  CHECK(exact_expected_reward(uniform, s, s.tasks[0], 0) == doctest::Approx((0.5 + 1.0 - 0.1) / 4.0).epsilon(1e-12));

  auto peaked = make_uniform_params({2, 2, 1});
  peaked.tensors.at(kWeightLayer).data = {1e6, -1e6, -1e6, 1e6};
  CHECK(exact_expected_reward(peaked, s, s.tasks[0], 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sampled mean reward agrees with enumeration") {
  auto c = two_task_config(0.3, RewardShape::kCoverage);
  c.policy = {4, 4, 6};
  c.coverage_set_size = 2;
  const auto suite = make_suite(c);
  const auto params = make_random_params(c.policy, 5, 0.7);
  const auto& task = suite.tasks[1];
  const double exact = exact_expected_reward(params, suite, task, 2);
  auto g = sample_rollouts(params, task.prompt_pool[2], 20000, 3);
  score_rollouts(suite, task, g);
  double m = 0.0;
  for (double r : g.rewards) m += r;
  m /= g.rewards.size();
  const double se = std::sqrt(oracle::two_pass_variance(g.rewards) / g.rewards.size());
  CHECK(std::abs(m - exact) < 3.0 * se);
}
