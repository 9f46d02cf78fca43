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

#include <array>
#include <cstdint>
#include <initializer_list>

namespace mtgrpo {

/// SplitMix64 finalizer. Used for seeding and for deriving independent
/// stream seeds from structured keys.
std::uint64_t splitmix64(std::uint64_t x);

/// Hashes a root seed together with an ordered list of 64-bit keys, e.g.
/// (step, task, prompt). Distinct key tuples give unrelated streams.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> keys);

/// xoshiro256** 1.0 (Blackman & Vigna). State is filled from the seed with
/// SplitMix64, so every 64-bit seed is valid. Output is identical on every
/// platform; `uniform()` uses the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace mtgrpo
