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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mtgrpo/tensor.hpp"

namespace mtgrpo {

/// Position-factorized log-linear sequence policy.
///
///   pi(token v at position p | prompt q) = softmax_v( W[p] . phi(q) + b )
///
/// W is stored as layer "logits.weight" with shape (L, V, F) and b as
/// "logits.bias" with shape (V). Positions are conditionally independent
/// given the prompt, which makes sequence probabilities, KL and gradients
/// exact and cheap.
struct PolicyShape {
  std::size_t vocab_size = 0;   // V
  std::size_t seq_len = 0;      // L
  std::size_t feature_dim = 0;  // F

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

inline constexpr const char* kWeightLayer = "logits.weight";
inline constexpr const char* kBiasLayer = "logits.bias";

struct PolicyParams {
  PolicyShape shape;
  TensorSet tensors;

  /// Throws std::invalid_argument unless the layer invariants hold: at
  /// least two uniquely named layers, one of rank >= 2, all entries finite,
  /// and the weight/bias layers shaped consistently with `shape`.
  void validate() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// Zero weights and bias: the uniform policy.
PolicyParams make_uniform_params(PolicyShape shape);

/// Weights and bias drawn i.i.d. uniform in [-scale, scale].
PolicyParams make_random_params(PolicyShape shape, std::uint64_t seed, double scale);

using Sequence = std::vector<std::int32_t>;

struct PromptContext {
  std::int64_t prompt_id = 0;
  std::string task_id;
  std::vector<double> features;  // length F
};

struct RolloutGroup {
  std::int64_t prompt_id = 0;
  std::vector<Sequence> sequences;
  std::vector<double> logprobs_behavior;
  std::vector<double> rewards;

  std::size_t size() const { return sequences.size(); }
};

/// Row-major (L, V) logits for one prompt. Throws NumericError on
/// non-finite output.
std::vector<double> compute_logits(const PolicyParams& params, const PromptContext& prompt);

/// Row-major (L, V) log-softmax of the logits.
std::vector<double> position_log_probs(const PolicyParams& params, const PromptContext& prompt);

RolloutGroup sample_rollouts(const PolicyParams& params, const PromptContext& prompt, std::size_t group_size,
                             std::uint64_t seed);

double sequence_log_prob(const PolicyParams& params, const PromptContext& prompt, std::span<const std::int32_t> sequence);

/// Mean over positions of KL(pi_params(.|q,p) || pi_reference(.|q,p)).
double token_kl(const PolicyParams& params, const PolicyParams& reference, const PromptContext& prompt);

/// Exact gradient of sequence_log_prob with respect to every layer.
TensorSet grad_log_prob(const PolicyParams& params, const PromptContext& prompt, std::span<const std::int32_t> sequence);

/// Exact gradient of token_kl with respect to `params` (reference fixed).
TensorSet grad_token_kl(const PolicyParams& params, const PolicyParams& reference, const PromptContext& prompt);

/// Accumulates sum_p sum_v dlogits[p, v] * d(logit[p, v]) / d(theta) into
/// `grad`. `dlogits` is row-major (L, V). Shared by every gradient routine.
void backprop_logits(const PolicyParams& params, const PromptContext& prompt, std::span<const double> dlogits,
                     TensorSet& grad);

/// Greedy (per-position argmax) sequence.
Sequence greedy_sequence(const PolicyParams& params, const PromptContext& prompt);

/// Calls `fn(sequence)` for every one of the V^L sequences in lexicographic
/// order. Throws std::invalid_argument if V^L exceeds `limit`.
void for_each_sequence(const PolicyShape& shape, std::size_t limit, const std::function<void(const Sequence&)>& fn);

}  // namespace mtgrpo
