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

#include "mtgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "mtgrpo/error.hpp"
#include "mtgrpo/rng.hpp"

namespace mtgrpo {

namespace {

void check_prompt(const PolicyParams& params, const PromptContext& prompt) {
  if (prompt.features.size() != params.shape.feature_dim) {
    throw std::invalid_argument("prompt " + std::to_string(prompt.prompt_id) + ": feature length " +
                                std::to_string(prompt.features.size()) + " != F=" +
                                std::to_string(params.shape.feature_dim));
  }
}

void check_sequence(const PolicyShape& shape, std::span<const std::int32_t> sequence) {
  if (sequence.size() != shape.seq_len) {
    throw std::invalid_argument("sequence length " + std::to_string(sequence.size()) + " != L=" +
                                std::to_string(shape.seq_len));
  }
  for (auto t : sequence) {
    if (t < 0 || static_cast<std::size_t>(t) >= shape.vocab_size) {
      throw std::invalid_argument("token " + std::to_string(t) + " outside vocabulary");
    }
  }
}

// In-place log-softmax over each row of a row-major (rows, cols) table.
void log_softmax_rows(std::vector<double>& table, std::size_t cols) {
  for (std::size_t r = 0; r * cols < table.size(); ++r) {
    double* row = table.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double sum = 0.0;
    for (std::size_t v = 0; v < cols; ++v) sum += std::exp(row[v] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t v = 0; v < cols; ++v) row[v] -= lse;
  }
}

double sum_log_probs(const std::vector<double>& logp, std::size_t vocab, std::span<const std::int32_t> sequence) {
  double lp = 0.0;
  for (std::size_t p = 0; p < sequence.size(); ++p) lp += logp[p * vocab + static_cast<std::size_t>(sequence[p])];
  return lp;
}

}  // namespace

void PolicyParams::validate() const {
  const auto& layers = tensors.layers;
  if (layers.size() < 2) throw std::invalid_argument("policy needs at least two layers");
  std::set<std::string> names;
  bool has_matrix = false;
  for (const auto& l : layers) {
    if (l.rank() == 0) throw std::invalid_argument("layer '" + l.name + "' has rank 0");
    if (!names.insert(l.name).second) throw std::invalid_argument("duplicate layer name '" + l.name + "'");
    has_matrix = has_matrix || l.rank() >= 2;
  }
  if (!has_matrix) throw std::invalid_argument("policy needs a layer of rank >= 2");
  if (!tensors.all_finite()) throw std::invalid_argument("policy parameters contain non-finite entries");
  if (shape.vocab_size == 0 || shape.seq_len == 0 || shape.feature_dim == 0) {
    throw std::invalid_argument("policy dimensions must be positive");
  }
  const auto& w = tensors.at(kWeightLayer);
  const auto& b = tensors.at(kBiasLayer);
  if (w.shape != std::vector<std::size_t>{shape.seq_len, shape.vocab_size, shape.feature_dim}) {
    throw std::invalid_argument("weight layer must have shape (L, V, F)");
  }
  if (b.shape != std::vector<std::size_t>{shape.vocab_size}) {
    throw std::invalid_argument("bias layer must have shape (V)");
  }
}

PolicyParams make_uniform_params(PolicyShape shape) {
  PolicyParams p;
  p.shape = shape;
  p.tensors.layers.emplace_back(kWeightLayer,
                                std::vector<std::size_t>{shape.seq_len, shape.vocab_size, shape.feature_dim});
  p.tensors.layers.emplace_back(kBiasLayer, std::vector<std::size_t>{shape.vocab_size});
  p.validate();
  return p;
}

PolicyParams make_random_params(PolicyShape shape, std::uint64_t seed, double scale) {
  PolicyParams p = make_uniform_params(shape);
  Rng rng(seed);
  for (auto& l : p.tensors.layers)
    for (double& x : l.data) x = scale * (2.0 * rng.uniform() - 1.0);
  return p;
}

std::vector<double> compute_logits(const PolicyParams& params, const PromptContext& prompt) {
  check_prompt(params, prompt);
  const auto [V, L, F] = params.shape;
  const auto& w = params.tensors.at(kWeightLayer).data;
  const auto& b = params.tensors.at(kBiasLayer).data;
  const auto& phi = prompt.features;
  std::vector<double> z(L * V);
  for (std::size_t p = 0; p < L; ++p) {
    for (std::size_t v = 0; v < V; ++v) {
      const double* row = w.data() + (p * V + v) * F;
      double acc = b[v];
      for (std::size_t f = 0; f < F; ++f) acc += row[f] * phi[f];
      if (!std::isfinite(acc)) {
        throw NumericError("non-finite logit at position " + std::to_string(p) + " for prompt " +
                           std::to_string(prompt.prompt_id));
      }
      z[p * V + v] = acc;
    }
  }
  return z;
}

std::vector<double> position_log_probs(const PolicyParams& params, const PromptContext& prompt) {
  auto table = compute_logits(params, prompt);
  log_softmax_rows(table, params.shape.vocab_size);
  return table;
}

RolloutGroup sample_rollouts(const PolicyParams& params, const PromptContext& prompt, std::size_t group_size,
                             std::uint64_t seed) {
  if (group_size == 0) throw std::invalid_argument("sample_rollouts: group size must be >= 1");
  const auto [V, L, F] = params.shape;
  const auto logp = position_log_probs(params, prompt);
  std::vector<double> cdf(L * V);
  for (std::size_t p = 0; p < L; ++p) {
    double acc = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      acc += std::exp(logp[p * V + v]);
      cdf[p * V + v] = acc;
    }
  }

  Rng rng(seed);
  RolloutGroup group;
  group.prompt_id = prompt.prompt_id;
  group.sequences.reserve(group_size);
  group.logprobs_behavior.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    Sequence seq(L);
    for (std::size_t p = 0; p < L; ++p) {
      const double* row = cdf.data() + p * V;
      const double u = rng.uniform() * row[V - 1];
      std::size_t tok = static_cast<std::size_t>(std::upper_bound(row, row + V, u) - row);
      // Rounding can leave u at the top of the range; step back to the last
      // token with non-zero mass.
      if (tok >= V) tok = V - 1;
      while (tok > 0 && std::exp(logp[p * V + tok]) == 0.0) --tok;
      seq[p] = static_cast<std::int32_t>(tok);
    }
    group.logprobs_behavior.push_back(sum_log_probs(logp, V, seq));
    group.sequences.push_back(std::move(seq));
  }
  group.rewards.assign(group_size, 0.0);
  return group;
}

double sequence_log_prob(const PolicyParams& params, const PromptContext& prompt,
                         std::span<const std::int32_t> sequence) {
  check_sequence(params.shape, sequence);
  const auto logp = position_log_probs(params, prompt);
  return sum_log_probs(logp, params.shape.vocab_size, sequence);
}

double token_kl(const PolicyParams& params, const PolicyParams& reference, const PromptContext& prompt) {
  if (!(params.shape == reference.shape)) throw std::invalid_argument("token_kl: policy shapes differ");
  const auto [V, L, F] = params.shape;
  const auto lp = position_log_probs(params, prompt);
  const auto lq = position_log_probs(reference, prompt);
  double total = 0.0;
  for (std::size_t p = 0; p < L; ++p) {
    double kl = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      const double a = lp[p * V + v];
      const double pa = std::exp(a);
      if (pa > 0.0) kl += pa * (a - lq[p * V + v]);
    }
    total += std::max(0.0, kl);
  }
  return total / static_cast<double>(L);
}

void backprop_logits(const PolicyParams& params, const PromptContext& prompt, std::span<const double> dlogits,
                     TensorSet& grad) {
  const auto [V, L, F] = params.shape;
  auto& gw = grad.at(kWeightLayer).data;
  auto& gb = grad.at(kBiasLayer).data;
  const auto& phi = prompt.features;
  for (std::size_t p = 0; p < L; ++p) {
    for (std::size_t v = 0; v < V; ++v) {
      const double d = dlogits[p * V + v];
      if (d == 0.0) continue;
      gb[v] += d;
      double* row = gw.data() + (p * V + v) * F;
      for (std::size_t f = 0; f < F; ++f) row[f] += d * phi[f];
    }
  }
}

TensorSet grad_log_prob(const PolicyParams& params, const PromptContext& prompt,
                        std::span<const std::int32_t> sequence) {
  check_sequence(params.shape, sequence);
  const auto [V, L, F] = params.shape;
  auto d = position_log_probs(params, prompt);
  // d log pi(o_p) / d z[p, v] = 1[v == o_p] - pi(v)
  for (std::size_t p = 0; p < L; ++p) {
    for (std::size_t v = 0; v < V; ++v) d[p * V + v] = -std::exp(d[p * V + v]);
    d[p * V + static_cast<std::size_t>(sequence[p])] += 1.0;
  }
  TensorSet grad = params.tensors.zeros_like();
  backprop_logits(params, prompt, d, grad);
  return grad;
}

TensorSet grad_token_kl(const PolicyParams& params, const PolicyParams& reference, const PromptContext& prompt) {
  if (!(params.shape == reference.shape)) throw std::invalid_argument("grad_token_kl: policy shapes differ");
  const auto [V, L, F] = params.shape;
  const auto lp = position_log_probs(params, prompt);
  const auto lq = position_log_probs(reference, prompt);
  std::vector<double> d(L * V);
  // d KL_p / d z[p, u] = pi(u) * ((log pi(u) - log ref(u)) - KL_p)
  for (std::size_t p = 0; p < L; ++p) {
    double kl = 0.0;
    for (std::size_t v = 0; v < V; ++v) kl += std::exp(lp[p * V + v]) * (lp[p * V + v] - lq[p * V + v]);
    for (std::size_t v = 0; v < V; ++v) {
      const double pi = std::exp(lp[p * V + v]);
      d[p * V + v] = pi * ((lp[p * V + v] - lq[p * V + v]) - kl) / static_cast<double>(L);
    }
  }
  TensorSet grad = params.tensors.zeros_like();
  backprop_logits(params, prompt, d, grad);
  return grad;
}

Sequence greedy_sequence(const PolicyParams& params, const PromptContext& prompt) {
  const auto [V, L, F] = params.shape;
  const auto z = compute_logits(params, prompt);
  Sequence seq(L);
  for (std::size_t p = 0; p < L; ++p) {
    const double* row = z.data() + p * V;
    seq[p] = static_cast<std::int32_t>(std::max_element(row, row + V) - row);
  }
  return seq;
}

void for_each_sequence(const PolicyShape& shape, std::size_t limit, const std::function<void(const Sequence&)>& fn) {
  const std::size_t V = shape.vocab_size;
  const std::size_t L = shape.seq_len;
  std::size_t count = 1;
  for (std::size_t p = 0; p < L; ++p) {
    if (count > limit / std::max<std::size_t>(V, 1)) throw std::invalid_argument("V^L exceeds enumeration limit");
    count *= V;
  }
  if (count > limit) throw std::invalid_argument("V^L exceeds enumeration limit");
  Sequence seq(L, 0);
  for (std::size_t n = 0; n < count; ++n) {
    fn(seq);
    for (std::size_t p = L; p-- > 0;) {
      if (static_cast<std::size_t>(++seq[p]) < V) break;
      seq[p] = 0;
    }
  }
}

}  // namespace mtgrpo
