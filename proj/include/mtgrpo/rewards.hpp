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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtgrpo {

using TokenId = std::int32_t;

// ---------------------------------------------------------------------------
// Format gate

struct FormatCheckResult {
  bool compliant = false;
  std::optional<std::string> think_text;
  std::optional<std::string> answer_text;
};

/// Searches for `<think>(.+?)</think>\s*<answer>(.+?)</answer>`. The text is
/// compliant when the pattern matches and both captures contain at least one
/// non-whitespace character.
FormatCheckResult check_format(std::string_view text);

// ---------------------------------------------------------------------------
// Text similarity over token ids. All metrics return values in [0, 1].

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Maps the words of both texts into a shared id space (first occurrence
/// order), so the id-based metrics below can score raw strings.
std::pair<std::vector<TokenId>, std::vector<TokenId>> encode_pair(std::string_view candidate,
                                                                  std::string_view reference);

/// Sentence BLEU-4, uniform weights, standard brevity penalty.
///
/// Smoothing: when a higher-order precision (n = 2..4) has no matching
/// n-gram, it is replaced by (0 + 1) / (count_n + 1). Unigram precision is
/// never smoothed, so a candidate sharing no token with the reference
/// scores exactly 0. Throws std::invalid_argument on an empty reference.
double bleu4(std::span<const TokenId> candidate, std::span<const TokenId> reference);

/// ROUGE-L F1 from the longest common subsequence. 0 if either side is empty.
double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference);

/// METEOR with exact unigram matching only:
///   P = m/|c|, R = m/|r|, Fmean = P*R / (0.9*P + 0.1*R)
///   penalty = 0.5 * (chunks/m)^3, score = Fmean * (1 - penalty).
/// Throws std::invalid_argument on an empty reference.
double meteor_exact(std::span<const TokenId> candidate, std::span<const TokenId> reference);

/// Mean of bleu4, rouge_l and meteor_exact.
double text_similarity(std::span<const TokenId> candidate, std::span<const TokenId> reference);

double text_similarity(std::string_view candidate, std::string_view reference);

// ---------------------------------------------------------------------------
// Reward fusion

inline constexpr double kWrongFormatTaskReward = -0.1;

struct FusedReward {
  double task_metric = 0.0;
  int format_flag = 0;
  double fused = 0.0;
  double w_task = 0.5;
  double w_fmt = 0.5;
};

/// fused = w_task * (compliant ? task_metric : -0.1) + w_fmt * format_flag.
FusedReward fuse_reward(double task_metric, bool compliant, double w_task = 0.5, double w_fmt = 0.5);

inline FusedReward fuse_reward(double task_metric, const FormatCheckResult& format, double w_task = 0.5,
                               double w_fmt = 0.5) {
  return fuse_reward(task_metric, format.compliant, w_task, w_fmt);
}

}  // namespace mtgrpo
