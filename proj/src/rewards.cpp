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

#include "mtgrpo/rewards.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace mtgrpo {

namespace {

bool has_content(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return !std::isspace(c); });
}

using NgramCounts = std::map<std::vector<TokenId>, int>;

NgramCounts count_ngrams(std::span<const TokenId> tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<TokenId>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

FormatCheckResult check_format(std::string_view text) {
  static const std::regex pattern(R"(<think>(.+?)</think>\s*<answer>(.+?)</answer>)");
  FormatCheckResult out;
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, pattern)) return out;
  std::string think = m[1].str();
  std::string answer = m[2].str();
  if (!has_content(think) || !has_content(answer)) return out;
  out.compliant = true;
  out.think_text = std::move(think);
  out.answer_text = std::move(answer);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream in(lowered);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

std::pair<std::vector<TokenId>, std::vector<TokenId>> encode_pair(std::string_view candidate,
                                                                  std::string_view reference) {
  std::unordered_map<std::string, TokenId> vocab;
  auto encode = [&vocab](std::string_view text) {
    std::vector<TokenId> ids;
    for (auto& w : tokenize(text)) {
      auto [it, inserted] = vocab.try_emplace(std::move(w), static_cast<TokenId>(vocab.size()));
      ids.push_back(it->second);
    }
    return ids;
  };
  auto c = encode(candidate);
  auto r = encode(reference);
  return {std::move(c), std::move(r)};
}

double bleu4(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  if (reference.empty()) throw std::invalid_argument("bleu4: empty reference");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = count_ngrams(candidate, n);
    const auto ref = count_ngrams(reference, n);
    int total = 0;
    int matched = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(c, it->second);
    }
    double precision;
    if (matched > 0) {
      precision = static_cast<double>(matched) / total;
    } else if (n == 1) {
      return 0.0;
    } else {
      precision = 1.0 / (total + 1.0);
    }
    log_sum += std::log(precision);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double log_bp = c > r ? 0.0 : 1.0 - r / c;
  return std::clamp(std::exp(log_bp + 0.25 * log_sum), 0.0, 1.0);
}

double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

double meteor_exact(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  if (reference.empty()) throw std::invalid_argument("meteor_exact: empty reference");
  if (candidate.empty()) return 0.0;
  // Align each candidate token, left to right, to the earliest unused
  // reference occurrence of the same token.
  std::vector<bool> used(reference.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (candidate idx, reference idx)
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (!used[j] && reference[j] == candidate[i]) {
        used[j] = true;
        matches.emplace_back(i, j);
        break;
      }
    }
  }
  const double m = static_cast<double>(matches.size());
  if (m == 0.0) return 0.0;
  std::size_t chunks = 1;
  for (std::size_t k = 1; k < matches.size(); ++k) {
    const bool contiguous =
        matches[k].first == matches[k - 1].first + 1 && matches[k].second == matches[k - 1].second + 1;
    if (!contiguous) ++chunks;
  }
  const double precision = m / static_cast<double>(candidate.size());
  const double recall = m / static_cast<double>(reference.size());
  constexpr double alpha = 0.9, beta = 3.0, gamma = 0.5;
  const double fmean = precision * recall / (alpha * precision + (1.0 - alpha) * recall);
  const double penalty = gamma * std::pow(static_cast<double>(chunks) / m, beta);
  return std::clamp(fmean * (1.0 - penalty), 0.0, 1.0);
}

double text_similarity(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  return (bleu4(candidate, reference) + rouge_l(candidate, reference) + meteor_exact(candidate, reference)) / 3.0;
}

double text_similarity(std::string_view candidate, std::string_view reference) {
  const auto [c, r] = encode_pair(candidate, reference);
  return text_similarity(c, r);
}

FusedReward fuse_reward(double task_metric, bool compliant, double w_task, double w_fmt) {
  if (!std::isfinite(task_metric)) throw std::invalid_argument("fuse_reward: non-finite task metric");
  FusedReward r;
  r.task_metric = task_metric;
  r.format_flag = compliant ? 1 : 0;
  r.w_task = w_task;
  r.w_fmt = w_fmt;
  const double effective = compliant ? task_metric : kWrongFormatTaskReward;
  r.fused = w_task * effective + w_fmt * static_cast<double>(r.format_flag);
  return r;
}

}  // namespace mtgrpo
