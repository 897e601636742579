// Copyright 2026 The CopyForge Authors.
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

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copyforge/vocab.hpp"

namespace copyforge {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap. Zero when either side has no n-grams.
PRF rouge_n(const TokenList& hyp, const TokenList& ref, std::size_t n);
// Longest common subsequence over the whole token sequences.
PRF rouge_l(const TokenList& hyp, const TokenList& ref);
std::size_t lcs_length(const TokenList& a, const TokenList& b);

// Among hyp token occurrences whose type appears in src, the share whose type
// also appears in ref. Zero when there are none.
double copy_precision(const TokenList& src, const TokenList& ref, const TokenList& hyp);

// Percentage of summary n-gram occurrences that do not occur contiguously in
// src. Zero when the summary is shorter than n.
double novel_ngram_pct(const TokenList& src, const TokenList& summary, std::size_t n);

// Optimal string alignment distance: insertions, deletions, substitutions and
// adjacent transpositions, no substring edited twice.
template <typename T>
std::size_t osa_distance(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[n][m];
}

// 100 * (1 - distance / max(len_a, len_b, 1)).
template <typename T>
double dld_similarity(const std::vector<T>& a, const std::vector<T>& b) {
  const double denom = static_cast<double>(std::max<std::size_t>({a.size(), b.size(), 1}));
  return 100.0 * (1.0 - static_cast<double>(osa_distance(a, b)) / denom);
}

struct Bucket {
  std::size_t count = 0;
  std::size_t correct = 0;
  double share = 0.0;                // fraction of all tokens
  std::optional<double> precision;   // absent for an empty bucket
};

struct BucketReport {
  Bucket copy;  // p_copy > threshold
  Bucket gen;   // everything else
  std::size_t total = 0;
};

BucketReport bucket_precision_by_pcopy(std::span<const double> p_copy, std::span<const char> correct,
                                       double threshold = 0.5);

// Summary-level scores averaged over examples.
struct CorpusScores {
  std::size_t examples = 0;
  double rouge1_f = 0.0;
  double rouge2_f = 0.0;
  double rougeL_f = 0.0;
  double copy_precision = 0.0;
  double nn[4] = {0.0, 0.0, 0.0, 0.0};  // novel n-gram % of hyp against src, n = 1..4
  double avg_p_copy = 0.0;
};

struct ScoredTriple {
  TokenList src;
  TokenList ref;
  TokenList hyp;
  double avg_p_copy = 0.0;
  std::vector<double> p_copy_trace;  // empty when the file has none
};

// Macro averages. Novel n-gram averages skip hypotheses shorter than n.
CorpusScores score_corpus(std::span<const ScoredTriple> triples);

// Reads generation JSONL ({"src","tgt","hyp","avg_p_copy"} and an optional
// "p_copy_trace") and tokenizes.
std::vector<ScoredTriple> read_generations(const std::string& path);

}  // namespace copyforge
