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

// Slow reference implementations used as oracles by the tests.

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "copyforge/metrics.hpp"

namespace copyforge::oracle {

inline std::vector<TokenList> ngrams(const TokenList& t, std::size_t n) {
  std::vector<TokenList> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
  return out;
}

// Clipped overlap by pairing each hyp n-gram with an unused equal ref n-gram.
inline std::size_t rouge_overlap(const TokenList& hyp, const TokenList& ref, std::size_t n) {
  auto pool = ngrams(ref, n);
  std::vector<bool> used(pool.size(), false);
  std::size_t overlap = 0;
  for (const auto& g : ngrams(hyp, n)) {
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (!used[k] && pool[k] == g) {
        used[k] = true;
        ++overlap;
        break;
      }
    }
  }
  return overlap;
}

inline PRF prf(double overlap, double hyp_total, double ref_total) {
  PRF r;
  r.precision = hyp_total > 0 ? overlap / hyp_total : 0.0;
  r.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

inline PRF rouge_n(const TokenList& hyp, const TokenList& ref, std::size_t n) {
  return prf(static_cast<double>(rouge_overlap(hyp, ref, n)), static_cast<double>(ngrams(hyp, n).size()),
             static_cast<double>(ngrams(ref, n).size()));
}

inline bool is_subsequence(const TokenList& sub, const TokenList& seq) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < seq.size() && j < sub.size(); ++i)
    if (seq[i] == sub[j]) ++j;
  return j == sub.size();
}

// Tries every subsequence of the shorter sequence.
inline std::size_t lcs(const TokenList& a, const TokenList& b) {
  const TokenList& s = a.size() <= b.size() ? a : b;
  const TokenList& l = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << s.size()); ++mask) {
    TokenList sub;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (mask >> i & 1) sub.push_back(s[i]);
    if (sub.size() > best && is_subsequence(sub, l)) best = sub.size();
  }
  return best;
}

inline PRF rouge_l(const TokenList& hyp, const TokenList& ref) {
  return prf(static_cast<double>(lcs(hyp, ref)), static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
}

// Minimum over all ways of cutting both sequences, from the front, into
// aligned blocks: keep/substitute (1:1), delete (1:0), insert (0:1) and swap
// of an adjacent pair (2:2).
inline std::size_t osa(const TokenList& a, const TokenList& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    if (i + 1 < a.size() && j + 1 < b.size() && a[i] == b[j + 1] && a[i + 1] == b[j]) {
      best = std::min(best, go(i + 2, j + 2) + 1);
    }
    return memo[key] = best;
  };
  return go(0, 0);
}

inline double dld_similarity(const TokenList& a, const TokenList& b) {
  const double denom = static_cast<double>(std::max<std::size_t>({a.size(), b.size(), 1}));
  return 100.0 * (1.0 - static_cast<double>(osa(a, b)) / denom);
}

inline double novel_ngram_pct(const TokenList& src, const TokenList& summary, std::size_t n) {
  const auto gs = ngrams(summary, n);
  if (gs.empty()) return 0.0;
  const auto ss = ngrams(src, n);
  std::size_t novel = 0;
  for (const auto& g : gs)
    if (std::find(ss.begin(), ss.end(), g) == ss.end()) ++novel;
  return 100.0 * static_cast<double>(novel) / static_cast<double>(gs.size());
}

inline double copy_precision(const TokenList& src, const TokenList& ref, const TokenList& hyp) {
  std::size_t cand = 0, ok = 0;
  for (const auto& t : hyp) {
    if (std::find(src.begin(), src.end(), t) == src.end()) continue;
    ++cand;
    if (std::find(ref.begin(), ref.end(), t) != ref.end()) ++ok;
  }
  return cand == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(cand);
}

// Random token sequence over a small alphabet so that overlaps are common.
inline TokenList random_tokens(std::mt19937_64& rng, std::size_t max_len, std::size_t alphabet) {
  TokenList t(rng() % (max_len + 1));
  for (auto& s : t) s = std::string(1, static_cast<char>('a' + rng() % alphabet));
  return t;
}

}  // namespace copyforge::oracle
