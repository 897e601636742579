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

#include "copyforge/metrics.hpp"

#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "copyforge/errors.hpp"

namespace copyforge {

namespace {

std::map<TokenList, std::size_t> ngram_counts(const TokenList& toks, std::size_t n) {
  std::map<TokenList, std::size_t> counts;
  if (n == 0 || toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[TokenList(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

PRF make_prf(double overlap, double hyp_total, double ref_total) {
  PRF r;
  r.precision = hyp_total > 0 ? overlap / hyp_total : 0.0;
  r.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

}  // namespace

PRF rouge_n(const TokenList& hyp, const TokenList& ref, std::size_t n) {
  if (n == 0) throw ContractError("rouge_n: n must be >= 1");
  auto h = ngram_counts(hyp, n);
  auto r = ngram_counts(ref, n);
  double overlap = 0.0;
  for (const auto& [g, c] : h) {
    auto it = r.find(g);
    if (it != r.end()) overlap += static_cast<double>(std::min(c, it->second));
  }
  const double hn = hyp.size() >= n ? static_cast<double>(hyp.size() - n + 1) : 0.0;
  const double rn = ref.size() >= n ? static_cast<double>(ref.size() - n + 1) : 0.0;
  return make_prf(overlap, hn, rn);
}

std::size_t lcs_length(const TokenList& a, const TokenList& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PRF rouge_l(const TokenList& hyp, const TokenList& ref) {
  return make_prf(static_cast<double>(lcs_length(hyp, ref)), static_cast<double>(hyp.size()),
                  static_cast<double>(ref.size()));
}

double copy_precision(const TokenList& src, const TokenList& ref, const TokenList& hyp) {
  const std::set<std::string> in_src(src.begin(), src.end());
  const std::set<std::string> in_ref(ref.begin(), ref.end());
  std::size_t candidates = 0, correct = 0;
  for (const auto& tok : hyp) {
    if (!in_src.count(tok)) continue;
    ++candidates;
    if (in_ref.count(tok)) ++correct;
  }
  return candidates == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(candidates);
}

double novel_ngram_pct(const TokenList& src, const TokenList& summary, std::size_t n) {
  if (n == 0) throw ContractError("novel_ngram_pct: n must be >= 1");
  if (summary.size() < n) return 0.0;
  const auto in_src = ngram_counts(src, n);
  std::size_t total = 0, novel = 0;
  for (std::size_t i = 0; i + n <= summary.size(); ++i) {
    ++total;
    if (!in_src.count(TokenList(summary.begin() + i, summary.begin() + i + n))) ++novel;
  }
  return 100.0 * static_cast<double>(novel) / static_cast<double>(total);
}

BucketReport bucket_precision_by_pcopy(std::span<const double> p_copy, std::span<const char> correct,
                                       double threshold) {
  if (p_copy.size() != correct.size()) throw ContractError("bucket_precision_by_pcopy: length mismatch");
  BucketReport r;
  r.total = p_copy.size();
  for (std::size_t i = 0; i < p_copy.size(); ++i) {
    Bucket& b = p_copy[i] > threshold ? r.copy : r.gen;
    ++b.count;
    if (correct[i]) ++b.correct;
  }
  for (Bucket* b : {&r.copy, &r.gen}) {
    if (b->count > 0) b->precision = static_cast<double>(b->correct) / static_cast<double>(b->count);
    b->share = r.total > 0 ? static_cast<double>(b->count) / static_cast<double>(r.total) : 0.0;
  }
  return r;
}

CorpusScores score_corpus(std::span<const ScoredTriple> triples) {
  CorpusScores s;
  s.examples = triples.size();
  std::size_t nn_count[4] = {0, 0, 0, 0};
  for (const auto& t : triples) {
    s.rouge1_f += rouge_n(t.hyp, t.ref, 1).f1;
    s.rouge2_f += rouge_n(t.hyp, t.ref, 2).f1;
    s.rougeL_f += rouge_l(t.hyp, t.ref).f1;
    s.copy_precision += copy_precision(t.src, t.ref, t.hyp);
    s.avg_p_copy += t.avg_p_copy;
    for (std::size_t n = 1; n <= 4; ++n) {
      if (t.hyp.size() < n) continue;
      s.nn[n - 1] += novel_ngram_pct(t.src, t.hyp, n);
      ++nn_count[n - 1];
    }
  }
  if (s.examples > 0) {
    const double inv = 1.0 / static_cast<double>(s.examples);
    s.rouge1_f *= inv;
    s.rouge2_f *= inv;
    s.rougeL_f *= inv;
    s.copy_precision *= inv;
    s.avg_p_copy *= inv;
  }
  for (std::size_t n = 0; n < 4; ++n) {
    if (nn_count[n] > 0) s.nn[n] /= static_cast<double>(nn_count[n]);
  }
  return s;
}

std::vector<ScoredTriple> read_generations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<ScoredTriple> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ScoredTriple t;
      t.src = tokenize(j.at("src").get<std::string>());
      t.ref = tokenize(j.at("tgt").get<std::string>());
      t.hyp = tokenize(j.at("hyp").get<std::string>());
      t.avg_p_copy = j.value("avg_p_copy", 0.0);
      if (j.contains("p_copy_trace")) t.p_copy_trace = j["p_copy_trace"].get<std::vector<double>>();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what(), no);
    }
  }
  return out;
}

}  // namespace copyforge
