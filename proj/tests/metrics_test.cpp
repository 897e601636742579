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

#include <algorithm>

#include <gtest/gtest.h>

#include "copyforge/errors.hpp"
#include "copyforge/metrics.hpp"
#include "oracles.hpp"

namespace copyforge {
namespace {

TokenList T(const std::string& s) { return tokenize(s); }

TEST(RougeTest, Examples) {
  PRF r = rouge_n(T("the cat sat"), T("the cat"), 1);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
  EXPECT_NEAR(r.f1, 0.8, 1e-15);
  for (std::size_t n = 1; n <= 3; ++n) EXPECT_DOUBLE_EQ(rouge_n(T("a b c"), T("a b c"), n).f1, 1.0);
  EXPECT_EQ(rouge_n(T("a b"), T("c d"), 1).f1, 0.0);
  EXPECT_EQ(rouge_n(T("a"), T("a"), 2).f1, 0.0);
  EXPECT_THROW(rouge_n(T("a"), T("a"), 0), ContractError);
}

TEST(RougeTest, ClippedCounts) {
  PRF r = rouge_n(T("the the the"), T("the cat"), 1);
  EXPECT_DOUBLE_EQ(r.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
}

TEST(RougeLTest, Examples) {
  PRF r = rouge_l(T("a c b"), T("a b c"));
  EXPECT_EQ(lcs_length(T("a c b"), T("a b c")), 2u);
  EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rouge_l(T("x y"), T("x y")).f1, 1.0);
  EXPECT_EQ(rouge_l({}, T("x y")).f1, 0.0);
}

TEST(CopyPrecisionTest, Examples) {
  EXPECT_DOUBLE_EQ(copy_precision(T("a b"), T("a"), T("a b")), 0.5);
  EXPECT_DOUBLE_EQ(copy_precision(T("a b c"), T("a b"), T("b a")), 1.0);
  EXPECT_EQ(copy_precision(T("a b"), T("a"), T("x y")), 0.0);
  // Occurrences count in hyp, membership in ref.
  EXPECT_DOUBLE_EQ(copy_precision(T("a b"), T("a"), T("a a b")), 2.0 / 3.0);
}

TEST(NovelNgramTest, Examples) {
  EXPECT_NEAR(novel_ngram_pct(T("a b c"), T("a b d"), 1), 100.0 / 3.0, 1e-12);
  EXPECT_EQ(novel_ngram_pct(T("a b c d"), T("b c d"), 2), 0.0);
  EXPECT_EQ(novel_ngram_pct(T("a b"), T("x y z"), 2), 100.0);
  EXPECT_EQ(novel_ngram_pct(T("a b"), T("x"), 2), 0.0);
}

TEST(DldTest, Examples) {
  const std::vector<std::string> abc{"A", "B", "C"}, bac{"B", "A", "C"};
  EXPECT_EQ(osa_distance(abc, bac), 1u);
  EXPECT_NEAR(dld_similarity(abc, bac), 200.0 / 3.0, 1e-12);
  EXPECT_EQ(dld_similarity(abc, abc), 100.0);
  EXPECT_EQ(dld_similarity(abc, std::vector<std::string>{}), 0.0);
  EXPECT_EQ(dld_similarity(std::vector<int>{}, std::vector<int>{}), 100.0);
  // The restricted variant: CA -> ABC costs 3, not 2.
  EXPECT_EQ(osa_distance(std::vector<char>{'C', 'A'}, std::vector<char>{'A', 'B', 'C'}), 3u);
}

TEST(BucketTest, Examples) {
  const double all_copy[] = {0.9, 0.9, 0.9};
  const char all_ok[] = {1, 1, 1};
  BucketReport r = bucket_precision_by_pcopy(all_copy, all_ok);
  EXPECT_EQ(*r.copy.precision, 1.0);
  EXPECT_EQ(r.copy.share, 1.0);
  EXPECT_FALSE(r.gen.precision.has_value());
  EXPECT_EQ(r.gen.share, 0.0);

  const double p[] = {0.9, 0.2, 0.5, 0.7};
  const char ok[] = {1, 0, 1, 0};
  r = bucket_precision_by_pcopy(p, ok);
  EXPECT_EQ(r.copy.count, 2u);
  EXPECT_DOUBLE_EQ(*r.copy.precision, 0.5);
  EXPECT_EQ(r.gen.count, 2u);  // 0.5 is not above the threshold
  EXPECT_DOUBLE_EQ(*r.gen.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.copy.share, 0.5);
  const char short_ok[] = {1};
  EXPECT_THROW(bucket_precision_by_pcopy(p, short_ok), ContractError);
}

class OracleTest : public ::testing::TestWithParam<int> {};

TEST_P(OracleTest, RandomInstancesMatchBruteForce) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()));
  for (int i = 0; i < 100; ++i) {
    const TokenList a = oracle::random_tokens(rng, 12, 4);
    const TokenList b = oracle::random_tokens(rng, 12, 4);
    const TokenList c = oracle::random_tokens(rng, 12, 4);
    for (std::size_t n = 1; n <= 4; ++n) {
      PRF got = rouge_n(a, b, n), want = oracle::rouge_n(a, b, n);
      EXPECT_EQ(got.precision, want.precision);
      EXPECT_EQ(got.recall, want.recall);
      EXPECT_EQ(got.f1, want.f1);
      EXPECT_EQ(novel_ngram_pct(a, b, n), oracle::novel_ngram_pct(a, b, n));
    }
    EXPECT_EQ(lcs_length(a, b), oracle::lcs(a, b));
    EXPECT_EQ(rouge_l(a, b).f1, oracle::rouge_l(a, b).f1);
    EXPECT_EQ(osa_distance(a, b), oracle::osa(a, b));
    EXPECT_EQ(dld_similarity(a, b), oracle::dld_similarity(a, b));
    EXPECT_EQ(copy_precision(a, b, c), oracle::copy_precision(a, b, c));
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OracleTest, ::testing::Range(0, 5));

TEST(MetricPropertyTest, SymmetriesAndMonotonicity) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    const TokenList a = oracle::random_tokens(rng, 10, 3);
    const TokenList b = oracle::random_tokens(rng, 10, 3);
    for (std::size_t n = 1; n <= 3; ++n) {
      EXPECT_EQ(rouge_n(a, b, n).f1, rouge_n(b, a, n).f1);
      EXPECT_EQ(rouge_n(a, b, n).precision, rouge_n(b, a, n).recall);
    }
    EXPECT_EQ(dld_similarity(a, b), dld_similarity(b, a));
    EXPECT_EQ(dld_similarity(a, b) == 100.0, a == b || (a.empty() && b.empty()));
    for (std::size_t n = 1; n <= 3 && a.size() >= n; ++n) {
      // Append a source n-gram; the claim applies when every n-gram created
      // by the append, junctions included, occurs in the source.
      const std::size_t at = rng() % (a.size() - n + 1);
      TokenList longer = b;
      longer.insert(longer.end(), a.begin() + static_cast<long>(at), a.begin() + static_cast<long>(at + n));
      const auto src_grams = oracle::ngrams(a, n);
      bool all_in_src = true;
      for (std::size_t k = b.size() >= n - 1 ? b.size() - (n - 1) : 0; k + n <= longer.size(); ++k) {
        const TokenList g(longer.begin() + static_cast<long>(k), longer.begin() + static_cast<long>(k + n));
        all_in_src = all_in_src && std::find(src_grams.begin(), src_grams.end(), g) != src_grams.end();
      }
      if (all_in_src && b.size() >= n) EXPECT_LE(novel_ngram_pct(a, longer, n), novel_ngram_pct(a, b, n) + 1e-12);
    }
    if (!a.empty()) {
      TokenList hyp = a;
      EXPECT_EQ(copy_precision(a, hyp, hyp), 1.0);
    }
  }
}

TEST(CorpusScoresTest, MacroAverages) {
  std::vector<ScoredTriple> ts{{T("a b c"), T("a b"), T("a b"), 0.2}, {T("x y"), T("z"), T("q"), 0.6}};
  CorpusScores s = score_corpus(ts);
  EXPECT_EQ(s.examples, 2u);
  EXPECT_DOUBLE_EQ(s.rouge1_f, 0.5);
  EXPECT_DOUBLE_EQ(s.avg_p_copy, 0.4);
  EXPECT_DOUBLE_EQ(s.nn[0], 50.0);
  // The second hyp has no bigram, so only the first counts.
  EXPECT_DOUBLE_EQ(s.nn[1], 0.0);
  EXPECT_DOUBLE_EQ(s.copy_precision, 0.5);
}

}  // namespace
}  // namespace copyforge
