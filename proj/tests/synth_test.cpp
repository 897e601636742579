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

#include <map>
#include <set>

#include <gtest/gtest.h>

#include "copyforge/errors.hpp"
#include "copyforge/synth.hpp"

namespace copyforge {
namespace {

std::vector<TokenList> corpus_of(const std::vector<TextPair>& pairs) {
  std::vector<TokenList> out;
  for (const auto& p : pairs) {
    out.push_back(tokenize(p.src));
    out.push_back(tokenize(p.tgt));
  }
  return out;
}

TEST(IdentityTest, TargetEqualsSourceAndIsSeeded) {
  IdentityOptions o;
  auto a = generate_identity(o);
  ASSERT_EQ(a.size(), 200u);
  for (const auto& p : a) {
    EXPECT_EQ(p.src, p.tgt);
    const auto n = tokenize(p.src).size();
    EXPECT_GE(n, o.min_len);
    EXPECT_LE(n, o.max_len);
  }
  auto b = generate_identity(o);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].src, b[i].src);
  o.seed = 2;
  EXPECT_NE(generate_identity(o)[0].src, a[0].src);
}

TEST(IdentityTest, OneOffTokensAreOutOfVocabulary) {
  IdentityOptions o;
  auto pairs = generate_identity(o);
  Vocabulary v = build_vocab(corpus_of(pairs), 100000, 3);
  std::size_t oov = 0, total = 0;
  for (const auto& p : pairs) {
    for (const auto& t : tokenize(p.src)) {
      ++total;
      oov += v.contains(t) ? 0 : 1;
    }
  }
  const double frac = static_cast<double>(oov) / static_cast<double>(total);
  EXPECT_NEAR(frac, 0.3, 0.05);
  EXPECT_LE(v.size(), kNumSpecials + o.common_pool);
}

TEST(IdentityTest, Validation) {
  IdentityOptions o;
  o.oov_fraction = 1.5;
  EXPECT_THROW(generate_identity(o), ContractError);
  o = {};
  o.min_len = 8;
  o.max_len = 3;
  EXPECT_THROW(generate_identity(o), ContractError);
}

std::vector<TokenList> sentences(const TokenList& toks) {
  std::vector<TokenList> out(1);
  for (const auto& t : toks) {
    if (t == ".") {
      out.emplace_back();
    } else {
      out.back().push_back(t);
    }
  }
  out.pop_back();
  return out;
}

TEST(SummarizationTest, SummaryRestatesTheLeadSentences) {
  SummarizationOptions o;
  o.n_examples = 400;
  o.generic_prob = 0.3;
  auto pairs = generate_summarization(o);
  std::map<std::string, std::set<std::string>> verb_forms;
  std::size_t paraphrased = 0, generic = 0, summary_sentences = 0;
  std::set<std::string> src_vocab;
  for (const auto& p : pairs)
    for (const auto& t : tokenize(p.src)) src_vocab.insert(t);
  for (const auto& p : pairs) {
    const auto src = sentences(tokenize(p.src));
    const auto tgt = sentences(tokenize(p.tgt));
    ASSERT_GE(src.size(), o.min_sentences);
    ASSERT_LE(src.size(), o.max_sentences);
    ASSERT_EQ(tgt.size(), o.summary_sentences);
    for (std::size_t s = 0; s < tgt.size(); ++s) {
      ASSERT_EQ(tgt[s].size(), 4u);
      EXPECT_EQ(tgt[s][0], src[s][0]);
      EXPECT_EQ(tgt[s][2], "the");
      if (tgt[s][3] == kGenericNoun) {
        ++generic;
        EXPECT_FALSE(src_vocab.count(kGenericNoun));
      } else {
        EXPECT_EQ(tgt[s][3], src[s][3]);
      }
      ++summary_sentences;
      if (tgt[s][1] != src[s][1]) {
        ++paraphrased;
        EXPECT_FALSE(src_vocab.count(tgt[s][1])) << tgt[s][1];
        verb_forms[src[s][1]].insert(tgt[s][1]);
      }
    }
  }
  // One fixed paraphrase per verb.
  for (const auto& [verb, forms] : verb_forms) EXPECT_EQ(forms.size(), 1u) << verb;
  const double rate = static_cast<double>(paraphrased) / static_cast<double>(summary_sentences);
  EXPECT_NEAR(rate, o.paraphrase_prob, 0.05);
  EXPECT_NEAR(static_cast<double>(generic) / static_cast<double>(summary_sentences), o.generic_prob, 0.05);
}

TEST(SummarizationTest, SeededAndOovControlled) {
  SummarizationOptions o;
  o.n_examples = 300;
  auto a = generate_summarization(o);
  auto b = generate_summarization(o);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].src, b[i].src);
    EXPECT_EQ(a[i].tgt, b[i].tgt);
  }
  o.oov_fraction = 0.0;
  o.noun_pool = 40;
  o.name_pool = 40;
  auto clean = generate_summarization(o);
  Vocabulary v = build_vocab(corpus_of(clean), 100000, 3);
  for (const auto& p : clean)
    for (const auto& t : tokenize(p.tgt)) EXPECT_TRUE(v.contains(t)) << t;
  o.summary_sentences = o.min_sentences + 1;
  EXPECT_THROW(generate_summarization(o), ContractError);
}

TEST(SplitPairsTest, EightyTenTenPartition) {
  auto pairs = generate_identity(IdentityOptions{});
  PairSplit s = split_pairs(pairs, 4);
  EXPECT_EQ(s.train.size(), 160u);
  EXPECT_EQ(s.valid.size(), 20u);
  EXPECT_EQ(s.test.size(), 20u);
  std::multiset<std::string> all, parts;
  for (const auto& p : pairs) all.insert(p.src);
  for (const auto* part : {&s.train, &s.valid, &s.test})
    for (const auto& p : *part) parts.insert(p.src);
  EXPECT_EQ(all, parts);
}

}  // namespace
}  // namespace copyforge
