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

#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "copyforge/d2t.hpp"
#include "copyforge/errors.hpp"

namespace copyforge {
namespace {

D2TOptions small(std::uint64_t seed, std::size_t games = 40, double oov = 0.2) {
  D2TOptions o;
  o.seed = seed;
  o.n_games = games;
  o.oov_name_fraction = oov;
  return o;
}

Vocabulary vocab_for(const std::vector<GameInstance>& games, std::size_t min_freq) {
  std::vector<TokenList> corpus;
  for (const auto& g : games) {
    corpus.push_back(tokenize(g.linearized_src));
    corpus.push_back(tokenize(g.summary));
  }
  return build_vocab(corpus, 100000, min_freq);
}

bool is_number(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); });
}

TEST(GenerateTest, SameSeedSameData) {
  auto a = generate_dataset(small(3));
  auto b = generate_dataset(small(3));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].summary, b[i].summary);
    EXPECT_EQ(a[i].records, b[i].records);
  }
  EXPECT_NE(a[0].summary, generate_dataset(small(4))[0].summary);
}

TEST(GenerateTest, ValueRangesAndLinearization) {
  for (const auto& g : generate_dataset(small(5, 200))) {
    for (const auto& r : g.records) {
      EXPECT_GE(r.value, 0);
      EXPECT_LE(r.value, 200);
    }
    const TokenList src = tokenize(g.linearized_src);
    ASSERT_EQ(src.size(), 3 * g.records.size());
    EXPECT_EQ(src[1], "<wins>");
  }
}

TEST(GenerateTest, NoOovFractionKeepsAllNamesInVocabulary) {
  auto games = generate_dataset(small(6, 400, 0.0));
  Vocabulary v = vocab_for(games, 5);
  for (const auto& g : games)
    for (const auto& r : g.records) EXPECT_TRUE(v.contains(r.entity)) << r.entity;
}

TEST(GenerateTest, RareNamesFallBelowTheCutoff) {
  auto games = generate_dataset(small(7, 400, 0.3));
  Vocabulary v = vocab_for(games, 5);
  std::size_t oov = 0, names = 0;
  std::set<std::string> seen;
  for (const auto& g : games) {
    for (const auto& r : g.records) {
      if (!seen.insert(r.entity).second) continue;
      ++names;
      if (!v.contains(r.entity)) ++oov;
    }
  }
  EXPECT_GT(oov, 0u);
  EXPECT_LT(oov, names);
}

// Every number in a gold summary belongs to the entity the extractor pairs it
// with, and every number is paired with some entity.
TEST(GenerateTest, GoldSummariesAreSoundOverManySeeds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (const auto& g : generate_dataset(small(seed, 3))) {
      const TokenList toks = tokenize(g.summary);
      auto rels = extract_relations_at(toks, g.records);
      std::set<std::size_t> covered;
      for (const auto& e : rels) {
        ASSERT_TRUE(relation_in_records(e.relation, g.records)) << g.summary;
        covered.insert(e.token_index);
      }
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (is_number(toks[i])) ASSERT_TRUE(covered.count(i)) << g.summary << " @" << i;
      }
      EXPECT_EQ(rg_metrics(extract_relations(toks, g.records), g.records).precision_pct, 100.0);
    }
  }
}

TEST(ExtractTest, Examples) {
  std::vector<Record> recs{{"hawks", RType::kPoints, 142}};
  EXPECT_EQ(extract_relations(tokenize("hawks scored 142 points"), recs),
            (std::vector<Relation>{{"hawks", RType::kPoints, 142}}));
  EXPECT_TRUE(extract_relations(tokenize("they scored 142 points"), recs).empty());
  std::vector<Record> tie{{"kyle-lowry", RType::kRebounds, 7}, {"kyle-lowry", RType::kAssists, 7}};
  EXPECT_EQ(extract_relations(tokenize("kyle-lowry had 7 assists"), tie),
            (std::vector<Relation>{{"kyle-lowry", RType::kAssists, 7}}));
}

TEST(ExtractTest, WindowAndStopAtNextMention) {
  std::vector<Record> recs{{"hawks", RType::kPoints, 100}, {"nets", RType::kPoints, 90}};
  auto r = extract_relations(tokenize("hawks a b c d e f g 100"), recs);
  EXPECT_EQ(r.size(), 1u);
  r = extract_relations(tokenize("hawks a b c d e f g h 100"), recs);
  EXPECT_TRUE(r.empty());
  r = extract_relations(tokenize("hawks beat nets 90 to 100"), recs);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], (Relation{"nets", RType::kPoints, 90}));
  EXPECT_EQ(r[1], (Relation{"nets", RType::kUnmatched, 100}));
}

TEST(RgTest, Examples) {
  std::vector<Record> recs{{"hawks", RType::kPoints, 142}};
  std::vector<Relation> good{{"hawks", RType::kPoints, 142}, {"hawks", RType::kPoints, 142}};
  EXPECT_EQ(rg_metrics(good, recs).precision_pct, 100.0);
  EXPECT_EQ(rg_metrics(good, recs).unique_count, 1u);
  std::vector<Relation> half{{"hawks", RType::kPoints, 142}, {"hawks", RType::kUnmatched, 3}};
  EXPECT_EQ(rg_metrics(half, recs).precision_pct, 50.0);
  EXPECT_EQ(rg_metrics(half, recs).unique_count, 1u);
  RGScore none = rg_metrics({}, recs);
  EXPECT_EQ(none.precision_pct, 0.0);
  EXPECT_EQ(none.unique_count, 0u);
}

TEST(CsCoTest, Examples) {
  std::vector<Relation> g{{"a", RType::kPoints, 1}, {"b", RType::kWins, 2}, {"c", RType::kLosses, 3}};
  CSCOScore same = cs_co_metrics(g, g);
  EXPECT_EQ(same.cs_precision, 100.0);
  EXPECT_EQ(same.cs_recall, 100.0);
  EXPECT_EQ(same.co_similarity, 100.0);
  std::vector<Relation> other{{"z", RType::kPoints, 9}};
  CSCOScore disjoint = cs_co_metrics(other, g);
  EXPECT_EQ(disjoint.cs_precision, 0.0);
  EXPECT_EQ(disjoint.cs_recall, 0.0);
  EXPECT_EQ(disjoint.co_similarity, 0.0);
  std::vector<Relation> rev(g.rbegin(), g.rend());
  CSCOScore reversed = cs_co_metrics(rev, g);
  EXPECT_EQ(reversed.cs_precision, 100.0);
  EXPECT_EQ(reversed.cs_recall, 100.0);
  EXPECT_LT(reversed.co_similarity, 100.0);
}

TEST(SplitTest, EightyTenTen) {
  auto games = generate_dataset(small(8, 100));
  GameSplit s = split_games(games, 8);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.valid.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::multiset<std::string> before, after;
  for (const auto& g : games) before.insert(g.summary);
  for (const auto* part : {&s.train, &s.valid, &s.test})
    for (const auto& g : *part) after.insert(g.summary);
  EXPECT_EQ(before, after);
  EXPECT_EQ(split_games(games, 8).test[0].summary, s.test[0].summary);
}

TEST(GamesJsonlTest, RoundTrip) {
  auto games = generate_dataset(small(9, 5));
  const auto path = (std::filesystem::temp_directory_path() / "copyforge_games.jsonl").string();
  write_games_jsonl(path, games);
  auto back = read_games_jsonl(path);
  ASSERT_EQ(back.size(), games.size());
  for (std::size_t i = 0; i < games.size(); ++i) {
    EXPECT_EQ(back[i].records, games[i].records);
    EXPECT_EQ(back[i].summary, games[i].summary);
    EXPECT_EQ(back[i].linearized_src, games[i].linearized_src);
  }
  EXPECT_THROW(parse_rtype("STEALS"), FormatError);
}

}  // namespace
}  // namespace copyforge
