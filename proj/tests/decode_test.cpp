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
#include <fstream>
#include <map>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "copyforge/decode.hpp"
#include "copyforge/errors.hpp"

namespace copyforge {
namespace {

// Step distributions looked up by prefix; unknown prefixes fall back to the
// per-step default.
struct TableScorer {
  std::map<std::vector<int>, std::vector<double>> table;
  std::vector<double> fallback;

  Expansion<int> operator()(const int& state, const std::vector<int>& prefix) const {
    auto it = table.find(prefix);
    return {it == table.end() ? fallback : it->second, 0.0, state + 1};
  }
};

double path_log_prob(const TableScorer& s, const std::vector<int>& seq) {
  double lp = 0.0;
  std::vector<int> prefix;
  for (int id : seq) {
    lp += std::log(s(0, prefix).probs[static_cast<std::size_t>(id)]);
    prefix.push_back(id);
  }
  return lp;
}

std::vector<int> enumerate_best(const TableScorer& s, std::size_t vocab, std::size_t len) {
  std::vector<int> best, cur(len, 0);
  double best_lp = -INFINITY;
  for (;;) {
    const double lp = path_log_prob(s, cur);
    if (lp > best_lp) {
      best_lp = lp;
      best = cur;
    }
    std::size_t k = len;
    while (k > 0 && static_cast<std::size_t>(++cur[k - 1]) == vocab) cur[--k] = 0;
    if (k == 0) break;
  }
  return best;
}

constexpr int kNoEos = -1;

TEST(RepeatsNgramTest, Cases) {
  EXPECT_FALSE(repeats_ngram({}, 1, 3));
  EXPECT_FALSE(repeats_ngram({1, 2}, 1, 3));
  EXPECT_TRUE(repeats_ngram({1, 2, 3, 1, 2}, 3, 3));
  EXPECT_FALSE(repeats_ngram({1, 2, 3, 1, 2}, 4, 3));
  EXPECT_TRUE(repeats_ngram({5, 5}, 5, 2));
  EXPECT_TRUE(repeats_ngram({7}, 7, 1));
  EXPECT_FALSE(repeats_ngram({1, 2, 3}, 4, 0));
  // Overlapping occurrence: 1 1 1 contains the bigram 1 1 twice.
  EXPECT_TRUE(repeats_ngram({1, 1}, 1, 2));
}

TEST(DecodeConfigTest, Validation) {
  DecodeConfig c;
  c.beam_size = 0;
  EXPECT_THROW(c.validate(), ContractError);
}

// Greedy picks 0 first (0.6) and then has only 0.3 at best; the path through
// token 1 (0.4 * 0.9 * 0.9) wins.
TEST(BeamCoreTest, BeamTwoBeatsGreedyOnHandSetToy) {
  TableScorer s;
  s.fallback = {0.34, 0.33, 0.33};
  s.table[{}] = {0.6, 0.4, 0.0};
  s.table[{0}] = {0.3, 0.35, 0.35};
  s.table[{1}] = {0.05, 0.9, 0.05};
  s.table[{1, 1}] = {0.9, 0.05, 0.05};
  DecodeConfig c;
  c.max_len = 3;
  c.beam_size = 1;
  DecodeResult greedy = beam_search_core(0, s, c, kNoEos);
  EXPECT_EQ(greedy.ext_ids[0], 0);
  c.beam_size = 2;
  DecodeResult beam = beam_search_core(0, s, c, kNoEos);
  const auto best = enumerate_best(s, 3, 3);
  EXPECT_EQ(beam.ext_ids, best);
  EXPECT_EQ(best, (std::vector<int>{1, 1, 0}));
  EXPECT_NEAR(beam.log_prob, path_log_prob(s, best), 1e-12);
  EXPECT_GT(beam.score, greedy.score);
}

TEST(BeamCoreTest, BeamAsWideAsAllPrefixesIsExhaustive) {
  std::mt19937_64 rng(3);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    TableScorer s;
    const std::size_t V = 3;
    std::vector<std::vector<int>> prefixes{{}};
    for (std::size_t t = 0; t < 3; ++t) {
      std::vector<std::vector<int>> next;
      for (const auto& p : prefixes) {
        std::vector<double> d(V);
        double z = 0.0;
        for (double& x : d) z += (x = gamma(rng));
        for (double& x : d) x /= z;
        s.table[p] = d;
        for (std::size_t k = 0; k < V; ++k) {
          auto q = p;
          q.push_back(static_cast<int>(k));
          next.push_back(q);
        }
      }
      prefixes = next;
    }
    DecodeConfig c;
    c.max_len = 3;
    c.beam_size = V * V;
    EXPECT_EQ(beam_search_core(0, s, c, kNoEos).ext_ids, enumerate_best(s, V, 3));
  }
}

TEST(BeamCoreTest, TiesPreferSmallerId) {
  TableScorer s;
  s.fallback = {0.25, 0.25, 0.25, 0.25};
  DecodeConfig c;
  c.max_len = 3;
  for (std::size_t k : {1u, 2u, 4u}) {
    c.beam_size = k;
    EXPECT_EQ(beam_search_core(0, s, c, kNoEos).ext_ids, (std::vector<int>{0, 0, 0}));
  }
}

TEST(BeamCoreTest, BlockingRemovesRepeatedTrigram) {
  // Always prefers continuing the cycle 1 2 3 1 2 3 ...
  struct Cycle {
    Expansion<int> operator()(const int& state, const std::vector<int>& prefix) const {
      std::vector<double> d(5, 0.02);
      d[static_cast<std::size_t>(prefix.empty() ? 1 : prefix.back() % 3 + 1)] = 0.92;
      return {d, 0.0, state};
    }
  };
  DecodeConfig c;
  c.max_len = 12;
  c.beam_size = 3;
  DecodeResult plain = beam_search_core(0, Cycle{}, c, kNoEos);
  EXPECT_TRUE(repeats_ngram({plain.ext_ids.begin(), plain.ext_ids.begin() + 5}, plain.ext_ids[5], 3));
  c.block_ngram = 3;
  DecodeResult blocked = beam_search_core(0, Cycle{}, c, kNoEos);
  ASSERT_EQ(blocked.ext_ids.size(), 12u);
  for (std::size_t i = 3; i <= blocked.ext_ids.size(); ++i) {
    const std::vector<int> prefix(blocked.ext_ids.begin(), blocked.ext_ids.begin() + static_cast<long>(i) - 1);
    EXPECT_FALSE(repeats_ngram(prefix, blocked.ext_ids[i - 1], 3)) << i;
  }
}

TEST(BeamCoreTest, EosFinishesAndLengthNormChangesRanking) {
  // Short: EOS immediately at 0.3. Long: 0.7 * 0.6^3 * 0.95 over five steps.
  const int eos = 0;
  struct Toy {
    Expansion<int> operator()(const int& state, const std::vector<int>& prefix) const {
      if (prefix.empty()) return {{0.3, 0.7}, 0.0, state};
      if (prefix.size() < 4) return {{0.4, 0.6}, 0.0, state};
      return {{0.95, 0.05}, 0.0, state};
    }
  };
  DecodeConfig c;
  c.beam_size = 2;
  c.max_len = 10;
  DecodeResult raw = beam_search_core(0, Toy{}, c, eos);
  EXPECT_TRUE(raw.finished);
  EXPECT_TRUE(raw.ext_ids.empty());
  EXPECT_NEAR(raw.log_prob, std::log(0.3), 1e-12);
  c.length_norm = true;
  DecodeResult norm = beam_search_core(0, Toy{}, c, eos);
  EXPECT_EQ(norm.ext_ids, (std::vector<int>{1, 1, 1, 1}));
  EXPECT_NEAR(norm.score, norm.log_prob / 5.0, 1e-12);
}

Vocabulary toy_vocab() { return Vocabulary::from_tokens({"a", "b", "c", "d", "e", "f"}); }

ModelParameters toy_model(std::size_t vocab_size, std::uint64_t seed) {
  ModelConfig c;
  c.emb_dim = 8;
  c.hidden_dim = 8;
  c.enc_layers = 1;
  c.enc_heads = 2;
  c.enc_ff_dim = 8;
  c.vocab_size = vocab_size;
  c.seed = seed;
  return init_params(c);
}

TEST(ModelBeamTest, BeamOneIsGreedy) {
  Vocabulary v = toy_vocab();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelParameters p = toy_model(v.size(), seed);
    EncodedExample ex = encode_example("a qq b rr", "", v);
    DecodeConfig c;
    c.max_len = 6;
    DecodeResult r = beam_search(p, ex, c);

    // Independent greedy loop straight on decoder_step.
    Tape tape;
    EncoderOutput enc = encode(tape, ex.src_ids, p);
    DecoderState st = initial_state(tape, p.config);
    std::vector<int> ids;
    int prev = kBosId;
    for (std::size_t t = 0; t < c.max_len; ++t) {
      auto [out, next] = decoder_step(tape, prev, st, enc, p, ex);
      auto probs = out.p_final.to_vector();
      probs[kPadId] = probs[kBosId] = 0.0;
      const int best = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      if (best == kEosId) break;
      ids.push_back(best);
      prev = static_cast<std::size_t>(best) >= v.size() ? kUnkId : best;
      st = next;
    }
    EXPECT_EQ(r.ext_ids, ids) << seed;
  }
}

TEST(ModelBeamTest, OutputsStayInExtendedVocabularyAndAreDeterministic) {
  Vocabulary v = toy_vocab();
  ModelParameters p = toy_model(v.size(), 9);
  EncodedExample ex = encode_example("a qq b rr", "", v);
  DecodeConfig c;
  c.beam_size = 4;
  c.max_len = 8;
  c.block_ngram = 2;
  DecodeResult a = beam_search(p, ex, c);
  DecodeResult b = beam_search(p, ex, c);
  EXPECT_EQ(a.ext_ids, b.ext_ids);
  EXPECT_EQ(a.p_copy_trace, b.p_copy_trace);
  for (int id : a.ext_ids) {
    EXPECT_GE(id, 0);
    EXPECT_LT(static_cast<std::size_t>(id), ex.ext_size());
    EXPECT_NE(id, kPadId);
    EXPECT_NE(id, kBosId);
  }
  for (double pc : a.p_copy_trace) {
    EXPECT_GE(pc, 0.0);
    EXPECT_LE(pc, 1.0);
  }
  EXPECT_EQ(a.p_copy_trace.size(), a.ext_ids.size() + (a.finished ? 1 : 0));
  EXPECT_NEAR(sequence_score(p, ex, a.ext_ids, a.finished, false), a.log_prob, 1e-9);
}

TEST(ModelBeamTest, BeamScoreAtLeastGreedyOnRandomModels) {
  Vocabulary v = toy_vocab();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelParameters p = toy_model(v.size(), seed);
    EncodedExample ex = encode_example("a qq b rr c", "", v);
    DecodeConfig c;
    c.max_len = 6;
    const double greedy = beam_search(p, ex, c).score;
    for (std::size_t k : {2u, 3u, 5u}) {
      c.beam_size = k;
      EXPECT_GE(beam_search(p, ex, c).score, greedy - 1e-12) << "seed " << seed << " beam " << k;
    }
  }
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("copyforge_decode_" + name);
}

TEST(GenerateFileTest, EmptyInputGivesEmptyOutput) {
  Vocabulary v = toy_vocab();
  ModelParameters p = toy_model(v.size(), 1);
  const auto in = temp_file("empty.jsonl"), out = temp_file("empty.out.jsonl");
  std::ofstream(in).close();
  GenerationStats s = generate_file(p, v, in.string(), out.string(), DecodeConfig{});
  EXPECT_EQ(s.examples, 0u);
  EXPECT_EQ(std::filesystem::file_size(out), 0u);
}

TEST(GenerateFileTest, OneObjectPerLine) {
  Vocabulary v = toy_vocab();
  ModelParameters p = toy_model(v.size(), 1);
  const auto in = temp_file("two.jsonl"), out = temp_file("two.out.jsonl");
  {
    std::ofstream f(in);
    f << R"({"src": "a qq b", "tgt": "qq b"})" << "\n\n" << R"({"src": "c d", "tgt": "d"})" << "\n";
  }
  DecodeConfig c;
  c.max_len = 5;
  GenerationStats s = generate_file(p, v, in.string(), out.string(), c);
  EXPECT_EQ(s.examples, 2u);
  std::ifstream f(out);
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(f, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["src"], "a qq b");
  EXPECT_EQ(rows[1]["tgt"], "d");
  for (const auto& r : rows) {
    EXPECT_TRUE(r["hyp"].is_string());
    EXPECT_GE(r["avg_p_copy"].get<double>(), 0.0);
    EXPECT_LE(r["avg_p_copy"].get<double>(), 1.0);
  }
}

TEST(GenerateFileTest, MalformedLineReportsLineNumber) {
  Vocabulary v = toy_vocab();
  ModelParameters p = toy_model(v.size(), 1);
  const auto in = temp_file("bad.jsonl"), out = temp_file("bad.out.jsonl");
  {
    std::ofstream f(in);
    f << R"({"src": "a", "tgt": "b"})" << "\n" << "{oops\n";
  }
  try {
    generate_file(p, v, in.string(), out.string(), DecodeConfig{});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace copyforge
