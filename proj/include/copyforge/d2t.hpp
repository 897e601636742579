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

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copyforge/metrics.hpp"
#include "copyforge/vocab.hpp"

namespace copyforge {

// Declaration order is the extractor's tie-break order.
enum class RType { kAssists, kLosses, kPoints, kRebounds, kWins, kUnmatched };

std::string to_string(RType t);
RType parse_rtype(const std::string& text);

struct Record {
  std::string entity;
  RType type = RType::kPoints;
  int value = 0;

  auto operator<=>(const Record&) const = default;
};

struct GameInstance {
  std::vector<Record> records;
  std::string summary;
  std::string linearized_src;
};

struct D2TOptions {
  std::uint64_t seed = 1;
  std::size_t n_games = 2000;
  std::size_t name_pool_size = 120;
  double oov_name_fraction = 0.15;
  std::size_t players_per_team = 2;
};

// Space-separated "entity <rtype> value" triples.
std::string linearize(const std::vector<Record>& records);

std::vector<GameInstance> generate_dataset(const D2TOptions& options);

struct Relation {
  std::string entity;
  RType type = RType::kUnmatched;
  int value = 0;

  auto operator<=>(const Relation&) const = default;
};

struct ExtractedRelation {
  Relation relation;
  std::size_t token_index = 0;  // position of the value token
};

// Pairs every entity mention with the numbers in the next 8 tokens, stopping
// at the next mention. The type comes from the entity's matching record.
std::vector<ExtractedRelation> extract_relations_at(const TokenList& text, const std::vector<Record>& records);
std::vector<Relation> extract_relations(const TokenList& text, const std::vector<Record>& records);

bool relation_in_records(const Relation& r, const std::vector<Record>& records);

struct RGScore {
  double precision_pct = 0.0;
  std::size_t unique_count = 0;
};
RGScore rg_metrics(const std::vector<Relation>& hyp, const std::vector<Record>& records);

struct CSCOScore {
  double cs_precision = 0.0;
  double cs_recall = 0.0;
  double co_similarity = 0.0;
};
CSCOScore cs_co_metrics(const std::vector<Relation>& hyp, const std::vector<Relation>& gold);

// RG precision is micro-averaged over all extracted tuples; the RG count and
// CS/CO are averaged per summary. Buckets cover numeric tokens and need one
// p_copy value per token; pass no traces to skip them.
struct D2TCorpusScores {
  std::size_t examples = 0;
  double rg_precision = 0.0;
  double rg_count = 0.0;
  double cs_precision = 0.0;
  double cs_recall = 0.0;
  double co = 0.0;
  BucketReport buckets;
};
D2TCorpusScores score_d2t_corpus(std::span<const GameInstance> games, std::span<const TokenList> texts,
                                 std::span<const std::vector<double>> p_copy_traces = {});

struct GameSplit {
  std::vector<GameInstance> train, valid, test;
};
// 80/10/10 after a seeded shuffle.
GameSplit split_games(std::vector<GameInstance> games, std::uint64_t seed);

void write_games_jsonl(const std::string& path, std::span<const GameInstance> games);
std::vector<GameInstance> read_games_jsonl(const std::string& path);
// Generic {"src","tgt"} lines for the trainer.
void write_pairs_jsonl(const std::string& path, std::span<const GameInstance> games);

}  // namespace copyforge
