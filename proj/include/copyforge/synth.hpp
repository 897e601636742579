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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "copyforge/vocab.hpp"

namespace copyforge {

// Copy task: target equals source. A fraction of tokens are one-off words;
// each occurs once in the source and once in the target, so a vocabulary
// min-freq of 3 leaves them out.
struct IdentityOptions {
  std::uint64_t seed = 1;
  std::size_t n_examples = 200;
  double oov_fraction = 0.3;
  std::size_t common_pool = 60;
  std::size_t min_len = 5;
  std::size_t max_len = 10;

  void validate() const;
};

std::vector<TextPair> generate_identity(const IdentityOptions& options);

// Lead summarization. The source is a run of sentences
//   <name> <verb> the <noun> [filler] .
// and the summary restates the leading ones as
//   <name> <verb or its paraphrase> the <noun> .
// Nouns follow a Zipf law over a large pool so that many are in-vocabulary
// but rare. The paraphrase is never in the source. One-off names and nouns
// occur at most twice per example.
inline constexpr const char* kGenericNoun = "item";

struct SummarizationOptions {
  std::uint64_t seed = 1;
  std::size_t n_examples = 1500;
  std::size_t name_pool = 1500;
  std::size_t noun_pool = 2000;
  double zipf_exponent = 0.8;
  double oov_fraction = 0.1;       // per name or noun mention
  double paraphrase_prob = 0.65;   // per summary sentence
  double generic_prob = 0.0;       // summary noun becomes kGenericNoun
  std::size_t min_sentences = 4;
  std::size_t max_sentences = 6;
  std::size_t summary_sentences = 2;

  void validate() const;
};

std::vector<TextPair> generate_summarization(const SummarizationOptions& options);

struct PairSplit {
  std::vector<TextPair> train, valid, test;
};

// Seeded 80/10/10 split.
PairSplit split_pairs(std::vector<TextPair> pairs, std::uint64_t seed);

}  // namespace copyforge
