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
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace copyforge {

using TokenList = std::vector<std::string>;

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;
inline constexpr int kNumSpecials = 4;

// Lowercases, splits on whitespace and splits the characters .,!?;:()"' into
// their own tokens. A '.' or ',' between two digits stays inside the number.
TokenList tokenize(std::string_view text);

std::string detokenize(const TokenList& tokens);

class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  static Vocabulary from_tokens(const std::vector<std::string>& non_special);

  int id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }
  // Non-special tokens in id order.
  std::vector<std::string> non_special() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Frequency-sorted vocabulary with lexicographic tie-break. `max_size`
// counts the four specials.
Vocabulary build_vocab(const std::vector<TokenList>& corpus, std::size_t max_size, std::size_t min_freq);

struct EncodedExample {
  TokenList src_tokens;
  std::vector<int> src_ids;      // OOV -> UNK
  std::vector<int> src_ext_ids;  // OOV -> vocab.size() + index in oov_list
  TokenList tgt_tokens;
  std::vector<int> tgt_ids;      // BOS, tokens..., EOS; OOV -> UNK
  std::vector<int> tgt_ext_ids;  // BOS, tokens..., EOS; source OOVs get extended ids
  TokenList oov_list;
  std::vector<char> copy_candidate;  // per target token
  std::vector<char> in_vocab;        // per target token
  std::size_t vocab_size = 0;

  std::size_t ext_size() const { return vocab_size + oov_list.size(); }
  // Number of decoder steps under teacher forcing: every token plus EOS.
  std::size_t num_steps() const { return tgt_tokens.size() + 1; }
  // Per decoder step; the final EOS step is in-vocabulary and never a
  // copy-candidate.
  bool step_is_copy_candidate(std::size_t t) const { return t < tgt_tokens.size() && copy_candidate[t]; }
  bool step_in_vocab(std::size_t t) const { return t >= tgt_tokens.size() || in_vocab[t]; }
};

EncodedExample encode_tokens(const TokenList& src, const TokenList& tgt, const Vocabulary& vocab);
EncodedExample encode_example(std::string_view src, std::string_view tgt, const Vocabulary& vocab);

TokenList decode_ids(const std::vector<int>& ext_ids, const Vocabulary& vocab, const TokenList& oov_list);

struct TextPair {
  std::string src;
  std::string tgt;
};

// Lazily reads {"src": ..., "tgt": ...} objects, one per line. Blank lines
// are skipped; other fields are ignored.
class ExampleStream {
 public:
  ExampleStream(const std::string& path, const Vocabulary& vocab);

  std::optional<EncodedExample> next();
  std::optional<TextPair> next_pair();

 private:
  std::ifstream in_;
  const Vocabulary* vocab_;
  std::size_t line_ = 0;
};

std::vector<TextPair> read_pairs(const std::string& path);
void write_pairs(const std::string& path, std::span<const TextPair> pairs);
std::vector<EncodedExample> load_jsonl(const std::string& path, const Vocabulary& vocab);

}  // namespace copyforge
