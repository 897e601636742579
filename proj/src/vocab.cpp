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

#include "copyforge/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <nlohmann/json.hpp>

#include "copyforge/errors.hpp"

namespace copyforge {

namespace {

constexpr std::string_view kPunct = ".,!?;:()\"'";
const char* const kSpecials[kNumSpecials] = {"<pad>", "<unk>", "<bos>", "<eos>"};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
      continue;
    }
    if (kPunct.find(ch) != std::string_view::npos) {
      const bool inside_number = (ch == '.' || ch == ',') && !cur.empty() && is_digit(cur.back()) &&
                                 i + 1 < text.size() && is_digit(text[i + 1]);
      if (!inside_number) {
        flush();
        out.emplace_back(1, ch);
        continue;
      }
    }
    cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  flush();
  return out;
}

std::string detokenize(const TokenList& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumSpecials; ++i) {
    id_to_token_.emplace_back(kSpecials[i]);
    token_to_id_.emplace(kSpecials[i], i);
  }
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& non_special) {
  Vocabulary v;
  for (const auto& t : non_special) {
    if (v.token_to_id_.contains(t)) throw ContractError("duplicate vocabulary token '" + t + "'");
    v.token_to_id_.emplace(t, static_cast<int>(v.id_to_token_.size()));
    v.id_to_token_.push_back(t);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return token_to_id_.contains(token); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw IndexError("vocabulary id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::non_special() const {
  return {id_to_token_.begin() + kNumSpecials, id_to_token_.end()};
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary file " + path);
  for (std::size_t i = kNumSpecials; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read vocabulary file " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

Vocabulary build_vocab(const std::vector<TokenList>& corpus, std::size_t max_size, std::size_t min_freq) {
  if (max_size < kNumSpecials + 1) throw ContractError("build_vocab: max_size must be at least 5");
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& t : seq) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    const bool special = std::find(std::begin(kSpecials), std::end(kSpecials), tok) != std::end(kSpecials);
    if (!special && n >= min_freq) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  for (const auto& [tok, n] : ranked) {
    if (kept.size() + kNumSpecials >= max_size) break;
    kept.push_back(tok);
  }
  return Vocabulary::from_tokens(kept);
}

EncodedExample encode_tokens(const TokenList& src, const TokenList& tgt, const Vocabulary& vocab) {
  EncodedExample ex;
  ex.vocab_size = vocab.size();
  ex.src_tokens = src;
  ex.tgt_tokens = tgt;
  std::unordered_map<std::string, int> oov_index;
  for (const auto& tok : src) {
    const int id = vocab.id(tok);
    ex.src_ids.push_back(id);
    if (vocab.contains(tok)) {
      ex.src_ext_ids.push_back(id);
      continue;
    }
    auto [it, inserted] = oov_index.emplace(tok, static_cast<int>(ex.oov_list.size()));
    if (inserted) ex.oov_list.push_back(tok);
    ex.src_ext_ids.push_back(static_cast<int>(vocab.size()) + it->second);
  }

  ex.tgt_ids.push_back(kBosId);
  ex.tgt_ext_ids.push_back(kBosId);
  for (const auto& tok : tgt) {
    const bool known = vocab.contains(tok);
    const bool in_src = std::find(src.begin(), src.end(), tok) != src.end();
    ex.in_vocab.push_back(known ? 1 : 0);
    ex.copy_candidate.push_back(in_src ? 1 : 0);
    const int id = vocab.id(tok);
    ex.tgt_ids.push_back(id);
    if (!known && in_src) {
      ex.tgt_ext_ids.push_back(static_cast<int>(vocab.size()) + oov_index.at(tok));
    } else {
      ex.tgt_ext_ids.push_back(id);
    }
  }
  ex.tgt_ids.push_back(kEosId);
  ex.tgt_ext_ids.push_back(kEosId);
  return ex;
}

EncodedExample encode_example(std::string_view src, std::string_view tgt, const Vocabulary& vocab) {
  return encode_tokens(tokenize(src), tokenize(tgt), vocab);
}

TokenList decode_ids(const std::vector<int>& ext_ids, const Vocabulary& vocab, const TokenList& oov_list) {
  TokenList out;
  const std::size_t limit = vocab.size() + oov_list.size();
  for (int id : ext_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= limit) {
      throw IndexError("decode_ids: id " + std::to_string(id) + " out of range " + std::to_string(limit));
    }
    if (id == kEosId) break;
    if (id == kBosId || id == kPadId) continue;
    if (static_cast<std::size_t>(id) < vocab.size()) {
      out.push_back(vocab.token(id));
    } else {
      out.push_back(oov_list[static_cast<std::size_t>(id) - vocab.size()]);
    }
  }
  return out;
}

ExampleStream::ExampleStream(const std::string& path, const Vocabulary& vocab) : in_(path), vocab_(&vocab) {
  if (!in_) throw Error("cannot open " + path);
}

std::optional<TextPair> ExampleStream::next_pair() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_);
    }
    if (!obj.is_object() || !obj.contains("src") || !obj.contains("tgt") || !obj["src"].is_string() ||
        !obj["tgt"].is_string()) {
      throw ParseError("expected string fields \"src\" and \"tgt\"", line_);
    }
    return TextPair{obj["src"].get<std::string>(), obj["tgt"].get<std::string>()};
  }
  return std::nullopt;
}

std::optional<EncodedExample> ExampleStream::next() {
  auto pair = next_pair();
  if (!pair) return std::nullopt;
  return encode_example(pair->src, pair->tgt, *vocab_);
}

std::vector<TextPair> read_pairs(const std::string& path) {
  Vocabulary unused;
  ExampleStream stream(path, unused);
  std::vector<TextPair> out;
  while (auto p = stream.next_pair()) out.push_back(std::move(*p));
  return out;
}

void write_pairs(const std::string& path, std::span<const TextPair> pairs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& p : pairs) out << nlohmann::json{{"src", p.src}, {"tgt", p.tgt}}.dump() << '\n';
}

std::vector<EncodedExample> load_jsonl(const std::string& path, const Vocabulary& vocab) {
  ExampleStream stream(path, vocab);
  std::vector<EncodedExample> out;
  while (auto ex = stream.next()) out.push_back(std::move(*ex));
  return out;
}

}  // namespace copyforge
