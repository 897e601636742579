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

#include "copyforge/decode.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "copyforge/errors.hpp"

namespace copyforge {

void DecodeConfig::validate() const {
  if (beam_size == 0) throw ContractError("decode config: beam_size must be >= 1");
  if (max_len == 0) throw ContractError("decode config: max_len must be >= 1");
}

bool repeats_ngram(const std::vector<int>& prefix, int next, std::size_t n) {
  if (n == 0 || prefix.size() + 1 < n + 1) return false;
  // The n-gram ending at `next` starts at prefix.size() + 1 - n.
  const std::size_t start = prefix.size() + 1 - n;
  auto at = [&](std::size_t i) { return i < prefix.size() ? prefix[i] : next; };
  for (std::size_t s = 0; s + n <= prefix.size(); ++s) {
    bool same = true;
    for (std::size_t k = 0; k < n && same; ++k) same = prefix[s + k] == at(start + k);
    if (same) return true;
  }
  return false;
}

namespace {

int feed_id(int ext_id, std::size_t vocab_size) {
  return static_cast<std::size_t>(ext_id) >= vocab_size ? kUnkId : ext_id;
}

struct ModelScorer {
  ModelParameters& params;
  const EncodedExample& example;
  SourceMemory memory;

  Expansion<StateValues> operator()(const StateValues& state, const std::vector<int>& prefix) const {
    Tape tape;
    EncoderOutput enc = memory.bind(tape);
    const int prev = prefix.empty() ? kBosId : feed_id(prefix.back(), params.config.vocab_size);
    auto [out, next] = decoder_step(tape, prev, state.bind(tape), enc, params, example);
    Expansion<StateValues> e;
    e.probs = out.p_final.to_vector();
    // PAD and BOS are never emitted.
    e.probs[kPadId] = 0.0;
    e.probs[kBosId] = 0.0;
    e.p_copy = 1.0 - out.p_gen.item();
    e.next = StateValues::capture(next);
    return e;
  }
};

StateValues zero_state(const ModelConfig& config) {
  StateValues s;
  s.s.assign(config.hidden_dim, 0.0);
  s.cell.assign(config.hidden_dim, 0.0);
  s.context.assign(config.hidden_dim, 0.0);
  return s;
}

}  // namespace

DecodeResult beam_search(ModelParameters& params, const EncodedExample& example, const DecodeConfig& config) {
  Tape tape;
  ModelScorer scorer{params, example, SourceMemory::capture(encode(tape, example.src_ids, params))};
  return beam_search_core(zero_state(params.config), scorer, config, kEosId);
}

double sequence_score(ModelParameters& params, const EncodedExample& example, const std::vector<int>& ext_ids,
                      bool with_eos, bool length_norm) {
  Tape tape;
  ModelScorer scorer{params, example, SourceMemory::capture(encode(tape, example.src_ids, params))};
  StateValues state = zero_state(params.config);
  std::vector<int> prefix;
  double lp = 0.0;
  auto consume = [&](int id) {
    auto e = scorer(state, prefix);
    lp += std::log(e.probs.at(static_cast<std::size_t>(id)));
    state = std::move(e.next);
    prefix.push_back(id);
  };
  for (int id : ext_ids) consume(id);
  if (with_eos) consume(kEosId);
  const std::size_t len = ext_ids.size() + (with_eos ? 1 : 0);
  return length_norm ? lp / static_cast<double>(std::max<std::size_t>(len, 1)) : lp;
}

GenerationStats generate_file(ModelParameters& params, const Vocabulary& vocab, const std::string& in_path,
                              const std::string& out_path, const DecodeConfig& config) {
  config.validate();
  ExampleStream stream(in_path, vocab);
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path);
  GenerationStats stats;
  double p_copy_total = 0.0;
  std::size_t steps = 0;
  while (auto pair = stream.next_pair()) {
    EncodedExample ex = encode_example(pair->src, pair->tgt, vocab);
    DecodeResult r = beam_search(params, ex, config);
    double sum = 0.0;
    for (double p : r.p_copy_trace) sum += p;
    p_copy_total += sum;
    steps += r.p_copy_trace.size();
    nlohmann::json j;
    j["src"] = pair->src;
    j["tgt"] = pair->tgt;
    j["hyp"] = detokenize(decode_ids(r.ext_ids, vocab, ex.oov_list));
    j["avg_p_copy"] = r.p_copy_trace.empty() ? 0.0 : sum / static_cast<double>(r.p_copy_trace.size());
    j["p_copy_trace"] = r.p_copy_trace;
    out << j.dump() << '\n';
    ++stats.examples;
  }
  stats.avg_p_copy = steps == 0 ? 0.0 : p_copy_total / static_cast<double>(steps);
  return stats;
}

}  // namespace copyforge
