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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "copyforge/model.hpp"
#include "copyforge/vocab.hpp"

namespace copyforge {

struct DecodeConfig {
  std::size_t beam_size = 1;
  std::size_t max_len = 80;
  std::size_t block_ngram = 0;  // 0 disables
  bool length_norm = false;

  void validate() const;
};

struct DecodeResult {
  std::vector<int> ext_ids;  // without EOS
  double log_prob = 0.0;
  double score = 0.0;
  std::vector<double> p_copy_trace;  // one per decoder step, EOS step included
  bool finished = false;             // ended with EOS rather than max_len
};

// True when appending `next` to `prefix` produces an n-gram that already
// occurs earlier in the prefix.
bool repeats_ngram(const std::vector<int>& prefix, int next, std::size_t n);

// Distribution over the next token plus the state that follows it.
template <typename State>
struct Expansion {
  std::vector<double> probs;
  double p_copy = 0.0;
  State next;
};

// Beam search over any step function `expand(const State&, const
// std::vector<int>& prefix) -> Expansion<State>`. Each hypothesis carries the
// state produced before its last token was chosen. Tokens with probability 0
// are never expanded.
template <typename State, typename Expand>
DecodeResult beam_search_core(const State& initial, Expand&& expand, const DecodeConfig& config, int eos_id) {
  config.validate();
  struct Hyp {
    std::vector<int> ids;
    double log_prob;
    std::vector<double> trace;
    State state;
  };
  struct Candidate {
    double log_prob;
    int id;
    std::size_t beam;
  };
  auto final_score = [&](double lp, std::size_t len) {
    return config.length_norm ? lp / static_cast<double>(std::max<std::size_t>(len, 1)) : lp;
  };

  std::vector<Hyp> live{Hyp{{}, 0.0, {}, initial}};
  std::vector<DecodeResult> finished;
  for (std::size_t t = 0; t < config.max_len && !live.empty(); ++t) {
    std::vector<Candidate> cands;
    std::vector<Expansion<State>> expanded;
    expanded.reserve(live.size());
    for (std::size_t b = 0; b < live.size(); ++b) {
      expanded.push_back(expand(live[b].state, live[b].ids));
      const auto& probs = expanded.back().probs;
      for (std::size_t k = 0; k < probs.size(); ++k) {
        if (!(probs[k] > 0.0)) continue;
        const int id = static_cast<int>(k);
        if (id != eos_id && config.block_ngram > 0 && repeats_ngram(live[b].ids, id, config.block_ngram)) continue;
        cands.push_back({live[b].log_prob + std::log(probs[k]), id, b});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.id != b.id) return a.id < b.id;
      return a.beam < b.beam;
    });

    std::vector<Hyp> next;
    for (std::size_t r = 0; r < cands.size() && next.size() < config.beam_size; ++r) {
      const Candidate& c = cands[r];
      const Hyp& parent = live[c.beam];
      std::vector<double> trace = parent.trace;
      trace.push_back(expanded[c.beam].p_copy);
      if (c.id == eos_id) {
        // Only EOS candidates that rank inside the beam finish.
        if (r < config.beam_size) {
          finished.push_back({parent.ids, c.log_prob, final_score(c.log_prob, parent.ids.size() + 1),
                              std::move(trace), true});
        }
        continue;
      }
      std::vector<int> ids = parent.ids;
      ids.push_back(c.id);
      next.push_back(Hyp{std::move(ids), c.log_prob, std::move(trace), expanded[c.beam].next});
    }
    live = std::move(next);

    if (finished.size() >= config.beam_size && !live.empty()) {
      double worst = finished.front().score;
      for (const auto& f : finished) worst = std::min(worst, f.score);
      double best_live = -INFINITY;
      for (const auto& h : live) best_live = std::max(best_live, final_score(h.log_prob, h.ids.size()));
      // Without length normalization scores only fall, so this is exact.
      if (best_live <= worst) live.clear();
    }
  }
  for (auto& h : live) {
    const double s = final_score(h.log_prob, h.ids.size());
    finished.push_back({std::move(h.ids), h.log_prob, s, std::move(h.trace), false});
  }
  if (finished.empty()) return {};
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i)
    if (finished[i].score > finished[best].score) best = i;
  return finished[best];
}

// Beam search with the pointer-generator decoder. Generated source OOVs are
// fed back as UNK.
DecodeResult beam_search(ModelParameters& params, const EncodedExample& example, const DecodeConfig& config);

// Score of a fixed continuation under the model (teacher-forced), in the same
// units as DecodeResult::score. `ext_ids` excludes EOS; `with_eos` appends it.
double sequence_score(ModelParameters& params, const EncodedExample& example, const std::vector<int>& ext_ids,
                      bool with_eos, bool length_norm);

struct GenerationStats {
  std::size_t examples = 0;
  double avg_p_copy = 0.0;  // over all decoder steps
};

// Reads {"src","tgt"} JSONL and writes {"src","tgt","hyp","avg_p_copy","p_copy_trace"}
// JSONL. The trace has one entry per hyp token plus the EOS step when reached.
GenerationStats generate_file(ModelParameters& params, const Vocabulary& vocab, const std::string& in_path,
                              const std::string& out_path, const DecodeConfig& config);

}  // namespace copyforge
