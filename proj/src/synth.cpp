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

#include "copyforge/synth.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "copyforge/errors.hpp"

namespace copyforge {

namespace {

const char* const kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st", "gl"};
const char* const kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};

const std::pair<const char*, const char*> kVerbs[] = {
    {"announced", "unveiled"}, {"acquired", "bought"},    {"criticized", "slammed"}, {"approved", "backed"},
    {"rejected", "refused"},   {"launched", "started"},   {"praised", "lauded"},     {"sold", "offloaded"},
    {"visited", "toured"},     {"designed", "drafted"},   {"defended", "shielded"},  {"funded", "bankrolled"},
    {"delayed", "postponed"},  {"opened", "inaugurated"}, {"closed", "shuttered"},   {"reviewed", "assessed"}};

const char* const kPlaces[] = {"paris", "lagos", "lima", "oslo", "cairo", "seoul", "quito", "perth",
                               "dakar", "hanoi", "riga", "turin", "porto", "delhi", "osaka", "bern"};
const char* const kDays[] = {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double unit(std::mt19937_64& rng) { return std::generate_canonical<double, 53>(rng); }

std::string syllable(std::mt19937_64& rng) {
  return std::string(kOnsets[draw(rng, std::size(kOnsets))]) + kVowels[draw(rng, std::size(kVowels))];
}

// Distinct made-up words of `syllables` syllables, none in `taken`.
std::vector<std::string> make_words(std::mt19937_64& rng, std::size_t count, int syllables,
                                    std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string w;
    for (int k = 0; k < syllables; ++k) w += syllable(rng);
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

// One-off words; `taken` keeps them distinct from every pool word.
class RareWords {
 public:
  RareWords(std::mt19937_64& rng, std::set<std::string>& taken) : rng_(rng), taken_(taken) {}
  std::string word() { return make_words(rng_, 1, 4, taken_).front(); }
  std::string name() { return make_words(rng_, 1, 3, taken_).front() + "-" + make_words(rng_, 1, 3, taken_).front(); }

 private:
  std::mt19937_64& rng_;
  std::set<std::string>& taken_;
};

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

void IdentityOptions::validate() const {
  if (oov_fraction < 0.0 || oov_fraction > 1.0) throw ContractError("oov_fraction must be in [0, 1]");
  if (common_pool == 0) throw ContractError("common_pool must be positive");
  if (min_len == 0 || min_len > max_len) throw ContractError("need 1 <= min_len <= max_len");
}

std::vector<TextPair> generate_identity(const IdentityOptions& options) {
  options.validate();
  std::mt19937_64 rng(options.seed);
  std::set<std::string> taken;
  const auto common = make_words(rng, options.common_pool, 2, taken);
  RareWords rare(rng, taken);
  std::vector<TextPair> out;
  out.reserve(options.n_examples);
  for (std::size_t i = 0; i < options.n_examples; ++i) {
    const std::size_t len = options.min_len + draw(rng, options.max_len - options.min_len + 1);
    std::vector<std::string> toks;
    for (std::size_t k = 0; k < len; ++k)
      toks.push_back(unit(rng) < options.oov_fraction ? rare.word() : common[draw(rng, common.size())]);
    std::string text = join(toks);
    out.push_back({text, text});
  }
  return out;
}

void SummarizationOptions::validate() const {
  if (oov_fraction < 0.0 || oov_fraction > 1.0) throw ContractError("oov_fraction must be in [0, 1]");
  if (paraphrase_prob < 0.0 || paraphrase_prob > 1.0) throw ContractError("paraphrase_prob must be in [0, 1]");
  if (generic_prob < 0.0 || generic_prob > 1.0) throw ContractError("generic_prob must be in [0, 1]");
  if (name_pool == 0 || noun_pool == 0) throw ContractError("word pools must be nonempty");
  if (min_sentences == 0 || min_sentences > max_sentences) throw ContractError("need 1 <= min_sentences <= max_sentences");
  if (summary_sentences == 0 || summary_sentences > min_sentences)
    throw ContractError("summary_sentences must be in [1, min_sentences]");
  if (zipf_exponent < 0.0) throw ContractError("zipf_exponent must be non-negative");
}

std::vector<TextPair> generate_summarization(const SummarizationOptions& options) {
  options.validate();
  std::mt19937_64 rng(options.seed);
  std::set<std::string> taken{"the", "in", "on", "with", kGenericNoun};
  for (const auto& [v, p] : kVerbs) taken.insert({v, p});
  for (const char* w : kPlaces) taken.insert(w);
  for (const char* w : kDays) taken.insert(w);

  std::vector<std::string> names;
  {
    const auto first = make_words(rng, options.name_pool, 2, taken);
    const auto last = make_words(rng, options.name_pool, 2, taken);
    for (std::size_t i = 0; i < options.name_pool; ++i) names.push_back(first[i] + "-" + last[i]);
  }
  const auto nouns = make_words(rng, options.noun_pool, 2, taken);
  std::vector<double> weights(nouns.size());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = std::pow(static_cast<double>(i + 1), -options.zipf_exponent);
  std::discrete_distribution<std::size_t> noun_dist(weights.begin(), weights.end());
  RareWords rare(rng, taken);

  auto pick_name = [&] { return unit(rng) < options.oov_fraction ? rare.name() : names[draw(rng, names.size())]; };
  auto pick_noun = [&] { return unit(rng) < options.oov_fraction ? rare.word() : nouns[noun_dist(rng)]; };

  std::vector<TextPair> out;
  out.reserve(options.n_examples);
  for (std::size_t i = 0; i < options.n_examples; ++i) {
    const std::size_t n_sent = options.min_sentences + draw(rng, options.max_sentences - options.min_sentences + 1);
    std::vector<std::string> src, tgt;
    for (std::size_t s = 0; s < n_sent; ++s) {
      const std::string name = pick_name();
      const auto& verb = kVerbs[draw(rng, std::size(kVerbs))];
      const std::string noun = pick_noun();
      src.insert(src.end(), {name, verb.first, "the", noun});
      switch (draw(rng, 4)) {
        case 0: src.insert(src.end(), {"in", kPlaces[draw(rng, std::size(kPlaces))]}); break;
        case 1: src.insert(src.end(), {"on", kDays[draw(rng, std::size(kDays))]}); break;
        case 2: src.insert(src.end(), {"with", pick_name()}); break;
        default: break;
      }
      src.push_back(".");
      if (s < options.summary_sentences) {
        const bool para = unit(rng) < options.paraphrase_prob;
        const bool generic = unit(rng) < options.generic_prob;
        tgt.insert(tgt.end(), {name, para ? verb.second : verb.first, "the", generic ? kGenericNoun : noun, "."});
      }
    }
    out.push_back({join(src), join(tgt)});
  }
  return out;
}

PairSplit split_pairs(std::vector<TextPair> pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[draw(rng, i)]);
  const std::size_t n_train = pairs.size() * 8 / 10;
  const std::size_t n_valid = pairs.size() / 10;
  PairSplit split;
  split.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.valid.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
                     pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  split.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), pairs.end());
  return split;
}

}  // namespace copyforge
