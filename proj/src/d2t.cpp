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

#include "copyforge/d2t.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "copyforge/errors.hpp"
#include "copyforge/metrics.hpp"

namespace copyforge {

namespace {

const std::vector<std::string> kTeams{
    "hawks",   "celtics", "nets",      "hornets", "bulls",   "cavaliers", "mavericks", "nuggets",
    "pistons", "warriors", "rockets",  "pacers",  "clippers", "lakers",   "grizzlies", "heat",
    "bucks",   "wolves",  "pelicans",  "knicks",  "thunder", "magic",     "sixers",    "suns",
    "blazers", "kings",   "spurs",     "raptors", "jazz",    "wizards"};

const std::vector<std::string> kFirst{"paul",  "kevin", "james", "chris", "tony",  "derek", "jamal", "kyle",
                                      "devin", "jared", "isaiah", "brook", "dwight", "rajon", "marc",  "lance",
                                      "tyson", "deron", "jrue",  "kemba", "jimmy", "andre", "goran", "nikola"};
const std::vector<std::string> kLast{"millsap", "love",   "harden", "paul",   "parker",  "rose",    "crawford",
                                     "lowry",   "booker", "dudley", "thomas", "lopez",   "howard",  "rondo",
                                     "gasol",   "stephenson", "chandler", "williams", "holiday", "walker",
                                     "butler",  "drummond", "dragic", "vucevic"};
const std::vector<std::string> kDays{"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};

const char* kSyllables[] = {"ka", "zo", "ri", "mu", "te", "va", "lo", "qui", "xe", "dra",
                            "po", "ny", "sha", "ku", "fe", "bo", "zi", "gor", "ule", "ath"};

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
int uniform(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(rng, i)]);
}

std::string rare_name(std::mt19937_64& rng) {
  std::string first, last;
  for (int k = 0; k < 3; ++k) first += kSyllables[draw(rng, std::size(kSyllables))];
  for (int k = 0; k < 3; ++k) last += kSyllables[draw(rng, std::size(kSyllables))];
  return first + "-" + last;
}

std::string rtype_token(RType t) {
  std::string s = to_string(t);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return "<" + s + ">";
}

bool is_number(const std::string& tok) {
  return !tok.empty() && std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); });
}

struct Team {
  std::string name;
  int wins, losses, points;
};

struct Player {
  std::string name;
  int points, rebounds, assists;
};

std::string player_sentence(const Player& p, std::size_t templ) {
  std::ostringstream s;
  switch (templ) {
    case 0: s << p.name << " scored " << p.points << " points ."; break;
    case 1:
      s << p.name << " had " << p.points << " points , " << p.rebounds << " rebounds and " << p.assists
        << " assists .";
      break;
    case 2: s << p.name << " added " << p.rebounds << " rebounds and " << p.assists << " assists ."; break;
    case 3: s << p.name << " finished with " << p.points << " points and " << p.rebounds << " rebounds ."; break;
    default: s << p.name << " chipped in " << p.assists << " assists off the bench ."; break;
  }
  return s.str();
}

}  // namespace

std::string to_string(RType t) {
  switch (t) {
    case RType::kWins: return "WINS";
    case RType::kLosses: return "LOSSES";
    case RType::kPoints: return "POINTS";
    case RType::kRebounds: return "REBOUNDS";
    case RType::kAssists: return "ASSISTS";
    case RType::kUnmatched: return "UNMATCHED";
  }
  return "?";
}

RType parse_rtype(const std::string& text) {
  for (RType t : {RType::kWins, RType::kLosses, RType::kPoints, RType::kRebounds, RType::kAssists,
                  RType::kUnmatched}) {
    if (to_string(t) == text) return t;
  }
  throw FormatError("unknown record type '" + text + "'");
}

std::string linearize(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    if (!out.empty()) out += ' ';
    out += r.entity + ' ' + rtype_token(r.type) + ' ' + std::to_string(r.value);
  }
  return out;
}

std::vector<GameInstance> generate_dataset(const D2TOptions& options) {
  if (!(options.oov_name_fraction >= 0.0 && options.oov_name_fraction <= 1.0)) {
    throw ContractError("oov_name_fraction must be in [0, 1]");
  }
  if (options.players_per_team == 0) throw ContractError("players_per_team must be >= 1");
  std::mt19937_64 rng(options.seed);

  std::vector<std::string> pool;
  for (const auto& f : kFirst)
    for (const auto& l : kLast) pool.push_back(f + "-" + l);
  shuffle(pool, rng);
  const std::size_t pool_size = std::min(options.name_pool_size, pool.size());
  if (pool_size < 2 * options.players_per_team) throw ContractError("name pool too small for a game");
  pool.resize(pool_size);
  const std::set<std::string> pool_set(pool.begin(), pool.end());
  std::set<std::string> used_rare;

  std::vector<GameInstance> games;
  games.reserve(options.n_games);
  for (std::size_t g = 0; g < options.n_games; ++g) {
    std::size_t ia = draw(rng, kTeams.size()), ib = draw(rng, kTeams.size() - 1);
    if (ib >= ia) ++ib;
    Team teams[2];
    for (int k = 0; k < 2; ++k) {
      teams[k].name = kTeams[k == 0 ? ia : ib];
      teams[k].wins = uniform(rng, 0, 70);
      teams[k].losses = uniform(rng, 0, 82 - teams[k].wins);
    }
    const int win_pts = uniform(rng, 95, 150);
    const int lose_pts = uniform(rng, 80, win_pts - 1);
    const std::size_t winner = draw(rng, 2);
    teams[winner].points = win_pts;
    teams[1 - winner].points = lose_pts;

    std::vector<std::vector<Player>> players(2);
    std::set<std::string> in_game;
    for (int k = 0; k < 2; ++k) {
      for (std::size_t p = 0; p < options.players_per_team; ++p) {
        Player pl;
        const bool rare = static_cast<double>(rng() >> 11) * 0x1.0p-53 < options.oov_name_fraction;
        do {
          pl.name = rare ? rare_name(rng) : pool[draw(rng, pool.size())];
        } while (in_game.count(pl.name) || (rare && (pool_set.count(pl.name) || used_rare.count(pl.name))));
        in_game.insert(pl.name);
        if (rare) used_rare.insert(pl.name);
        pl.points = uniform(rng, 0, 40);
        pl.rebounds = uniform(rng, 0, 20);
        pl.assists = uniform(rng, 0, 15);
        players[k].push_back(pl);
      }
    }

    GameInstance game;
    for (int k = 0; k < 2; ++k) {
      game.records.push_back({teams[k].name, RType::kWins, teams[k].wins});
      game.records.push_back({teams[k].name, RType::kLosses, teams[k].losses});
      game.records.push_back({teams[k].name, RType::kPoints, teams[k].points});
    }
    for (int k = 0; k < 2; ++k) {
      for (const auto& pl : players[k]) {
        game.records.push_back({pl.name, RType::kPoints, pl.points});
        game.records.push_back({pl.name, RType::kRebounds, pl.rebounds});
        game.records.push_back({pl.name, RType::kAssists, pl.assists});
      }
    }
    game.linearized_src = linearize(game.records);

    const Team& W = teams[winner];
    const Team& L = teams[1 - winner];
    const std::string& day = kDays[draw(rng, kDays.size())];
    std::ostringstream s;
    switch (draw(rng, 3)) {
      case 0:
        s << "the " << W.name << " ( " << W.wins << " - " << W.losses << " ) defeated the " << L.name << " ( "
          << L.wins << " - " << L.losses << " ) on " << day << " .";
        break;
      case 1:
        s << "the " << W.name << " scored " << W.points << " points to beat the " << L.name << " , who scored "
          << L.points << " on " << day << " .";
        break;
      default:
        s << "the " << L.name << " ( " << L.wins << " - " << L.losses << " ) fell to the " << W.name << " ( "
          << W.wins << " - " << W.losses << " ) on " << day << " .";
        break;
    }
    std::vector<const Player*> all;
    for (int k = 0; k < 2; ++k)
      for (const auto& pl : players[k]) all.push_back(&pl);
    shuffle(all, rng);
    const std::size_t mentioned = std::min<std::size_t>(all.size(), 2 + draw(rng, 3));
    for (std::size_t i = 0; i < mentioned; ++i) s << ' ' << player_sentence(*all[i], draw(rng, 5));
    if (draw(rng, 2) == 0) {
      std::size_t next = draw(rng, kTeams.size());
      while (kTeams[next] == W.name || kTeams[next] == L.name) next = draw(rng, kTeams.size());
      s << " the " << L.name << " will host the " << kTeams[next] << " on " << kDays[draw(rng, kDays.size())]
        << " .";
    }
    game.summary = s.str();
    games.push_back(std::move(game));
  }
  return games;
}

std::vector<ExtractedRelation> extract_relations_at(const TokenList& text, const std::vector<Record>& records) {
  std::map<std::string, std::vector<const Record*>> by_entity;
  for (const auto& r : records) by_entity[r.entity].push_back(&r);
  std::vector<ExtractedRelation> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto ent = by_entity.find(text[i]);
    if (ent == by_entity.end()) continue;
    for (std::size_t j = i + 1; j < text.size() && j <= i + 8; ++j) {
      if (by_entity.count(text[j])) break;
      if (!is_number(text[j]) || text[j].size() > 9) continue;
      const int value = std::stoi(text[j]);
      RType best = RType::kUnmatched;
      for (const Record* r : ent->second)
        if (r->value == value && r->type < best) best = r->type;
      out.push_back({{text[i], best, value}, j});
    }
  }
  return out;
}

std::vector<Relation> extract_relations(const TokenList& text, const std::vector<Record>& records) {
  std::vector<Relation> out;
  for (auto& e : extract_relations_at(text, records)) out.push_back(std::move(e.relation));
  return out;
}

bool relation_in_records(const Relation& r, const std::vector<Record>& records) {
  if (r.type == RType::kUnmatched) return false;
  return std::any_of(records.begin(), records.end(), [&](const Record& rec) {
    return rec.entity == r.entity && rec.type == r.type && rec.value == r.value;
  });
}

RGScore rg_metrics(const std::vector<Relation>& hyp, const std::vector<Record>& records) {
  RGScore s;
  if (hyp.empty()) return s;
  std::set<Relation> unique;
  std::size_t correct = 0;
  for (const auto& r : hyp) {
    if (!relation_in_records(r, records)) continue;
    ++correct;
    unique.insert(r);
  }
  s.precision_pct = 100.0 * static_cast<double>(correct) / static_cast<double>(hyp.size());
  s.unique_count = unique.size();
  return s;
}

CSCOScore cs_co_metrics(const std::vector<Relation>& hyp, const std::vector<Relation>& gold) {
  CSCOScore s;
  const std::set<Relation> h(hyp.begin(), hyp.end()), g(gold.begin(), gold.end());
  std::size_t both = 0;
  for (const auto& r : h) both += g.count(r);
  if (h.empty() && g.empty()) {
    s.cs_precision = s.cs_recall = 100.0;
  } else {
    s.cs_precision = h.empty() ? 0.0 : 100.0 * static_cast<double>(both) / static_cast<double>(h.size());
    s.cs_recall = g.empty() ? 0.0 : 100.0 * static_cast<double>(both) / static_cast<double>(g.size());
  }
  // Ordering is compared on first occurrences.
  auto dedupe = [](const std::vector<Relation>& v) {
    std::vector<Relation> out;
    std::set<Relation> seen;
    for (const auto& r : v)
      if (seen.insert(r).second) out.push_back(r);
    return out;
  };
  s.co_similarity = dld_similarity(dedupe(hyp), dedupe(gold));
  return s;
}

D2TCorpusScores score_d2t_corpus(std::span<const GameInstance> games, std::span<const TokenList> texts,
                                 std::span<const std::vector<double>> p_copy_traces) {
  if (texts.size() != games.size()) throw ContractError("score_d2t_corpus: one text per game required");
  if (!p_copy_traces.empty() && p_copy_traces.size() != games.size())
    throw ContractError("score_d2t_corpus: one trace per game required");
  D2TCorpusScores out;
  out.examples = games.size();
  std::size_t extracted = 0, correct = 0;
  std::vector<double> bucket_p;
  std::vector<char> bucket_ok;
  for (std::size_t i = 0; i < games.size(); ++i) {
    const auto& recs = games[i].records;
    const auto found = extract_relations_at(texts[i], recs);
    std::vector<Relation> hyp;
    for (const auto& e : found) hyp.push_back(e.relation);
    const auto gold = extract_relations(tokenize(games[i].summary), recs);
    for (const auto& r : hyp) correct += relation_in_records(r, recs) ? 1 : 0;
    extracted += hyp.size();
    out.rg_count += static_cast<double>(rg_metrics(hyp, recs).unique_count);
    const CSCOScore cs = cs_co_metrics(hyp, gold);
    out.cs_precision += cs.cs_precision;
    out.cs_recall += cs.cs_recall;
    out.co += cs.co_similarity;
    if (p_copy_traces.empty()) continue;
    const auto& trace = p_copy_traces[i];
    if (trace.size() < texts[i].size()) throw ContractError("score_d2t_corpus: trace shorter than text");
    for (std::size_t t = 0; t < texts[i].size(); ++t) {
      if (!is_number(texts[i][t])) continue;
      bool ok = false;
      for (const auto& e : found) ok = ok || (e.token_index == t && relation_in_records(e.relation, recs));
      bucket_p.push_back(trace[t]);
      bucket_ok.push_back(ok ? 1 : 0);
    }
  }
  if (extracted > 0) out.rg_precision = 100.0 * static_cast<double>(correct) / static_cast<double>(extracted);
  if (!games.empty()) {
    const double n = static_cast<double>(games.size());
    out.rg_count /= n;
    out.cs_precision /= n;
    out.cs_recall /= n;
    out.co /= n;
  }
  out.buckets = bucket_precision_by_pcopy(bucket_p, bucket_ok);
  return out;
}

GameSplit split_games(std::vector<GameInstance> games, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  shuffle(games, rng);
  const std::size_t n = games.size();
  const std::size_t n_train = n * 8 / 10, n_valid = n / 10;
  GameSplit s;
  auto it = std::make_move_iterator(games.begin());
  s.train.assign(it, it + static_cast<long>(n_train));
  s.valid.assign(it + static_cast<long>(n_train), it + static_cast<long>(n_train + n_valid));
  s.test.assign(it + static_cast<long>(n_train + n_valid), std::make_move_iterator(games.end()));
  return s;
}

void write_games_jsonl(const std::string& path, std::span<const GameInstance> games) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& g : games) {
    nlohmann::json j;
    j["records"] = nlohmann::json::array();
    for (const auto& r : g.records) j["records"].push_back({{"entity", r.entity}, {"type", to_string(r.type)}, {"value", r.value}});
    j["summary"] = g.summary;
    out << j.dump() << '\n';
  }
}

std::vector<GameInstance> read_games_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<GameInstance> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GameInstance g;
      for (const auto& r : j.at("records")) {
        g.records.push_back({r.at("entity").get<std::string>(), parse_rtype(r.at("type").get<std::string>()),
                             r.at("value").get<int>()});
      }
      g.summary = j.at("summary").get<std::string>();
      g.linearized_src = linearize(g.records);
      out.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what(), no);
    } catch (const FormatError& e) {
      throw ParseError(path + ": " + e.what(), no);
    }
  }
  return out;
}

void write_pairs_jsonl(const std::string& path, std::span<const GameInstance> games) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& g : games) out << nlohmann::json{{"src", g.linearized_src}, {"tgt", g.summary}}.dump() << '\n';
}

}  // namespace copyforge
