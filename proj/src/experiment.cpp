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

#include "copyforge/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "copyforge/checkpoint.hpp"
#include "copyforge/errors.hpp"

namespace copyforge {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw ContractError("bad integer for " + key + ": '" + text + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size() || !std::isfinite(v))
    throw ContractError("bad number for " + key + ": '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ContractError("bad boolean for " + key + ": '" + text + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define CF_SIZE(name, expr)                                                                      \
  {                                                                                              \
    name, Field {                                                                                \
      [](const RunConfig& c) { return std::to_string(c.expr); },                                 \
          [](RunConfig& c, const std::string& v) { c.expr = parse_size(name, v); }               \
    }                                                                                            \
  }
#define CF_DOUBLE(name, expr)                                                                    \
  {                                                                                              \
    name, Field {                                                                                \
      [](const RunConfig& c) { return format_double(c.expr); },                                  \
          [](RunConfig& c, const std::string& v) { c.expr = parse_double(name, v); }             \
    }                                                                                            \
  }
#define CF_BOOL(name, expr)                                                                      \
  {                                                                                              \
    name, Field {                                                                                \
      [](const RunConfig& c) { return std::string(c.expr ? "true" : "false"); },                 \
          [](RunConfig& c, const std::string& v) { c.expr = parse_bool(name, v); }               \
    }                                                                                            \
  }
#define CF_STRING(name, expr)                                                                    \
  {                                                                                              \
    name, Field {                                                                                \
      [](const RunConfig& c) { return c.expr; }, [](RunConfig& c, const std::string& v) { c.expr = v; } \
    }                                                                                            \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      CF_SIZE("seed", seed),
      CF_SIZE("emb_dim", model.emb_dim),
      CF_SIZE("hidden_dim", model.hidden_dim),
      CF_SIZE("enc_layers", model.enc_layers),
      CF_SIZE("enc_heads", model.enc_heads),
      CF_SIZE("enc_ff_dim", model.enc_ff_dim),
      CF_SIZE("max_src_len", model.max_src_len),
      CF_SIZE("max_tgt_len", model.max_tgt_len),
      CF_SIZE("vocab_size", vocab_size),
      CF_SIZE("min_freq", min_freq),
      {"mode", Field{[](const RunConfig& c) { return to_string(c.train.mode); },
                     [](RunConfig& c, const std::string& v) { c.train.mode = parse_copy_mode(v); }}},
      CF_DOUBLE("lr", train.lr),
      CF_DOUBLE("weight_decay", train.weight_decay),
      CF_DOUBLE("beta1", train.beta1),
      CF_DOUBLE("beta2", train.beta2),
      CF_DOUBLE("adam_eps", train.adam_eps),
      CF_SIZE("batch_size", train.batch_size),
      CF_SIZE("epochs", train.epochs),
      CF_DOUBLE("grad_clip_norm", train.grad_clip_norm),
      CF_SIZE("eval_every", train.eval_every),
      CF_SIZE("patience", train.patience),
      CF_SIZE("max_steps", train.max_steps),
      CF_BOOL("resume", train.resume),
      CF_DOUBLE("w_vocab", train.weights.vocab),
      CF_DOUBLE("w_attn", train.weights.attn),
      CF_DOUBLE("w_pgen", train.weights.pgen),
      CF_SIZE("beam", decode.beam_size),
      CF_SIZE("max_len", decode.max_len),
      CF_SIZE("block_ngram", decode.block_ngram),
      CF_BOOL("length_norm", decode.length_norm),
      CF_STRING("train_path", train_path),
      CF_STRING("valid_path", valid_path),
      CF_STRING("test_path", test_path),
      CF_STRING("run_dir", run_dir),
  };
  return table;
}

#undef CF_SIZE
#undef CF_DOUBLE
#undef CF_BOOL
#undef CF_STRING

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  throw ContractError("unknown config key '" + key + "'");
}

std::string csv_cell(const nlohmann::json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::vector<EncodedExample> encode_all(std::span<const TextPair> pairs, const Vocabulary& vocab) {
  std::vector<EncodedExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(encode_example(p.src, p.tgt, vocab));
  return out;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

void RunConfig::apply_text(std::string_view text) {
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    try {
      set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    apply_text(buf.str());
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + "=" + f.get(*this) + "\n";
  return out;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_text();
}

ModelConfig RunConfig::resolved_model(std::size_t actual_vocab) const {
  ModelConfig m = model;
  m.vocab_size = actual_vocab;
  m.seed = seed;
  return m;
}

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = seed;
  t.checkpoint_dir = run_dir;
  return t;
}

void RunConfig::validate() const {
  resolved_model(kNumSpecials + 1).validate();
  resolved_train().validate();
  decode.validate();
  if (vocab_size < kNumSpecials + 1) throw ContractError("vocab_size must be at least 5");
  if (min_freq == 0) throw ContractError("min_freq must be positive");
}

void write_table(const std::string& stem, const Table& table) {
  std::ofstream csv(stem + ".csv");
  if (!csv) throw Error("cannot write " + stem + ".csv");
  for (std::size_t i = 0; i < table.columns.size(); ++i) csv << (i ? "," : "") << table.columns[i];
  csv << '\n';
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw ContractError("write_table: row width mismatch");
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      csv << (i ? "," : "") << csv_cell(row[i]);
      obj[table.columns[i]] = row[i];
    }
    csv << '\n';
    rows.push_back(std::move(obj));
  }
  std::ofstream js(stem + ".json");
  if (!js) throw Error("cannot write " + stem + ".json");
  js << nlohmann::json{{"columns", table.columns}, {"rows", rows}}.dump(2) << '\n';
}

Table read_table_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  Table t;
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& obj : j.at("rows")) {
    std::vector<nlohmann::json> row;
    for (const auto& c : t.columns) row.push_back(obj.value(c, nlohmann::json()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Vocabulary build_run_vocab(std::span<const TextPair> train, std::size_t vocab_size, std::size_t min_freq) {
  std::vector<TokenList> corpus;
  corpus.reserve(2 * train.size());
  for (const auto& p : train) {
    corpus.push_back(tokenize(p.src));
    corpus.push_back(tokenize(p.tgt));
  }
  return build_vocab(corpus, vocab_size, min_freq);
}

TrainResult run_training(const RunConfig& config, const StepCallback& on_step) {
  config.validate();
  if (config.train_path.empty()) throw ContractError("train_path is not set");
  const auto train_pairs = read_pairs(config.train_path);
  const auto valid_pairs = config.valid_path.empty() ? std::vector<TextPair>{} : read_pairs(config.valid_path);
  fs::create_directories(config.run_dir);
  const fs::path dir(config.run_dir);

  Vocabulary vocab;
  if (config.train.resume) {
    vocab = Vocabulary::load((dir / "vocab.txt").string());
  } else {
    vocab = build_run_vocab(train_pairs, config.vocab_size, config.min_freq);
    vocab.save((dir / "vocab.txt").string());
  }
  config.save((dir / "config.cfg").string());

  const auto train_set = encode_all(train_pairs, vocab);
  const auto valid_set = encode_all(valid_pairs, vocab);
  ModelParameters params = init_params(config.resolved_model(vocab.size()));
  TrainResult result = train(std::move(params), config.resolved_train(), train_set, valid_set, on_step);

  Table history{{"step", "loss_total", "loss_vocab", "loss_attn", "loss_pgen", "val_loss", "avg_p_copy"}, {}};
  for (const auto& r : result.history) {
    history.rows.push_back({r.step, r.loss_total, r.loss_vocab, r.loss_attn, r.loss_pgen,
                            std::isnan(r.val_loss) ? nlohmann::json() : nlohmann::json(r.val_loss), r.avg_p_copy});
  }
  write_table((dir / "history").string(), history);
  return result;
}

LoadedRun load_run(const std::string& run_dir, const std::string& checkpoint) {
  const fs::path dir(run_dir);
  LoadedRun run;
  run.config.apply_file((dir / "config.cfg").string());
  run.vocab = Vocabulary::load((dir / "vocab.txt").string());
  run.params = init_params(run.config.resolved_model(run.vocab.size()));
  load_checkpoint((dir / checkpoint).string(), run.params);
  return run;
}

Table scores_table(const CorpusScores& s) {
  return Table{{"rouge1_f", "rouge2_f", "rougeL_f", "copy_precision", "nn1", "nn2", "nn3", "nn4", "avg_p_copy"},
               {{s.rouge1_f, s.rouge2_f, s.rougeL_f, s.copy_precision, s.nn[0], s.nn[1], s.nn[2], s.nn[3],
                 s.avg_p_copy}}};
}

D2TEvaluation evaluate_d2t(const std::string& games_path, const std::string& generations_path) {
  const auto games = read_games_jsonl(games_path);
  const auto gens = read_generations(generations_path);
  if (games.size() != gens.size())
    throw ContractError("evaluate_d2t: " + std::to_string(games.size()) + " games but " +
                        std::to_string(gens.size()) + " generations");
  std::vector<TokenList> hyps, golds;
  std::vector<std::vector<double>> traces;
  bool have_traces = true;
  for (std::size_t i = 0; i < games.size(); ++i) {
    hyps.push_back(gens[i].hyp);
    golds.push_back(tokenize(games[i].summary));
    traces.push_back(gens[i].p_copy_trace);
    have_traces = have_traces && !gens[i].p_copy_trace.empty();
  }
  D2TEvaluation out;
  out.hyp = score_d2t_corpus(games, hyps, have_traces ? std::span<const std::vector<double>>(traces)
                                                      : std::span<const std::vector<double>>());
  out.gold = score_d2t_corpus(games, golds);
  return out;
}

Table d2t_table(const D2TEvaluation& eval) {
  Table t{{"system", "rg_precision", "rg_count", "cs_precision", "cs_recall", "co", "copy_precision", "copy_share",
           "gen_precision", "gen_share"},
          {}};
  auto row = [](const std::string& name, const D2TCorpusScores& s, bool buckets) {
    std::vector<nlohmann::json> r{name, s.rg_precision, s.rg_count, s.cs_precision, s.cs_recall, s.co};
    if (buckets && s.buckets.total > 0) {
      r.insert(r.end(), {optional_json(s.buckets.copy.precision), s.buckets.copy.share,
                         optional_json(s.buckets.gen.precision), s.buckets.gen.share});
    } else {
      r.insert(r.end(), {nullptr, nullptr, nullptr, nullptr});
    }
    return r;
  };
  t.rows.push_back(row("hyp", eval.hyp, true));
  t.rows.push_back(row("gold", eval.gold, false));
  return t;
}

Table consolidate_runs(const std::string& runs_dir) {
  static const std::vector<std::string> score_cols{"rouge1_f", "rouge2_f", "rougeL_f", "copy_precision", "nn1",
                                                   "nn2", "nn3", "nn4", "avg_p_copy"};
  static const std::vector<std::string> d2t_cols{"rg_precision", "rg_count", "cs_precision", "cs_recall", "co",
                                                 "copy_precision", "copy_share", "gen_precision", "gen_share"};
  Table out;
  out.columns = {"run", "mode", "vocab_size"};
  out.columns.insert(out.columns.end(), score_cols.begin(), score_cols.end());
  for (const auto& c : d2t_cols) out.columns.push_back("d2t_" + c);

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "config.cfg")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  auto lookup = [](const fs::path& path, const std::string& system, const std::string& col) -> nlohmann::json {
    if (!fs::exists(path)) return nullptr;
    const Table t = read_table_json(path.string());
    const auto it = std::find(t.columns.begin(), t.columns.end(), col);
    if (it == t.columns.end()) return nullptr;
    const auto idx = static_cast<std::size_t>(it - t.columns.begin());
    for (const auto& r : t.rows) {
      if (system.empty() || (!r.empty() && r[0] == system)) return r[idx];
    }
    return nullptr;
  };

  for (const auto& dir : dirs) {
    RunConfig cfg;
    cfg.apply_file((dir / "config.cfg").string());
    std::vector<nlohmann::json> row{dir.filename().string(), to_string(cfg.train.mode)};
    row.push_back(fs::exists(dir / "vocab.txt")
                      ? nlohmann::json(Vocabulary::load((dir / "vocab.txt").string()).size())
                      : nlohmann::json());
    for (const auto& c : score_cols) row.push_back(lookup(dir / "scores.json", "", c));
    for (const auto& c : d2t_cols) row.push_back(lookup(dir / "d2t_scores.json", "hyp", c));
    out.rows.push_back(std::move(row));
  }
  return out;
}

SweepReport vocab_sweep(const RunConfig& config, std::vector<std::size_t> sizes, const std::string& out_dir) {
  if (sizes.empty()) throw ContractError("vocab_sweep: no sizes");
  if (config.test_path.empty()) throw ContractError("vocab_sweep: test_path is not set");
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  SweepReport report;
  for (std::size_t size : sizes) {
    RunConfig cfg = config;
    cfg.train.mode = CopyMode::kForceCopyUnk;
    cfg.vocab_size = size;
    cfg.run_dir = (fs::path(out_dir) / ("v" + std::to_string(size))).string();
    run_training(cfg);
    LoadedRun run = load_run(cfg.run_dir);
    const std::string gen = (fs::path(cfg.run_dir) / "test.gen.jsonl").string();
    generate_file(run.params, run.vocab, cfg.test_path, gen, cfg.decode);
    SweepRow row;
    row.vocab_size = size;
    row.actual_vocab_size = run.vocab.size();
    row.scores = score_corpus(read_generations(gen));
    write_table((fs::path(cfg.run_dir) / "scores").string(), scores_table(row.scores));
    if (!report.rows.empty()) {
      const auto& prev = report.rows.back().scores;
      for (int n = 0; n < 4; ++n) report.nn_non_decreasing = report.nn_non_decreasing && row.scores.nn[n] >= prev.nn[n];
    }
    report.rows.push_back(row);
  }
  return report;
}

Table sweep_table(const SweepReport& report) {
  Table t{{"vocab_size", "actual_vocab_size", "rouge1_f", "rouge2_f", "rougeL_f", "nn1", "nn2", "nn3", "nn4",
           "nn_non_decreasing"},
          {}};
  for (const auto& r : report.rows) {
    const auto& s = r.scores;
    t.rows.push_back({r.vocab_size, r.actual_vocab_size, s.rouge1_f, s.rouge2_f, s.rougeL_f, s.nn[0], s.nn[1],
                      s.nn[2], s.nn[3], report.nn_non_decreasing});
  }
  return t;
}

GradCheckReport model_grad_check(std::uint64_t seed, CopyMode mode, std::size_t max_coords) {
  const Vocabulary vocab = Vocabulary::from_tokens({"a", "b", "c", "d"});
  ModelConfig config;
  config.emb_dim = 4;
  config.hidden_dim = 4;
  config.enc_layers = 1;
  config.enc_heads = 2;
  config.enc_ff_dim = 6;
  config.vocab_size = vocab.size();
  config.seed = seed;
  ModelParameters params = init_params(config);
  // One in-vocabulary candidate, one OOV candidate and one non-candidate.
  const EncodedExample ex = encode_example("a zeta b", "b zeta c", vocab);
  LossBuilder f = [&](Tape& tape) {
    auto steps = teacher_force(tape, ex, params, mode == CopyMode::kMixture);
    return sequence_loss(steps, ex, mode).total_node;
  };
  auto list = params.list();
  GradCheckOptions opts;
  opts.max_coords = max_coords;
  opts.seed = seed;
  return finite_diff_check(f, list, opts);
}

}  // namespace copyforge
