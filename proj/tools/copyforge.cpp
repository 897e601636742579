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

// copyforge: command-line driver for training, decoding and evaluation.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "copyforge/d2t.hpp"
#include "copyforge/errors.hpp"
#include "copyforge/experiment.hpp"
#include "copyforge/synth.hpp"

namespace fs = std::filesystem;
using namespace copyforge;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// --config plus one --<key> flag per RunConfig key. Later values win: the
// config file first, then flags in command-line order.
class ConfigOptions {
 public:
  explicit ConfigOptions(CLI::App* app) {
    app->add_option("--config", config_path_, "key=value config file");
    for (const auto& key : RunConfig::keys()) {
      CLI::Option* opt = app->add_option("--" + dashed(key))->description("config key " + key);
      if (key == "length_norm" || key == "resume") opt->expected(0, 1);
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      options_.emplace_back(key, opt);
    }
  }

  void apply(RunConfig& config) const {
    if (!config_path_.empty()) config.apply_file(config_path_);
    for (const auto& [key, opt] : options_) {
      if (opt->count() == 0) continue;
      const auto& results = opt->results();
      const std::string value = results.empty() || results.back().empty() ? "true" : results.back();
      config.set(key, value);
    }
  }

  bool given(const std::string& key) const {
    for (const auto& [k, opt] : options_)
      if (k == key) return opt->count() > 0;
    return false;
  }

 private:
  std::string config_path_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
};

std::size_t env_threads() {
  const char* env = std::getenv("COPYFORGE_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw UsageError("COPYFORGE_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

void print_table(const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) std::cout << (i ? "," : "") << t.columns[i];
  std::cout << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      std::cout << (i ? "," : "") << (row[i].is_null() ? "" : row[i].is_string() ? row[i].get<std::string>() : row[i].dump());
    std::cout << '\n';
  }
}

void write_kv(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

int cmd_train(const ConfigOptions& opts) {
  RunConfig config;
  opts.apply(config);
  config.train.threads = env_threads();
  TrainResult r = run_training(config, [](const HistoryRow& row) {
    if (row.step % 50 == 0 || !std::isnan(row.val_loss)) {
      std::cerr << "step " << row.step << " loss " << row.loss_total;
      if (!std::isnan(row.val_loss)) std::cerr << " val " << row.val_loss;
      std::cerr << '\n';
    }
  });
  std::cout << "run_dir " << config.run_dir << "\nsteps " << (r.history.empty() ? 0 : r.history.back().step)
            << "\nbest_step " << r.best_step << "\nbest_val " << r.best_val << '\n';
  return 0;
}

int cmd_generate(const ConfigOptions& opts, std::string input, std::string output, const std::string& checkpoint) {
  RunConfig request;
  opts.apply(request);
  LoadedRun run = load_run(request.run_dir, checkpoint);
  RunConfig config = run.config;
  opts.apply(config);
  if (config.resolved_model(run.vocab.size()).canonical() != run.params.config.canonical())
    throw ContractError("model keys differ from the trained run");
  config.decode.validate();
  if (input.empty()) input = config.test_path;
  if (input.empty()) throw UsageError("no --input and no test_path in the run config");
  if (output.empty()) output = (fs::path(config.run_dir) / "test.gen.jsonl").string();
  config.save(output + ".cfg");
  GenerationStats s = generate_file(run.params, run.vocab, input, output, config.decode);
  std::cout << "examples " << s.examples << "\navg_p_copy " << s.avg_p_copy << "\noutput " << output << '\n';
  return 0;
}

std::string default_stem(const std::string& generations, const std::string& name) {
  return (fs::path(generations).parent_path() / name).string();
}

int cmd_evaluate(const std::string& generations, std::string stem) {
  if (stem.empty()) stem = default_stem(generations, "scores");
  Table t = scores_table(score_corpus(read_generations(generations)));
  write_table(stem, t);
  print_table(t);
  return 0;
}

int cmd_d2t_gen(const D2TOptions& o, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  GameSplit split = split_games(generate_dataset(o), o.seed);
  for (const auto& [name, part] : {std::pair{"train", &split.train}, {"valid", &split.valid}, {"test", &split.test}}) {
    write_games_jsonl((dir / (std::string(name) + ".games.jsonl")).string(), *part);
    write_pairs_jsonl((dir / (std::string(name) + ".jsonl")).string(), *part);
  }
  write_kv((dir / "d2t-gen.cfg").string(), {{"seed", std::to_string(o.seed)},
                                            {"games", std::to_string(o.n_games)},
                                            {"name_pool", std::to_string(o.name_pool_size)},
                                            {"oov_frac", std::to_string(o.oov_name_fraction)},
                                            {"players", std::to_string(o.players_per_team)}});
  std::cout << "train " << split.train.size() << "\nvalid " << split.valid.size() << "\ntest " << split.test.size()
            << '\n';
  return 0;
}

struct SynthFlags {
  std::string profile = "summarization";
  std::uint64_t seed = 1;
  std::size_t examples = 0;
  double oov_frac = -1.0;
  double paraphrase_prob = -1.0;
  double generic_prob = -1.0;
  std::size_t noun_pool = 0;
  std::size_t name_pool = 0;
  double zipf = -1.0;
  std::string out = "synth";
};

int cmd_synth_gen(const SynthFlags& f) {
  const std::string& profile = f.profile;
  const std::string& out_dir = f.out;
  const std::uint64_t seed = f.seed;
  const std::size_t examples = f.examples;
  const double oov_frac = f.oov_frac;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  PairSplit split;
  if (profile == "summarization") {
    SummarizationOptions o;
    o.seed = seed;
    if (examples) o.n_examples = examples;
    if (oov_frac >= 0.0) o.oov_fraction = oov_frac;
    if (f.paraphrase_prob >= 0.0) o.paraphrase_prob = f.paraphrase_prob;
    if (f.generic_prob >= 0.0) o.generic_prob = f.generic_prob;
    if (f.noun_pool) o.noun_pool = f.noun_pool;
    if (f.name_pool) o.name_pool = f.name_pool;
    if (f.zipf >= 0.0) o.zipf_exponent = f.zipf;
    split = split_pairs(generate_summarization(o), seed);
  } else if (profile == "identity") {
    IdentityOptions o;
    if (examples) o.n_examples = examples;
    if (oov_frac >= 0.0) o.oov_fraction = oov_frac;
    std::uint64_t seeds[3];
    std::mt19937_64 mix(seed);
    for (auto& s : seeds) s = mix();
    const std::size_t n = o.n_examples;
    o.seed = seeds[0];
    split.train = generate_identity(o);
    o.seed = seeds[1];
    o.n_examples = std::max<std::size_t>(1, n / 4);
    split.valid = generate_identity(o);
    o.seed = seeds[2];
    o.n_examples = std::max<std::size_t>(1, n / 2);
    split.test = generate_identity(o);
  } else {
    throw UsageError("unknown profile '" + profile + "'");
  }
  write_pairs((dir / "train.jsonl").string(), split.train);
  write_pairs((dir / "valid.jsonl").string(), split.valid);
  write_pairs((dir / "test.jsonl").string(), split.test);
  std::cout << "train " << split.train.size() << "\nvalid " << split.valid.size() << "\ntest " << split.test.size()
            << '\n';
  return 0;
}

int cmd_d2t_eval(const std::string& games, const std::string& generations, std::string stem) {
  if (stem.empty()) stem = default_stem(generations, "d2t_scores");
  Table t = d2t_table(evaluate_d2t(games, generations));
  write_table(stem, t);
  print_table(t);
  return 0;
}

int cmd_grad_check(std::uint64_t seed, const std::string& mode, std::size_t coords) {
  std::vector<CopyMode> modes;
  if (mode == "all") {
    modes = {CopyMode::kMixture, CopyMode::kForceCopy, CopyMode::kForceCopyUnk};
  } else {
    modes = {parse_copy_mode(mode)};
  }
  bool ok = true;
  for (CopyMode m : modes) {
    GradCheckReport r = model_grad_check(seed, m, coords);
    ok = ok && r.passed;
    std::cout << to_string(m) << ' ' << (r.passed ? "PASS" : "FAIL") << " coords=" << r.entries.size()
              << " max_rel_error=" << r.max_rel_error << " tol=1e-4\n";
  }
  return ok ? 0 : 1;
}

int cmd_report(const std::string& runs) {
  Table t = consolidate_runs(runs);
  write_table((fs::path(runs) / "report").string(), t);
  print_table(t);
  return 0;
}

int cmd_vocab_sweep(const ConfigOptions& opts, const std::vector<std::size_t>& sizes, std::string out_dir) {
  RunConfig config;
  opts.apply(config);
  config.train.threads = env_threads();
  config.train.mode = CopyMode::kForceCopyUnk;
  if (out_dir.empty()) out_dir = config.run_dir;
  fs::create_directories(out_dir);
  config.save((fs::path(out_dir) / "vocab_sweep.cfg").string());
  SweepReport r = vocab_sweep(config, sizes, out_dir);
  Table t = sweep_table(r);
  write_table((fs::path(out_dir) / "vocab_sweep").string(), t);
  print_table(t);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"copyforge: copy-aware sequence-to-sequence training and evaluation"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model into run_dir");
  ConfigOptions train_opts(train);

  auto* generate = app.add_subcommand("generate", "decode a {src,tgt} JSONL file with a trained run");
  ConfigOptions gen_opts(generate);
  std::string gen_input, gen_output, gen_ckpt = "best.ckpt";
  generate->add_option("--input", gen_input, "input JSONL (default: test_path)");
  generate->add_option("--output", gen_output, "output JSONL (default: run_dir/test.gen.jsonl)");
  generate->add_option("--checkpoint", gen_ckpt, "checkpoint file inside run_dir")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "ROUGE, copy precision and novel n-grams of generations");
  std::string eval_gens, eval_out;
  evaluate->add_option("--generations", eval_gens, "generation JSONL")->required();
  evaluate->add_option("--output", eval_out, "report stem (default: <dir>/scores)");

  auto* d2t_gen = app.add_subcommand("d2t-gen", "generate the synthetic data-to-text task");
  D2TOptions d2t;
  std::string d2t_out = "d2t";
  d2t_gen->add_option("--seed", d2t.seed)->capture_default_str();
  d2t_gen->add_option("--games", d2t.n_games)->capture_default_str();
  d2t_gen->add_option("--oov-frac", d2t.oov_name_fraction)->capture_default_str();
  d2t_gen->add_option("--name-pool", d2t.name_pool_size)->capture_default_str();
  d2t_gen->add_option("--players", d2t.players_per_team, "players per team")->capture_default_str();
  d2t_gen->add_option("--out", d2t_out, "output directory")->capture_default_str();

  auto* synth_gen = app.add_subcommand("synth-gen", "generate a synthetic {src,tgt} profile");
  SynthFlags synth;
  synth_gen->add_option("--profile", synth.profile, "summarization or identity")->capture_default_str();
  synth_gen->add_option("--seed", synth.seed)->capture_default_str();
  synth_gen->add_option("--examples", synth.examples, "number of examples (default per profile)");
  synth_gen->add_option("--oov-frac", synth.oov_frac, "one-off word fraction (default per profile)");
  synth_gen->add_option("--paraphrase-prob", synth.paraphrase_prob, "summarization only");
  synth_gen->add_option("--generic-prob", synth.generic_prob, "summarization only");
  synth_gen->add_option("--noun-pool", synth.noun_pool, "summarization only");
  synth_gen->add_option("--name-pool", synth.name_pool, "summarization only");
  synth_gen->add_option("--zipf", synth.zipf, "noun Zipf exponent, summarization only");
  synth_gen->add_option("--out", synth.out, "output directory")->capture_default_str();

  auto* d2t_eval = app.add_subcommand("d2t-eval", "RG, CS and CO of generations against records");
  std::string de_games, de_gens, de_out;
  d2t_eval->add_option("--games", de_games, "games JSONL aligned with the generations")->required();
  d2t_eval->add_option("--generations", de_gens, "generation JSONL")->required();
  d2t_eval->add_option("--output", de_out, "report stem (default: <dir>/d2t_scores)");

  auto* grad = app.add_subcommand("grad-check", "finite-difference check of the full loss");
  std::uint64_t grad_seed = 7;
  std::string grad_mode = "all";
  std::size_t grad_coords = 250;
  grad->add_option("--seed", grad_seed)->capture_default_str();
  grad->add_option("--mode", grad_mode, "mixture, force_copy, force_copy_unk or all")->capture_default_str();
  grad->add_option("--coords", grad_coords, "coordinates sampled per mode")->capture_default_str();

  auto* report = app.add_subcommand("report", "consolidate the scores of several run directories");
  std::string runs;
  report->add_option("--runs", runs, "directory of run directories")->required();

  auto* sweep = app.add_subcommand("vocab-sweep", "train force_copy_unk at several vocabulary sizes");
  ConfigOptions sweep_opts(sweep);
  std::vector<std::size_t> sizes;
  std::string sweep_out;
  sweep->add_option("--sizes", sizes, "vocabulary sizes")->required()->delimiter(',');
  sweep->add_option("--out", sweep_out, "output directory (default: run_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(train_opts);
    if (*generate) return cmd_generate(gen_opts, gen_input, gen_output, gen_ckpt);
    if (*evaluate) return cmd_evaluate(eval_gens, eval_out);
    if (*d2t_gen) return cmd_d2t_gen(d2t, d2t_out);
    if (*synth_gen) return cmd_synth_gen(synth);
    if (*d2t_eval) return cmd_d2t_eval(de_games, de_gens, de_out);
    if (*grad) return cmd_grad_check(grad_seed, grad_mode, grad_coords);
    if (*report) return cmd_report(runs);
    if (*sweep) return cmd_vocab_sweep(sweep_opts, sizes, sweep_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
