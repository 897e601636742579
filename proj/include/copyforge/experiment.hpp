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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "copyforge/autodiff.hpp"
#include "copyforge/d2t.hpp"
#include "copyforge/decode.hpp"
#include "copyforge/metrics.hpp"
#include "copyforge/model.hpp"
#include "copyforge/trainer.hpp"
#include "copyforge/vocab.hpp"

namespace copyforge {

// Everything a run needs, as flat key=value pairs. `seed` drives model
// initialization and data order; `vocab_size` caps the vocabulary including
// the special tokens.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  std::size_t vocab_size = 50000;
  std::size_t min_freq = 2;
  std::uint64_t seed = 1;
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string run_dir = "run";

  static const std::vector<std::string>& keys();

  // Throws ContractError for an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // Applies "key=value" lines in order. Blank lines and lines starting with
  // '#' are skipped. Errors carry the line number.
  void apply_text(std::string_view text);
  void apply_file(const std::string& path);

  // Every key in keys() order; apply_text(to_text()) reproduces *this.
  std::string to_text() const;
  void save(const std::string& path) const;

  // Model and trainer configs with the shared seed filled in.
  ModelConfig resolved_model(std::size_t actual_vocab) const;
  TrainConfig resolved_train() const;

  void validate() const;
};

// Report tables are written as <stem>.csv and <stem>.json (an array of row
// objects). Null cells are empty in the CSV.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

void write_table(const std::string& stem, const Table& table);
Table read_table_json(const std::string& path);

// Builds the vocabulary from training sources and targets.
Vocabulary build_run_vocab(std::span<const TextPair> train, std::size_t vocab_size, std::size_t min_freq);

// Trains into run_dir: config.cfg, vocab.txt, best.ckpt, last.ckpt and the
// history table.
TrainResult run_training(const RunConfig& config, const StepCallback& on_step = {});

struct LoadedRun {
  RunConfig config;
  Vocabulary vocab;
  ModelParameters params;
};

LoadedRun load_run(const std::string& run_dir, const std::string& checkpoint = "best.ckpt");

Table scores_table(const CorpusScores& scores);

// Corpus scores of generations against the data-to-text records, plus the
// gold summaries scored the same way.
struct D2TEvaluation {
  D2TCorpusScores hyp;
  D2TCorpusScores gold;
};
D2TEvaluation evaluate_d2t(const std::string& games_path, const std::string& generations_path);
Table d2t_table(const D2TEvaluation& eval);

// One row per run directory under `runs_dir` that holds a config.cfg.
Table consolidate_runs(const std::string& runs_dir);

struct SweepRow {
  std::size_t vocab_size = 0;          // requested cap
  std::size_t actual_vocab_size = 0;
  CorpusScores scores;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // ascending vocab_size
  bool nn_non_decreasing = true;
};

// Trains one force_copy_unk model per size under out_dir/v<size>, decodes
// config.test_path and scores it.
SweepReport vocab_sweep(const RunConfig& config, std::vector<std::size_t> sizes, const std::string& out_dir);
Table sweep_table(const SweepReport& report);

// Finite-difference check of the full sequence loss on a toy instance with
// three source and three target tokens.
GradCheckReport model_grad_check(std::uint64_t seed, CopyMode mode, std::size_t max_coords = 250);

}  // namespace copyforge
