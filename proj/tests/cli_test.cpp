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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "copyforge/experiment.hpp"

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(COPYFORGE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("copyforge_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("train --no-such-key 1"), 2);
  EXPECT_EQ(run("evaluate"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST(CliTest, DataErrorsExitOne) {
  const auto dir = fresh_dir("errors");
  EXPECT_EQ(run("train --run-dir " + (dir / "r").string()), 1);  // no train_path
  EXPECT_EQ(run("train --config " + (dir / "missing.cfg").string()), 1);
  EXPECT_EQ(run("train --lr fast --train-path x"), 1);
  std::ofstream(dir / "bad.cfg") << "lr=0.1\nnot_a_key=3\n";
  EXPECT_EQ(run("train --config " + (dir / "bad.cfg").string()), 1);
  EXPECT_EQ(run("evaluate --generations " + (dir / "none.jsonl").string()), 1);
}

TEST(CliTest, GradCheckPasses) { EXPECT_EQ(run("grad-check --seed 7"), 0); }

TEST(CliTest, D2TPipelineEndToEnd) {
  const auto dir = fresh_dir("d2t");
  const std::string data = (dir / "data").string();
  ASSERT_EQ(run("d2t-gen --seed 3 --games 30 --oov-frac 0.2 --out " + data), 0);
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "train.games.jsonl", "test.games.jsonl"})
    EXPECT_TRUE(fs::exists(fs::path(data) / f)) << f;
  const std::string runs = (dir / "runs").string();
  const std::string common = " --train-path " + data + "/train.jsonl --valid-path " + data +
                             "/valid.jsonl --test-path " + data +
                             "/test.jsonl --emb-dim 8 --hidden-dim 8 --enc-layers 1 --enc-ff-dim 8 --epochs 1"
                             " --min-freq 5 --max-len 20";
  ASSERT_EQ(run("train" + common + " --mode mixture --mode force_copy_unk --run-dir " + runs + "/fcu"), 0);
  copyforge::RunConfig resolved;
  resolved.apply_file(runs + "/fcu/config.cfg");
  EXPECT_EQ(resolved.train.mode, copyforge::CopyMode::kForceCopyUnk);  // later flag wins

  ASSERT_EQ(run("generate --run-dir " + runs + "/fcu --beam 2 --block-ngram 3 --length-norm"), 0);
  ASSERT_TRUE(fs::exists(runs + "/fcu/test.gen.jsonl.cfg"));
  copyforge::RunConfig gen_cfg;
  gen_cfg.apply_file(runs + "/fcu/test.gen.jsonl.cfg");
  EXPECT_EQ(gen_cfg.decode.beam_size, 2u);
  EXPECT_TRUE(gen_cfg.decode.length_norm);
  EXPECT_EQ(run("generate --run-dir " + runs + "/fcu --hidden-dim 16"), 1);  // model keys are fixed

  ASSERT_EQ(run("evaluate --generations " + runs + "/fcu/test.gen.jsonl"), 0);
  ASSERT_EQ(run("d2t-eval --games " + data + "/test.games.jsonl --generations " + runs + "/fcu/test.gen.jsonl"), 0);
  ASSERT_EQ(run("report --runs " + runs), 0);
  copyforge::Table t = copyforge::read_table_json(runs + "/report.json");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], "fcu");
  EXPECT_FALSE(t.rows[0][3].is_null());   // rouge1_f
  EXPECT_FALSE(t.rows[0][12].is_null());  // d2t_rg_precision
  EXPECT_TRUE(fs::exists(runs + "/report.csv"));
}

TEST(CliTest, SynthProfiles) {
  const auto dir = fresh_dir("synth");
  EXPECT_EQ(run("synth-gen --profile identity --examples 40 --out " + (dir / "id").string()), 0);
  EXPECT_EQ(run("synth-gen --profile summarization --examples 50 --out " + (dir / "sum").string()), 0);
  EXPECT_EQ(run("synth-gen --profile poetry --out " + (dir / "x").string()), 2);
  EXPECT_EQ(copyforge::read_pairs((dir / "id" / "train.jsonl").string()).size(), 40u);
  EXPECT_EQ(copyforge::read_pairs((dir / "sum" / "test.jsonl").string()).size(), 5u);
}

TEST(CliTest, ThreadsEnvironmentIsValidated) {
  EXPECT_EQ(std::system(("COPYFORGE_THREADS=zero " + std::string(COPYFORGE_CLI) +
                         " train --train-path x > /dev/null 2>&1; test $? -eq 2")
                            .c_str()),
            0);
}

}  // namespace
