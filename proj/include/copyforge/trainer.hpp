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

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copyforge/checkpoint.hpp"
#include "copyforge/losses.hpp"
#include "copyforge/model.hpp"

namespace copyforge {

struct TrainConfig {
  CopyMode mode = CopyMode::kForceCopy;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  double grad_clip_norm = 2.0;
  std::uint64_t seed = 1;
  std::string checkpoint_dir;  // empty: keep everything in memory
  std::size_t eval_every = 0;  // 0: once per epoch
  std::size_t patience = 3;    // evaluations without improvement; 0 disables
  std::size_t max_steps = 0;   // 0: no cap
  std::size_t threads = 1;
  bool resume = false;  // continue from checkpoint_dir/last.ckpt
  LossWeights weights;

  void validate() const;
};

struct EvalReport {
  double loss_total = 0.0;
  double loss_vocab = 0.0;
  double loss_attn = 0.0;
  double loss_pgen = 0.0;
  double nll_final = 0.0;  // -log of the output distribution at the targets, any mode
  double avg_p_gen = 0.0;
  double avg_p_copy = 0.0;
  std::size_t examples = 0;
  std::size_t timesteps = 0;
};

// Loss components are averaged per example; p_gen and p_copy over all
// timesteps of the set. Validation during training tracks nll_final.
EvalReport evaluate(ModelParameters& params, std::span<const EncodedExample> data, CopyMode mode,
                    const LossWeights& weights = {});

struct HistoryRow {
  std::uint64_t step = 0;
  double loss_total = 0.0;
  double loss_vocab = 0.0;
  double loss_attn = 0.0;
  double loss_pgen = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();  // nll_final; NaN when not evaluated
  double avg_p_copy = 0.0;                                     // over the batch
};

void write_history_csv(const std::string& path, std::span<const HistoryRow> rows);

struct TrainResult {
  ModelParameters best;  // parameters at the best validation loss
  ModelParameters last;
  OptimState optim;
  std::vector<HistoryRow> history;
  std::uint64_t best_step = 0;
  double best_val = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(std::span<Parameter* const> params, double max_norm);

// One AdamW update from the grads currently stored in params.
void adamw_update(std::span<Parameter* const> params, OptimState& state, const TrainConfig& config);

// Example order for one epoch; depends only on (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

// Mean loss of one batch and its grads, summed in example order. The result
// does not depend on config.threads.
struct BatchResult {
  double loss_total = 0.0;
  double loss_vocab = 0.0;
  double loss_attn = 0.0;
  double loss_pgen = 0.0;
  double avg_p_copy = 0.0;
};
BatchResult batch_gradient(ModelParameters& params, std::span<const EncodedExample* const> batch,
                           const TrainConfig& config);

using StepCallback = std::function<void(const HistoryRow&)>;

// Teacher-forced training. With checkpoint_dir set, best.ckpt and last.ckpt
// are written there after every evaluation and at the end.
TrainResult train(ModelParameters params, const TrainConfig& config, std::span<const EncodedExample> train_set,
                  std::span<const EncodedExample> valid_set, const StepCallback& on_step = {});

}  // namespace copyforge
