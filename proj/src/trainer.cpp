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

#include "copyforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "copyforge/errors.hpp"

namespace copyforge {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ContractError("train config: lr must be >= 0");
  if (batch_size == 0) throw ContractError("train config: batch_size must be >= 1");
  if (!(grad_clip_norm > 0.0)) throw ContractError("train config: grad_clip_norm must be > 0");
  if (weight_decay < 0.0) throw ContractError("train config: weight_decay must be >= 0");
  if (threads == 0) throw ContractError("train config: threads must be >= 1");
}

namespace {

struct ExampleResult {
  LossBreakdown loss;
  double p_copy_sum = 0.0;
  double nll_final = 0.0;  // filled only without backward
  std::size_t steps = 0;
};

ExampleResult forward_example(ModelParameters& params, const EncodedExample& ex, CopyMode mode,
                              const LossWeights& weights, bool backward) {
  Tape tape;
  auto steps = teacher_force(tape, ex, params, mode == CopyMode::kMixture || !backward);
  ExampleResult r;
  r.loss = sequence_loss(steps, ex, mode, weights);
  if (!backward) {
    for (std::size_t t = 0; t < steps.size(); ++t) r.nll_final += mixture_nll(steps[t], ex.tgt_ext_ids[t + 1]).item();
  }
  for (const auto& s : steps) r.p_copy_sum += 1.0 - s.p_gen.item();
  r.steps = steps.size();
  if (backward) tape.backward(r.loss.total_node);
  r.loss.total_node = Tensor();
  return r;
}

void copy_values(const ModelParameters& from, ModelParameters& to) {
  auto src = from.list();
  auto dst = to.list();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

EvalReport evaluate(ModelParameters& params, std::span<const EncodedExample> data, CopyMode mode,
                    const LossWeights& weights) {
  EvalReport r;
  double p_copy = 0.0;
  for (const auto& ex : data) {
    ExampleResult e = forward_example(params, ex, mode, weights, false);
    r.loss_total += e.loss.total;
    r.loss_vocab += e.loss.loss_vocab;
    r.loss_attn += e.loss.loss_attn;
    r.loss_pgen += e.loss.loss_pgen;
    r.nll_final += e.nll_final;
    p_copy += e.p_copy_sum;
    r.timesteps += e.steps;
  }
  r.examples = data.size();
  if (r.examples > 0) {
    const double inv = 1.0 / static_cast<double>(r.examples);
    r.loss_total *= inv;
    r.loss_vocab *= inv;
    r.loss_attn *= inv;
    r.loss_pgen *= inv;
    r.nll_final *= inv;
  }
  if (r.timesteps > 0) {
    r.avg_p_copy = p_copy / static_cast<double>(r.timesteps);
    r.avg_p_gen = 1.0 - r.avg_p_copy;
  }
  return r;
}

void write_history_csv(const std::string& path, std::span<const HistoryRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "step,loss_total,loss_vocab,loss_attn,loss_pgen,val_loss,avg_p_copy\n";
  for (const auto& r : rows) {
    out << r.step << ',' << fmt(r.loss_total) << ',' << fmt(r.loss_vocab) << ',' << fmt(r.loss_attn) << ','
        << fmt(r.loss_pgen) << ',' << fmt(r.val_loss) << ',' << fmt(r.avg_p_copy) << '\n';
  }
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad) g *= k;
  }
  return norm;
}

void adamw_update(std::span<Parameter* const> params, OptimState& state, const TrainConfig& config) {
  if (state.m.size() != params.size()) throw ContractError("optimizer state does not match the parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    const double decay = p.decay ? config.weight_decay : 0.0;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      const double step = (m[j] / c1) / (std::sqrt(v[j] / c2) + config.adam_eps);
      p.value[j] -= config.lr * (step + decay * p.value[j]);
    }
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  // Fisher-Yates with an explicit draw so the order is the same on every
  // standard library.
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

BatchResult batch_gradient(ModelParameters& params, std::span<const EncodedExample* const> batch,
                           const TrainConfig& config) {
  auto list = params.list();
  const std::size_t B = batch.size();
  if (B == 0) throw ContractError("empty batch");
  std::vector<ExampleResult> results(B);
  std::vector<std::vector<std::vector<double>>> grads(B);

  auto run = [&](ModelParameters& local, std::size_t e) {
    local.zero_grad();
    results[e] = forward_example(local, *batch[e], config.mode, config.weights, true);
    for (const Parameter* p : local.list()) grads[e].push_back(p->grad);
  };

  const std::size_t workers = std::min(config.threads, B);
  std::vector<std::string> errors(workers);
  if (workers <= 1) {
    for (std::size_t e = 0; e < B; ++e) run(params, e);
  } else {
    std::vector<ModelParameters> clones(workers, params);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t e = w; e < B; e += workers) run(clones[w], e);
        } catch (const std::exception& ex) {
          errors[w] = ex.what();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
      if (!err.empty()) throw NumericError(err);
  }

  BatchResult out;
  std::size_t steps = 0;
  for (std::size_t i = 0; i < list.size(); ++i) std::fill(list[i]->grad.begin(), list[i]->grad.end(), 0.0);
  for (std::size_t e = 0; e < B; ++e) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto& g = list[i]->grad;
      const auto& ge = grads[e][i];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += ge[j];
    }
    out.loss_total += results[e].loss.total;
    out.loss_vocab += results[e].loss.loss_vocab;
    out.loss_attn += results[e].loss.loss_attn;
    out.loss_pgen += results[e].loss.loss_pgen;
    out.avg_p_copy += results[e].p_copy_sum;
    steps += results[e].steps;
  }
  const double inv = 1.0 / static_cast<double>(B);
  for (Parameter* p : list)
    for (double& g : p->grad) g *= inv;
  out.loss_total *= inv;
  out.loss_vocab *= inv;
  out.loss_attn *= inv;
  out.loss_pgen *= inv;
  out.avg_p_copy /= static_cast<double>(steps);
  return out;
}

TrainResult train(ModelParameters params, const TrainConfig& config, std::span<const EncodedExample> train_set,
                  std::span<const EncodedExample> valid_set, const StepCallback& on_step) {
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  for (const auto& ex : train_set) {
    if (ex.vocab_size != params.config.vocab_size) {
      throw ContractError("train: example encoded with a different vocabulary size");
    }
  }

  namespace fs = std::filesystem;
  const bool persist = !config.checkpoint_dir.empty();
  const std::string last_path = persist ? (fs::path(config.checkpoint_dir) / "last.ckpt").string() : "";
  const std::string best_path = persist ? (fs::path(config.checkpoint_dir) / "best.ckpt").string() : "";
  if (persist) fs::create_directories(config.checkpoint_dir);

  TrainResult result{params, params, OptimState::zeros_like(params), {}, 0,
                     std::numeric_limits<double>::infinity(), false};
  std::size_t bad_evals = 0;
  if (config.resume) {
    if (!persist) throw ContractError("train: resume needs checkpoint_dir");
    LoadedCheckpoint ck = load_checkpoint(last_path, params, &result.optim);
    auto it = ck.extra.find("trainer.state");
    if (it == ck.extra.end() || it->second.size() != 4) throw FormatError("last.ckpt has no trainer state");
    result.best_val = it->second[0];
    bad_evals = static_cast<std::size_t>(it->second[1]);
    result.best_step = static_cast<std::uint64_t>(it->second[2]);
    result.stopped_early = it->second[3] != 0.0;
    if (fs::exists(best_path)) load_checkpoint(best_path, result.best);
  }

  auto list = params.list();
  const std::size_t n = train_set.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  std::uint64_t total_steps = static_cast<std::uint64_t>(per_epoch) * config.epochs;
  if (config.max_steps > 0) total_steps = std::min<std::uint64_t>(total_steps, config.max_steps);

  auto save_last = [&] {
    if (!persist) return;
    NamedVectors extra{{"trainer.state",
                        {result.best_val, static_cast<double>(bad_evals), static_cast<double>(result.best_step),
                         result.stopped_early ? 1.0 : 0.0}}};
    save_checkpoint(last_path, params, &result.optim, extra);
  };

  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::size_t> order;
  std::vector<const EncodedExample*> batch;
  while (result.optim.step < total_steps && !result.stopped_early) {
    const std::uint64_t step = result.optim.step;
    const std::uint64_t epoch = step / per_epoch;
    const std::size_t pos = static_cast<std::size_t>(step % per_epoch);
    if (epoch != cached_epoch) {
      order = epoch_order(n, config.seed, epoch);
      cached_epoch = epoch;
    }
    batch.clear();
    for (std::size_t i = pos * config.batch_size; i < std::min(n, (pos + 1) * config.batch_size); ++i) {
      batch.push_back(&train_set[order[i]]);
    }

    BatchResult br;
    try {
      br = batch_gradient(params, batch, config);
    } catch (const NumericError& e) {
      throw NumericError("training step " + std::to_string(step + 1) + ": " + e.what());
    }
    if (!std::isfinite(br.loss_total)) {
      std::ostringstream msg;
      msg << "non-finite loss at training step " << step + 1 << " (vocab " << br.loss_vocab << ", attn "
          << br.loss_attn << ", pgen " << br.loss_pgen << ")";
      throw NumericError(msg.str());
    }
    clip_global_norm(list, config.grad_clip_norm);
    adamw_update(list, result.optim, config);

    HistoryRow row;
    row.step = result.optim.step;
    row.loss_total = br.loss_total;
    row.loss_vocab = br.loss_vocab;
    row.loss_attn = br.loss_attn;
    row.loss_pgen = br.loss_pgen;
    row.avg_p_copy = br.avg_p_copy;

    const bool epoch_end = pos + 1 == per_epoch;
    const bool due = config.eval_every > 0 ? row.step % config.eval_every == 0 : epoch_end;
    const bool last = row.step == total_steps;
    if (!valid_set.empty() && (due || last)) {
      row.val_loss = evaluate(params, valid_set, config.mode, config.weights).nll_final;
      if (row.val_loss < result.best_val) {
        result.best_val = row.val_loss;
        result.best_step = row.step;
        copy_values(params, result.best);
        bad_evals = 0;
        if (persist) save_checkpoint(best_path, result.best);
      } else if (config.patience > 0 && ++bad_evals >= config.patience) {
        result.stopped_early = true;
      }
      save_last();
    } else if (last) {
      save_last();
    }
    result.history.push_back(row);
    if (on_step) on_step(row);
  }

  if (valid_set.empty()) {
    copy_values(params, result.best);
    result.best_step = result.optim.step;
    if (persist) save_checkpoint(best_path, result.best);
  }
  copy_values(params, result.last);
  return result;
}

}  // namespace copyforge
