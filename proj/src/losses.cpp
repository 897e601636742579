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

#include "copyforge/losses.hpp"

#include "copyforge/errors.hpp"

namespace copyforge {

std::string to_string(CopyMode mode) {
  switch (mode) {
    case CopyMode::kMixture: return "mixture";
    case CopyMode::kForceCopy: return "force_copy";
    case CopyMode::kForceCopyUnk: return "force_copy_unk";
  }
  return "?";
}

CopyMode parse_copy_mode(const std::string& text) {
  if (text == "mixture") return CopyMode::kMixture;
  if (text == "force_copy") return CopyMode::kForceCopy;
  if (text == "force_copy_unk") return CopyMode::kForceCopyUnk;
  throw ContractError("unknown copy mode '" + text + "'");
}

namespace {

Tensor nll_at(const Tensor& dist, int id, const char* what) {
  if (!dist.valid()) throw ContractError(std::string(what) + ": distribution was not computed");
  if (id < 0 || static_cast<std::size_t>(id) >= dist.cols()) {
    throw IndexError(std::string(what) + ": id " + std::to_string(id) + " out of range");
  }
  return neg(log(pick(dist, 0, static_cast<std::size_t>(id))));
}

}  // namespace

Tensor mixture_nll(const StepOutput& step, int tgt_ext_id) { return nll_at(step.p_final, tgt_ext_id, "mixture_nll"); }

Tensor loss_vocab(const StepOutput& step, int tgt_id) { return nll_at(step.p_vocab, tgt_id, "loss_vocab"); }

Tensor loss_attn(const StepOutput& step, const EncodedExample& example, std::size_t t) {
  Tape& tape = *step.alpha.tape();
  if (!example.step_is_copy_candidate(t)) return tape.zeros({1, 1});
  const std::string& target = example.tgt_tokens[t];
  std::vector<int> slot(example.src_tokens.size());
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] = example.src_tokens[i] == target ? 1 : 0;
  Tensor mass = pick(scatter_sum(step.alpha, slot, 2), 0, 1);
  return neg(log(mass));
}

SwitchBranch switch_branch(const EncodedExample& example, std::size_t t, CopyMode mode) {
  const bool candidate = example.step_is_copy_candidate(t);
  switch (mode) {
    case CopyMode::kForceCopy:
      return candidate ? SwitchBranch::kCopy : SwitchBranch::kGenerate;
    case CopyMode::kForceCopyUnk:
      return candidate && !example.step_in_vocab(t) ? SwitchBranch::kCopy : SwitchBranch::kGenerate;
    case CopyMode::kMixture:
      break;
  }
  throw ContractError("switch loss is undefined for the mixture objective");
}

Tensor loss_pgen(const StepOutput& step, const EncodedExample& example, std::size_t t, CopyMode mode) {
  if (switch_branch(example, t, mode) == SwitchBranch::kCopy) return neg(log(shift(neg(step.p_gen), 1.0)));
  return neg(log(step.p_gen));
}

LossBreakdown sequence_loss(std::span<const StepOutput> steps, const EncodedExample& example, CopyMode mode,
                            const LossWeights& weights) {
  if (steps.size() != example.num_steps()) {
    throw ContractError("sequence_loss: " + std::to_string(steps.size()) + " steps for a target of " +
                        std::to_string(example.num_steps()) + " steps");
  }
  if (steps.empty()) throw ContractError("sequence_loss: empty sequence");
  LossBreakdown out;
  std::vector<Tensor> terms;
  terms.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    StepLoss sl;
    Tensor term;
    if (mode == CopyMode::kMixture) {
      term = mixture_nll(steps[t], example.tgt_ext_ids[t + 1]);
      sl.total = term.item();
    } else {
      Tensor lv = loss_vocab(steps[t], example.tgt_ids[t + 1]);
      Tensor la = loss_attn(steps[t], example, t);
      Tensor lp = loss_pgen(steps[t], example, t, mode);
      sl.vocab = lv.item();
      sl.attn = la.item();
      sl.pgen = lp.item();
      term = add(add(scale(lv, weights.vocab), scale(la, weights.attn)), scale(lp, weights.pgen));
      sl.total = term.item();
    }
    out.loss_vocab += sl.vocab;
    out.loss_attn += sl.attn;
    out.loss_pgen += sl.pgen;
    out.per_step.push_back(sl);
    terms.push_back(term);
  }
  const double inv = 1.0 / static_cast<double>(steps.size());
  out.loss_vocab *= inv;
  out.loss_attn *= inv;
  out.loss_pgen *= inv;
  Tensor stacked = reshape(stack_rows(terms), {1, terms.size()});
  out.total_node = scale(sum(stacked), inv);
  out.total = out.total_node.item();
  return out;
}

}  // namespace copyforge
