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

#include <span>
#include <string>
#include <vector>

#include "copyforge/autodiff.hpp"
#include "copyforge/model.hpp"
#include "copyforge/vocab.hpp"

namespace copyforge {

enum class CopyMode { kMixture, kForceCopy, kForceCopyUnk };

std::string to_string(CopyMode mode);
// Accepts "mixture", "force_copy", "force_copy_unk".
CopyMode parse_copy_mode(const std::string& text);

// Component weights for the supervised objective. The default is the
// unweighted sum.
struct LossWeights {
  double vocab = 1.0;
  double attn = 1.0;
  double pgen = 1.0;
};

// -log P_final(target), floored.
Tensor mixture_nll(const StepOutput& step, int tgt_ext_id);
// -log P_vocab(target); UNK when the target is out of vocabulary.
Tensor loss_vocab(const StepOutput& step, int tgt_id);
// -log of the attention mass on source positions holding the target token.
// Zero for steps whose target is not a copy-candidate.
Tensor loss_attn(const StepOutput& step, const EncodedExample& example, std::size_t t);

enum class SwitchBranch { kCopy, kGenerate };
// Which side of the switch loss fires at decoder step t.
SwitchBranch switch_branch(const EncodedExample& example, std::size_t t, CopyMode mode);
Tensor loss_pgen(const StepOutput& step, const EncodedExample& example, std::size_t t, CopyMode mode);

struct StepLoss {
  double vocab = 0.0;
  double attn = 0.0;
  double pgen = 0.0;
  double total = 0.0;
};

struct LossBreakdown {
  double loss_vocab = 0.0;
  double loss_attn = 0.0;
  double loss_pgen = 0.0;
  double total = 0.0;
  std::vector<StepLoss> per_step;
  Tensor total_node;  // scalar on the forward tape
};

// Mean over decoder steps (target tokens plus EOS).
LossBreakdown sequence_loss(std::span<const StepOutput> steps, const EncodedExample& example, CopyMode mode,
                            const LossWeights& weights = {});

}  // namespace copyforge
