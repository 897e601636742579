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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "copyforge/model.hpp"

namespace copyforge {

// Adam moments, one pair per parameter in ModelParameters::list() order.
struct OptimState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static OptimState zeros_like(const ModelParameters& params);
};

// Extra named vectors stored next to the parameters.
using NamedVectors = std::map<std::string, std::vector<double>>;

std::array<std::uint8_t, 32> config_digest(const ModelConfig& config);

// Binary layout: "CPFG1", 32-byte config digest, u64 tensor count, then per
// tensor a u32-prefixed name, u32 rank, u64 dims and little-endian f64 data.
// Moments are stored as "<name>.m" / "<name>.v".
void save_checkpoint(const std::string& path, const ModelParameters& params, const OptimState* optim = nullptr,
                     const NamedVectors& extra = {});

struct LoadedCheckpoint {
  bool has_optim = false;
  NamedVectors extra;
};

// Restores into `params` (and `optim` when given). The whole file is parsed
// and checked before anything is written, so a failed load leaves both
// untouched. Throws FormatError on bad magic, truncation, a config mismatch
// or missing tensors.
LoadedCheckpoint load_checkpoint(const std::string& path, ModelParameters& params, OptimState* optim = nullptr);

}  // namespace copyforge
