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

// Pointer-generator model: Transformer encoder, LSTM decoder with additive
// attention and input feeding, vocabulary head, soft switch p_gen and the
// extended-vocabulary mixture distribution.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "copyforge/autodiff.hpp"
#include "copyforge/vocab.hpp"

namespace copyforge {

inline constexpr double kPgenClamp = 1e-6;

struct ModelConfig {
  std::size_t emb_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t enc_layers = 2;
  std::size_t enc_heads = 1;
  std::size_t enc_ff_dim = 64;
  std::size_t vocab_size = 0;
  std::size_t max_src_len = 160;
  std::size_t max_tgt_len = 80;
  std::uint64_t seed = 1;

  // Throws ContractError when a dimension is zero or emb_dim is not
  // divisible by enc_heads.
  void validate() const;
  // Canonical key=value text; hashed into checkpoints.
  std::string canonical() const;
};

struct EncoderLayerParams {
  Parameter wq, wk, wv, wo, bo;
  Parameter ln1_gain, ln1_bias;
  Parameter ff1_w, ff1_b, ff2_w, ff2_b;
  Parameter ln2_gain, ln2_bias;
};

struct ModelParameters {
  ModelConfig config;
  Parameter embedding;  // shared by encoder and decoder
  std::vector<EncoderLayerParams> layers;
  Parameter enc_out_w, enc_out_b;
  Parameter lstm_wx, lstm_wh, lstm_b;     // gate order: input, forget, cell, output
  Parameter attn_wh, attn_ws, attn_v;     // e = v' tanh(W_h h_i + W_s s_t)
  Parameter out_w, out_b, out_w2, out_b2; // P_vocab = softmax(W2 (W [s;c] + b) + b2)
  Parameter gen_wh, gen_ws, gen_wy, gen_b;

  // Stable order; names are unique.
  std::vector<Parameter*> list();
  std::vector<const Parameter*> list() const;
  Parameter* find(const std::string& name);
  void zero_grad();
};

ModelParameters init_params(const ModelConfig& config);

struct EncoderOutput {
  Tensor h;       // T_x x hidden
  Tensor h_proj;  // h W_h, reused by every attention step
  std::vector<char> src_mask;
};

// PAD ids are masked out of self-attention and of the decoder attention.
EncoderOutput encode(Tape& tape, std::span<const int> src_ids, ModelParameters& params);
EncoderOutput make_encoder_output(Tape& tape, Tensor h, std::vector<char> src_mask, ModelParameters& params);

struct AttentionOutput {
  Tensor e;      // 1 x T_x logits
  Tensor alpha;  // 1 x T_x
  Tensor c;      // 1 x hidden
};

AttentionOutput attention(const EncoderOutput& enc, const Tensor& s, ModelParameters& params);
Tensor vocab_distribution(const Tensor& s, const Tensor& c, ModelParameters& params);
Tensor generation_probability(const Tensor& c, const Tensor& s, const Tensor& y_emb, ModelParameters& params);
Tensor final_distribution(const Tensor& p_vocab, const Tensor& p_gen, const Tensor& alpha,
                          std::span<const int> src_ext_ids, std::size_t ext_size);

struct StepOutput {
  Tensor s;
  Tensor e;
  Tensor alpha;
  Tensor c;
  Tensor p_vocab;
  Tensor p_gen;    // 1 x 1
  Tensor p_final;  // invalid when not requested
};

struct DecoderState {
  Tensor s;
  Tensor cell;
  Tensor context;
};

DecoderState initial_state(Tape& tape, const ModelConfig& config);

// One decoder step. Generated OOV ids must be mapped to UNK by the caller.
std::pair<StepOutput, DecoderState> decoder_step(Tape& tape, int prev_token_id, const DecoderState& state,
                                                 const EncoderOutput& enc, ModelParameters& params,
                                                 const EncodedExample& example);

// Teacher-forced forward over the whole target (tokens plus EOS). Equivalent
// to chaining decoder_step on the gold inputs; the output heads are evaluated
// for all steps at once.
std::vector<StepOutput> teacher_force(Tape& tape, const EncodedExample& example, ModelParameters& params,
                                      bool with_final);

// Encoder output detached from any tape, for step-by-step generation.
struct SourceMemory {
  std::vector<double> h;
  std::vector<double> h_proj;
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<char> src_mask;

  static SourceMemory capture(const EncoderOutput& enc);
  EncoderOutput bind(Tape& tape) const;
};

struct StateValues {
  std::vector<double> s, cell, context;

  static StateValues capture(const DecoderState& state);
  DecoderState bind(Tape& tape) const;
};

}  // namespace copyforge
