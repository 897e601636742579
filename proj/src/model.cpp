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

#include "copyforge/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "copyforge/errors.hpp"

namespace copyforge {

void ModelConfig::validate() const {
  if (emb_dim == 0 || hidden_dim == 0 || enc_layers == 0 || enc_heads == 0 || enc_ff_dim == 0 ||
      vocab_size == 0 || max_src_len == 0 || max_tgt_len == 0) {
    throw ContractError("model config: every dimension must be >= 1");
  }
  if (emb_dim % enc_heads != 0) throw ContractError("model config: emb_dim must be divisible by enc_heads");
  if (vocab_size <= static_cast<std::size_t>(kEosId)) {
    throw ContractError("model config: vocab_size must include the special tokens");
  }
}

std::string ModelConfig::canonical() const {
  std::ostringstream out;
  out << "emb_dim=" << emb_dim << "\nhidden_dim=" << hidden_dim << "\nenc_layers=" << enc_layers
      << "\nenc_heads=" << enc_heads << "\nenc_ff_dim=" << enc_ff_dim << "\nvocab_size=" << vocab_size
      << "\nmax_src_len=" << max_src_len << "\nmax_tgt_len=" << max_tgt_len << "\nseed=" << seed << "\n";
  return out.str();
}

std::vector<Parameter*> ModelParameters::list() {
  std::vector<Parameter*> out{&embedding};
  for (auto& l : layers) {
    for (Parameter* p : {&l.wq, &l.wk, &l.wv, &l.wo, &l.bo, &l.ln1_gain, &l.ln1_bias, &l.ff1_w, &l.ff1_b,
                         &l.ff2_w, &l.ff2_b, &l.ln2_gain, &l.ln2_bias}) {
      out.push_back(p);
    }
  }
  for (Parameter* p : {&enc_out_w, &enc_out_b, &lstm_wx, &lstm_wh, &lstm_b, &attn_wh, &attn_ws, &attn_v,
                       &out_w, &out_b, &out_w2, &out_b2, &gen_wh, &gen_ws, &gen_wy, &gen_b}) {
    out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> ModelParameters::list() const {
  auto mutable_list = const_cast<ModelParameters*>(this)->list();
  return {mutable_list.begin(), mutable_list.end()};
}

Parameter* ModelParameters::find(const std::string& name) {
  for (Parameter* p : list())
    if (p->name == name) return p;
  return nullptr;
}

void ModelParameters::zero_grad() {
  for (Parameter* p : list()) p->zero_grad();
}

namespace {

Parameter weight(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Parameter p(name, {rows, cols}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : p.value) v = dist(rng);
  return p;
}

Parameter bias(const std::string& name, std::size_t cols, double fill = 0.0) {
  Parameter p(name, {1, cols}, false);
  std::fill(p.value.begin(), p.value.end(), fill);
  return p;
}

std::vector<double> positional_encoding(std::size_t length, std::size_t dim) {
  std::vector<double> pe(length * dim);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) / rate;
      pe[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

}  // namespace

ModelParameters init_params(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t E = config.emb_dim, H = config.hidden_dim, V = config.vocab_size, F = config.enc_ff_dim;
  ModelParameters p;
  p.config = config;
  p.embedding = weight("embedding", V, E, rng);
  for (std::size_t l = 0; l < config.enc_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l) + ".";
    EncoderLayerParams layer;
    layer.wq = weight(pre + "wq", E, E, rng);
    layer.wk = weight(pre + "wk", E, E, rng);
    layer.wv = weight(pre + "wv", E, E, rng);
    layer.wo = weight(pre + "wo", E, E, rng);
    layer.bo = bias(pre + "bo", E);
    layer.ln1_gain = bias(pre + "ln1_gain", E, 1.0);
    layer.ln1_bias = bias(pre + "ln1_bias", E);
    layer.ff1_w = weight(pre + "ff1_w", E, F, rng);
    layer.ff1_b = bias(pre + "ff1_b", F);
    layer.ff2_w = weight(pre + "ff2_w", F, E, rng);
    layer.ff2_b = bias(pre + "ff2_b", E);
    layer.ln2_gain = bias(pre + "ln2_gain", E, 1.0);
    layer.ln2_bias = bias(pre + "ln2_bias", E);
    p.layers.push_back(std::move(layer));
  }
  p.enc_out_w = weight("enc_out_w", E, H, rng);
  p.enc_out_b = bias("enc_out_b", H);
  p.lstm_wx = weight("lstm_wx", E + H, 4 * H, rng);
  p.lstm_wh = weight("lstm_wh", H, 4 * H, rng);
  p.lstm_b = bias("lstm_b", 4 * H);
  p.attn_wh = weight("attn_wh", H, H, rng);
  p.attn_ws = weight("attn_ws", H, H, rng);
  p.attn_v = weight("attn_v", H, 1, rng);
  p.out_w = weight("out_w", 2 * H, H, rng);
  p.out_b = bias("out_b", H);
  p.out_w2 = weight("out_w2", H, V, rng);
  p.out_b2 = bias("out_b2", V);
  p.gen_wh = weight("gen_wh", H, 1, rng);
  p.gen_ws = weight("gen_ws", H, 1, rng);
  p.gen_wy = weight("gen_wy", E, 1, rng);
  p.gen_b = bias("gen_b", 1);
  return p;
}

EncoderOutput make_encoder_output(Tape& tape, Tensor h, std::vector<char> src_mask, ModelParameters& params) {
  if (src_mask.size() != h.rows()) throw DimensionError("encoder output: mask length does not match h");
  EncoderOutput out;
  out.h = h;
  out.h_proj = matmul(h, tape.parameter(params.attn_wh));
  out.src_mask = std::move(src_mask);
  return out;
}

EncoderOutput encode(Tape& tape, std::span<const int> src_ids, ModelParameters& params) {
  const ModelConfig& cfg = params.config;
  const std::size_t T = src_ids.size();
  if (T == 0) throw ContractError("encode: empty source");
  if (T > cfg.max_src_len) {
    throw ContractError("encode: source length " + std::to_string(T) + " exceeds max_src_len " +
                        std::to_string(cfg.max_src_len));
  }
  std::vector<char> mask(T);
  for (std::size_t i = 0; i < T; ++i) mask[i] = src_ids[i] != kPadId;

  Tensor x = gather_rows(tape.parameter(params.embedding), src_ids);
  x = add(x, tape.constant({T, cfg.emb_dim}, positional_encoding(T, cfg.emb_dim)));

  const std::size_t heads = cfg.enc_heads, dh = cfg.emb_dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (auto& layer : params.layers) {
    Tensor q = matmul(x, tape.parameter(layer.wq));
    Tensor k = matmul(x, tape.parameter(layer.wk));
    Tensor v = matmul(x, tape.parameter(layer.wv));
    Tensor attended;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      Tensor qh = heads == 1 ? q : slice_cols(q, hd * dh, (hd + 1) * dh);
      Tensor kh = heads == 1 ? k : slice_cols(k, hd * dh, (hd + 1) * dh);
      Tensor vh = heads == 1 ? v : slice_cols(v, hd * dh, (hd + 1) * dh);
      Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
      Tensor head = matmul(softmax_masked(scores, mask), vh);
      attended = hd == 0 ? head : concat_last(attended, head);
    }
    Tensor proj = add(matmul(attended, tape.parameter(layer.wo)), tape.parameter(layer.bo));
    x = layer_norm(add(x, proj), tape.parameter(layer.ln1_gain), tape.parameter(layer.ln1_bias));
    Tensor ff = relu(add(matmul(x, tape.parameter(layer.ff1_w)), tape.parameter(layer.ff1_b)));
    ff = add(matmul(ff, tape.parameter(layer.ff2_w)), tape.parameter(layer.ff2_b));
    x = layer_norm(add(x, ff), tape.parameter(layer.ln2_gain), tape.parameter(layer.ln2_bias));
  }
  Tensor h = add(matmul(x, tape.parameter(params.enc_out_w)), tape.parameter(params.enc_out_b));
  return make_encoder_output(tape, h, std::move(mask), params);
}

AttentionOutput attention(const EncoderOutput& enc, const Tensor& s, ModelParameters& params) {
  Tape& tape = *s.tape();
  const std::size_t T = enc.h.rows();
  Tensor ws = matmul(s, tape.parameter(params.attn_ws));
  Tensor feat = tanh(add(enc.h_proj, ws));
  Tensor e = reshape(matmul(feat, tape.parameter(params.attn_v)), {1, T});
  Tensor alpha = softmax_masked(e, enc.src_mask);
  Tensor c = matmul(alpha, enc.h);
  return {e, alpha, c};
}

Tensor vocab_distribution(const Tensor& s, const Tensor& c, ModelParameters& params) {
  Tape& tape = *s.tape();
  Tensor hidden = add(matmul(concat_last(s, c), tape.parameter(params.out_w)), tape.parameter(params.out_b));
  Tensor logits = add(matmul(hidden, tape.parameter(params.out_w2)), tape.parameter(params.out_b2));
  return softmax(logits);
}

Tensor generation_probability(const Tensor& c, const Tensor& s, const Tensor& y_emb, ModelParameters& params) {
  Tape& tape = *s.tape();
  Tensor z = add(matmul(c, tape.parameter(params.gen_wh)), matmul(s, tape.parameter(params.gen_ws)));
  z = add(z, matmul(y_emb, tape.parameter(params.gen_wy)));
  z = add(z, tape.parameter(params.gen_b));
  return clamp(sigmoid(z), kPgenClamp, 1.0 - kPgenClamp);
}

Tensor final_distribution(const Tensor& p_vocab, const Tensor& p_gen, const Tensor& alpha,
                          std::span<const int> src_ext_ids, std::size_t ext_size) {
  if (p_vocab.cols() > ext_size) throw DimensionError("final_distribution: ext_size smaller than vocabulary");
  Tensor generated = scale_by(pad_cols(p_vocab, ext_size), p_gen);
  Tensor copied = scale_by(scatter_sum(alpha, src_ext_ids, ext_size), shift(neg(p_gen), 1.0));
  return add(generated, copied);
}

DecoderState initial_state(Tape& tape, const ModelConfig& config) {
  const Shape shape{1, config.hidden_dim};
  return {tape.zeros(shape), tape.zeros(shape), tape.zeros(shape)};
}

namespace {

// LSTM cell with input feeding; returns (hidden, cell).
std::pair<Tensor, Tensor> lstm_cell(const Tensor& y_emb, const DecoderState& state, ModelParameters& params) {
  Tape& tape = *y_emb.tape();
  const std::size_t H = params.config.hidden_dim;
  Tensor x = concat_last(y_emb, state.context);
  Tensor gates = add(matmul(x, tape.parameter(params.lstm_wx)), matmul(state.s, tape.parameter(params.lstm_wh)));
  gates = add(gates, tape.parameter(params.lstm_b));
  Tensor i = sigmoid(slice_cols(gates, 0, H));
  Tensor f = sigmoid(slice_cols(gates, H, 2 * H));
  Tensor g = tanh(slice_cols(gates, 2 * H, 3 * H));
  Tensor o = sigmoid(slice_cols(gates, 3 * H, 4 * H));
  Tensor cell = add(mul(f, state.cell), mul(i, g));
  Tensor s = mul(o, tanh(cell));
  return {s, cell};
}

}  // namespace

std::pair<StepOutput, DecoderState> decoder_step(Tape& tape, int prev_token_id, const DecoderState& state,
                                                 const EncoderOutput& enc, ModelParameters& params,
                                                 const EncodedExample& example) {
  if (prev_token_id < 0 || static_cast<std::size_t>(prev_token_id) >= params.config.vocab_size) {
    throw IndexError("decoder_step: previous token " + std::to_string(prev_token_id) +
                     " is not a base-vocabulary id");
  }
  const int ids[1] = {prev_token_id};
  Tensor y = gather_rows(tape.parameter(params.embedding), ids);
  auto [s, cell] = lstm_cell(y, state, params);
  AttentionOutput att = attention(enc, s, params);
  StepOutput out;
  out.s = s;
  out.e = att.e;
  out.alpha = att.alpha;
  out.c = att.c;
  out.p_vocab = vocab_distribution(s, att.c, params);
  out.p_gen = generation_probability(att.c, s, y, params);
  out.p_final = final_distribution(out.p_vocab, out.p_gen, att.alpha, example.src_ext_ids, example.ext_size());
  return {out, DecoderState{s, cell, att.c}};
}

std::vector<StepOutput> teacher_force(Tape& tape, const EncodedExample& example, ModelParameters& params,
                                      bool with_final) {
  const ModelConfig& cfg = params.config;
  if (example.vocab_size != cfg.vocab_size) {
    throw ContractError("teacher_force: example encoded with a vocabulary of a different size");
  }
  const std::size_t steps = example.num_steps();
  if (steps > cfg.max_tgt_len + 1) {
    throw ContractError("teacher_force: target length " + std::to_string(steps - 1) + " exceeds max_tgt_len");
  }
  EncoderOutput enc = encode(tape, example.src_ids, params);
  std::span<const int> inputs(example.tgt_ids.data(), steps);
  Tensor Y = gather_rows(tape.parameter(params.embedding), inputs);

  DecoderState state = initial_state(tape, cfg);
  std::vector<StepOutput> out(steps);
  std::vector<Tensor> s_rows, c_rows;
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor y = row(Y, t);
    auto [s, cell] = lstm_cell(y, state, params);
    AttentionOutput att = attention(enc, s, params);
    out[t].s = s;
    out[t].e = att.e;
    out[t].alpha = att.alpha;
    out[t].c = att.c;
    s_rows.push_back(s);
    c_rows.push_back(att.c);
    state = DecoderState{s, cell, att.c};
  }
  Tensor S = stack_rows(s_rows);
  Tensor C = stack_rows(c_rows);
  Tensor P = vocab_distribution(S, C, params);
  Tensor G = generation_probability(C, S, Y, params);
  for (std::size_t t = 0; t < steps; ++t) {
    out[t].p_vocab = row(P, t);
    out[t].p_gen = row(G, t);
    if (with_final) {
      out[t].p_final = final_distribution(out[t].p_vocab, out[t].p_gen, out[t].alpha, example.src_ext_ids,
                                          example.ext_size());
    }
  }
  return out;
}

SourceMemory SourceMemory::capture(const EncoderOutput& enc) {
  SourceMemory m;
  m.h = enc.h.to_vector();
  m.h_proj = enc.h_proj.to_vector();
  m.length = enc.h.rows();
  m.dim = enc.h.cols();
  m.src_mask = enc.src_mask;
  return m;
}

EncoderOutput SourceMemory::bind(Tape& tape) const {
  EncoderOutput enc;
  enc.h = tape.constant({length, dim}, h);
  enc.h_proj = tape.constant({length, h_proj.size() / length}, h_proj);
  enc.src_mask = src_mask;
  return enc;
}

StateValues StateValues::capture(const DecoderState& state) {
  return {state.s.to_vector(), state.cell.to_vector(), state.context.to_vector()};
}

DecoderState StateValues::bind(Tape& tape) const {
  return {tape.constant({1, s.size()}, s), tape.constant({1, cell.size()}, cell),
          tape.constant({1, context.size()}, context)};
}

}  // namespace copyforge
