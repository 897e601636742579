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

#include "copyforge/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "copyforge/errors.hpp"

namespace copyforge {

std::string to_string(const Shape& shape) {
  return "[" + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + "]";
}

Parameter::Parameter(std::string name_, Shape shape_, bool decay_)
    : name(std::move(name_)),
      shape(shape_),
      value(shape_.size(), 0.0),
      grad(shape_.size(), 0.0),
      decay(decay_) {}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

// --- Tensor ----------------------------------------------------------------

const Shape& Tensor::shape() const { return tape_->node(id_).shape; }

std::span<const double> Tensor::values() const {
  const Node& n = tape_->node(id_);
  return {n.data(), n.shape.size()};
}

std::vector<double> Tensor::to_vector() const {
  auto v = values();
  return {v.begin(), v.end()};
}

std::span<const double> Tensor::grad() const { return tape_->node(id_).grad; }

bool Tensor::requires_grad() const { return tape_->node(id_).requires_grad; }

double Tensor::item() const {
  if (shape().size() != 1) throw ContractError("item() on non-scalar " + to_string(shape()));
  return values()[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const Shape& s = shape();
  if (r >= s.rows || c >= s.cols) throw IndexError("tensor index out of range");
  return values()[r * s.cols + c];
}

// --- Tape ------------------------------------------------------------------

namespace {

// Four partial sums so the loop pipelines without reassociation flags.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

void check_finite(const Node& n, const char* op) {
  const double* d = n.data();
  for (std::size_t i = 0; i < n.shape.size(); ++i) {
    if (!std::isfinite(d[i])) throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

Tape& same_tape(const Tensor& a, const Tensor& b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ContractError("operands belong to different tapes");
  }
  return *a.tape();
}

const Node& node_of(const Tensor& t) {
  if (!t.valid()) throw ContractError("use of an empty tensor handle");
  return t.tape()->node(t.id());
}

Node make_node(Op op, Shape shape, std::initializer_list<const Tensor*> ins) {
  Node n;
  n.op = op;
  n.shape = shape;
  n.value.assign(shape.size(), 0.0);
  for (const Tensor* t : ins) {
    n.inputs.push_back(t->id());
    n.requires_grad = n.requires_grad || t->requires_grad();
  }
  return n;
}

double sigmoid_value(double x) {
  if (x >= 0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

Tensor Tape::push(Node&& node) {
  check_finite(node, "forward op");
  nodes_.push_back(std::move(node));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

Tensor Tape::constant(Shape shape, std::vector<double> values) {
  if (values.size() != shape.size()) {
    throw DimensionError("constant: " + std::to_string(values.size()) + " values for shape " +
                         to_string(shape));
  }
  Node n;
  n.shape = shape;
  n.value = std::move(values);
  return push(std::move(n));
}

Tensor Tape::variable(Shape shape, std::vector<double> values) {
  Tensor t = constant(shape, std::move(values));
  nodes_.back().requires_grad = true;
  return t;
}

Tensor Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Tensor(this, it->second);
  if (p.value.size() != p.shape.size()) throw DimensionError("parameter " + p.name + " has bad size");
  Node n;
  n.shape = p.shape;
  n.external = p.value.data();
  n.requires_grad = true;
  n.param = &p;
  Tensor t = push(std::move(n));
  bound_.emplace(&p, t.id());
  return t;
}

std::vector<double>& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(n.shape.size(), 0.0);
  return n.grad;
}

void Tape::backward(const Tensor& root) {
  if (root.tape() != this) throw ContractError("backward: root belongs to another tape");
  if (root.shape().size() != 1) {
    throw ContractError("backward: root must be a scalar, got " + to_string(root.shape()));
  }
  for (auto& n : nodes_) n.grad.clear();
  grad_of(root.id())[0] = 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.op == Op::kLeaf) {
      if (n.param != nullptr) {
        auto& g = n.param->grad;
        if (g.size() != n.grad.size()) g.assign(n.grad.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      }
      continue;
    }
    backward_node(n);
  }
}

void Tape::backward_node(Node& n) {
  const std::vector<double>& gy = n.grad;
  auto input = [&](std::size_t k) -> Node& { return nodes_[static_cast<std::size_t>(n.inputs[k])]; };
  auto wants = [&](std::size_t k) { return input(k).requires_grad; };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatmul: {
      const Node& a = input(0);
      const Node& b = input(1);
      const std::size_t m = a.shape.rows, k = a.shape.cols, cols = b.shape.cols;
      const double* ad = a.data();
      const double* bd = b.data();
      if (wants(0)) {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            ga[i * k + p] += dot(gy.data() + i * cols, bd + p * cols, cols);
          }
        }
      }
      if (wants(1)) {
        auto& gb = grad_of(n.inputs[1]);
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = gy.data() + i * cols;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = ad[i * k + p];
            if (av == 0.0) continue;
            double* gbrow = gb.data() + p * cols;
            for (std::size_t j = 0; j < cols; ++j) gbrow[j] += av * grow[j];
          }
        }
      }
      break;
    }
    case Op::kTranspose: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      const std::size_t r = n.shape.rows, c = n.shape.cols;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[j * r + i] += gy[i * c + j];
      break;
    }
    case Op::kReshape:
    case Op::kPadCols: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kSub ? -1.0 : 1.0;
      if (wants(0)) {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (wants(1)) {
        auto& gb = grad_of(n.inputs[1]);
        const std::size_t bs = gb.size();
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i % bs] += sign * gy[i];
      }
      break;
    }
    case Op::kMul: {
      const double* ad = input(0).data();
      const double* bd = input(1).data();
      if (wants(0)) {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bd[i];
      }
      if (wants(1)) {
        auto& gb = grad_of(n.inputs[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * ad[i];
      }
      break;
    }
    case Op::kScaleBy: {
      const double* xd = input(0).data();
      const double* sd = input(1).data();
      const std::size_t cols = n.shape.cols;
      const bool per_row = input(1).shape.size() > 1;
      if (wants(0)) {
        auto& gx = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * sd[per_row ? i / cols : 0];
      }
      if (wants(1)) {
        auto& gs = grad_of(n.inputs[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) gs[per_row ? i / cols : 0] += gy[i] * xd[i];
      }
      break;
    }
    case Op::kUnary: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      const double* xd = input(0).data();
      const double* yd = n.data();
      for (std::size_t i = 0; i < gy.size(); ++i) {
        double d = 0.0;
        switch (n.unary) {
          case Unary::kTanh: d = 1.0 - yd[i] * yd[i]; break;
          case Unary::kSigmoid: d = yd[i] * (1.0 - yd[i]); break;
          case Unary::kRelu: d = xd[i] > 0.0 ? 1.0 : 0.0; break;
          case Unary::kLog: d = xd[i] >= kLogFloor ? 1.0 / xd[i] : 0.0; break;
          case Unary::kNeg: d = -1.0; break;
          case Unary::kScale: d = n.c0; break;
          case Unary::kShift: d = 1.0; break;
        }
        gx[i] += gy[i] * d;
      }
      break;
    }
    case Op::kClamp: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      const double* xd = input(0).data();
      for (std::size_t i = 0; i < gy.size(); ++i) {
        if (xd[i] >= n.c0 && xd[i] <= n.c1) gx[i] += gy[i];
      }
      break;
    }
    case Op::kSoftmax: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      const double* yd = n.data();
      const std::size_t cols = n.shape.cols;
      for (std::size_t r = 0; r < n.shape.rows; ++r) {
        const double* y = yd + r * cols;
        const double* g = gy.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += y[j] * g[j];
        for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += y[j] * (g[j] - dot);
      }
      break;
    }
    case Op::kConcat: {
      const std::size_t ca = input(0).shape.cols, cb = input(1).shape.cols, c = n.shape.cols;
      if (wants(0)) {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t r = 0; r < n.shape.rows; ++r)
          for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += gy[r * c + j];
      }
      if (wants(1) && cb > 0) {
        auto& gb = grad_of(n.inputs[1]);
        for (std::size_t r = 0; r < n.shape.rows; ++r)
          for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += gy[r * c + ca + j];
      }
      break;
    }
    case Op::kSliceCols: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      const std::size_t xc = input(0).shape.cols, begin = static_cast<std::size_t>(n.c0);
      const std::size_t c = n.shape.cols;
      for (std::size_t r = 0; r < n.shape.rows; ++r)
        for (std::size_t j = 0; j < c; ++j) gx[r * xc + begin + j] += gy[r * c + j];
      break;
    }
    case Op::kSliceRows: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      const std::size_t offset = static_cast<std::size_t>(n.c0) * n.shape.cols;
      for (std::size_t i = 0; i < gy.size(); ++i) gx[offset + i] += gy[i];
      break;
    }
    case Op::kStackRows: {
      const std::size_t c = n.shape.cols;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (!wants(k)) continue;
        auto& gx = grad_of(n.inputs[k]);
        for (std::size_t j = 0; j < c; ++j) gx[j] += gy[k * c + j];
      }
      break;
    }
    case Op::kScatterSum: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < n.index.size(); ++i) gx[i] += gy[static_cast<std::size_t>(n.index[i])];
      break;
    }
    case Op::kGatherRows: {
      if (!wants(0)) break;
      auto& gt = grad_of(n.inputs[0]);
      const std::size_t c = n.shape.cols;
      for (std::size_t k = 0; k < n.index.size(); ++k) {
        double* dst = gt.data() + static_cast<std::size_t>(n.index[k]) * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += gy[k * c + j];
      }
      break;
    }
    case Op::kPick: {
      if (!wants(0)) break;
      grad_of(n.inputs[0])[static_cast<std::size_t>(n.index[0])] += gy[0];
      break;
    }
    case Op::kSum: {
      if (!wants(0)) break;
      auto& gx = grad_of(n.inputs[0]);
      for (double& g : gx) g += gy[0];
      break;
    }
    case Op::kLayerNorm: {
      // aux holds, per row, the mean and the inverse standard deviation.
      const Node& x = input(0);
      const double* xd = x.data();
      const double* gain = input(1).data();
      const std::size_t rows = n.shape.rows, c = n.shape.cols;
      std::vector<double>* gx = wants(0) ? &grad_of(n.inputs[0]) : nullptr;
      std::vector<double>* gg = wants(1) ? &grad_of(n.inputs[1]) : nullptr;
      std::vector<double>* gb = wants(2) ? &grad_of(n.inputs[2]) : nullptr;
      std::vector<double> xhat(c), dxhat(c);
      for (std::size_t r = 0; r < rows; ++r) {
        const double mean = n.aux[2 * r], inv_std = n.aux[2 * r + 1];
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          xhat[j] = (xd[r * c + j] - mean) * inv_std;
          const double g = gy[r * c + j];
          dxhat[j] = g * gain[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat[j];
          if (gg) (*gg)[j] += g * xhat[j];
          if (gb) (*gb)[j] += g;
        }
        mean_d /= static_cast<double>(c);
        mean_dx /= static_cast<double>(c);
        if (gx) {
          for (std::size_t j = 0; j < c; ++j) {
            (*gx)[r * c + j] += inv_std * (dxhat[j] - mean_d - xhat[j] * mean_dx);
          }
        }
      }
      break;
    }
  }
}

// --- forward ops -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) {
    throw DimensionError("matmul: " + to_string(sa) + " x " + to_string(sb));
  }
  Node n = make_node(Op::kMatmul, {sa.rows, sb.cols}, {&a, &b});
  const double* ad = node_of(a).data();
  const double* bd = node_of(b).data();
  const std::size_t k = sa.cols, cols = sb.cols;
  for (std::size_t i = 0; i < sa.rows; ++i) {
    double* out = n.value.data() + i * cols;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bd + p * cols;
      for (std::size_t j = 0; j < cols; ++j) out[j] += av * brow[j];
    }
  }
  return tape.push(std::move(n));
}

Tensor transpose(const Tensor& x) {
  const Shape s = x.shape();
  Node n = make_node(Op::kTranspose, {s.cols, s.rows}, {&x});
  const double* xd = node_of(x).data();
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) n.value[j * s.rows + i] = xd[i * s.cols + j];
  return x.tape()->push(std::move(n));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.size() != x.shape().size()) {
    throw DimensionError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  Node n = make_node(Op::kReshape, shape, {&x});
  auto v = x.values();
  std::copy(v.begin(), v.end(), n.value.begin());
  return x.tape()->push(std::move(n));
}

namespace {

Tensor add_sub(const Tensor& a, const Tensor& b, double sign, Op op) {
  Tape& tape = same_tape(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  const bool broadcast = sb.rows == 1 && sb.cols == sa.cols && sa.rows > 1;
  if (!(sa == sb) && !broadcast) {
    throw DimensionError("add/sub: " + to_string(sa) + " vs " + to_string(sb));
  }
  Node n = make_node(op, sa, {&a, &b});
  const double* ad = node_of(a).data();
  const double* bd = node_of(b).data();
  const std::size_t bs = sb.size();
  for (std::size_t i = 0; i < sa.size(); ++i) n.value[i] = ad[i] + sign * bd[i % bs];
  return tape.push(std::move(n));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_sub(a, b, 1.0, Op::kAdd); }

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError("sub: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  return add_sub(a, b, -1.0, Op::kSub);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  if (!(a.shape() == b.shape())) {
    throw DimensionError("mul: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Node n = make_node(Op::kMul, a.shape(), {&a, &b});
  const double* ad = node_of(a).data();
  const double* bd = node_of(b).data();
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = ad[i] * bd[i];
  return tape.push(std::move(n));
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  Tape& tape = same_tape(x, s);
  const Shape sx = x.shape(), ss = s.shape();
  const bool scalar = ss.size() == 1;
  const bool per_row = ss.cols == 1 && ss.rows == sx.rows;
  if (!scalar && !per_row) {
    throw DimensionError("scale_by: " + to_string(sx) + " by " + to_string(ss));
  }
  Node n = make_node(Op::kScaleBy, sx, {&x, &s});
  const double* xd = node_of(x).data();
  const double* sd = node_of(s).data();
  for (std::size_t i = 0; i < sx.size(); ++i) n.value[i] = xd[i] * sd[scalar ? 0 : i / sx.cols];
  return tape.push(std::move(n));
}

Tensor apply_unary(Unary kind, const Tensor& x, double c) {
  Node n = make_node(Op::kUnary, x.shape(), {&x});
  n.unary = kind;
  n.c0 = c;
  const double* xd = node_of(x).data();
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    const double v = xd[i];
    double y = 0.0;
    switch (kind) {
      case Unary::kTanh: y = std::tanh(v); break;
      case Unary::kSigmoid: y = sigmoid_value(v); break;
      case Unary::kRelu: y = v > 0.0 ? v : 0.0; break;
      case Unary::kLog:
        if (!(v >= 0.0)) throw NumericError("log of negative value " + std::to_string(v));
        y = std::log(std::max(v, kLogFloor));
        break;
      case Unary::kNeg: y = -v; break;
      case Unary::kScale: y = c * v; break;
      case Unary::kShift: y = v + c; break;
    }
    n.value[i] = y;
  }
  return x.tape()->push(std::move(n));
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  Node n = make_node(Op::kClamp, x.shape(), {&x});
  n.c0 = lo;
  n.c1 = hi;
  const double* xd = node_of(x).data();
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::clamp(xd[i], lo, hi);
  return x.tape()->push(std::move(n));
}

Tensor softmax_masked(const Tensor& x, std::span<const char> mask) {
  const Shape s = x.shape();
  if (!mask.empty() && mask.size() != s.cols) {
    throw DimensionError("softmax_masked: mask of length " + std::to_string(mask.size()) +
                         " for " + to_string(s));
  }
  const bool any_valid =
      mask.empty() ? s.cols > 0 : std::any_of(mask.begin(), mask.end(), [](char m) { return m != 0; });
  if (!any_valid) throw EmptyDistributionError("softmax_masked: every position is masked");
  Node n = make_node(Op::kSoftmax, s, {&x});
  const double* xd = node_of(x).data();
  auto valid = [&](std::size_t j) { return mask.empty() || mask[j] != 0; };
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* in = xd + r * s.cols;
    double* out = n.value.data() + r * s.cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.cols; ++j)
      if (valid(j)) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) {
      out[j] = valid(j) ? std::exp(in[j] - mx) : 0.0;
      z += out[j];
    }
    for (std::size_t j = 0; j < s.cols; ++j) out[j] /= z;
  }
  return x.tape()->push(std::move(n));
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.rows != sb.rows) {
    throw DimensionError("concat_last: " + to_string(sa) + " vs " + to_string(sb));
  }
  const std::size_t c = sa.cols + sb.cols;
  Node n = make_node(Op::kConcat, {sa.rows, c}, {&a, &b});
  const double* ad = node_of(a).data();
  const double* bd = node_of(b).data();
  for (std::size_t r = 0; r < sa.rows; ++r) {
    std::copy(ad + r * sa.cols, ad + (r + 1) * sa.cols, n.value.begin() + static_cast<long>(r * c));
    std::copy(bd + r * sb.cols, bd + (r + 1) * sb.cols,
              n.value.begin() + static_cast<long>(r * c + sa.cols));
  }
  return tape.push(std::move(n));
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const Shape s = x.shape();
  if (begin >= end || end > s.cols) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") of " + to_string(s));
  }
  const std::size_t c = end - begin;
  Node n = make_node(Op::kSliceCols, {s.rows, c}, {&x});
  n.c0 = static_cast<double>(begin);
  const double* xd = node_of(x).data();
  for (std::size_t r = 0; r < s.rows; ++r)
    std::copy(xd + r * s.cols + begin, xd + r * s.cols + end, n.value.begin() + static_cast<long>(r * c));
  return x.tape()->push(std::move(n));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const Shape s = x.shape();
  if (begin >= end || end > s.rows) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") of " + to_string(s));
  }
  Node n = make_node(Op::kSliceRows, {end - begin, s.cols}, {&x});
  n.c0 = static_cast<double>(begin);
  const double* xd = node_of(x).data();
  std::copy(xd + begin * s.cols, xd + end * s.cols, n.value.begin());
  return x.tape()->push(std::move(n));
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  Tape* tape = rows[0].tape();
  const std::size_t c = rows[0].cols();
  Node n;
  n.op = Op::kStackRows;
  n.shape = {rows.size(), c};
  n.value.resize(rows.size() * c);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Tensor& t = rows[k];
    if (t.tape() != tape) throw ContractError("stack_rows: operands belong to different tapes");
    if (t.rows() != 1 || t.cols() != c) throw DimensionError("stack_rows: row " + std::to_string(k) + " is " + to_string(t.shape()));
    auto v = t.values();
    std::copy(v.begin(), v.end(), n.value.begin() + static_cast<long>(k * c));
    n.inputs.push_back(t.id());
    n.requires_grad = n.requires_grad || t.requires_grad();
  }
  return tape->push(std::move(n));
}

Tensor scatter_sum(const Tensor& weights, std::span<const int> slot_of, std::size_t n_slots) {
  const Shape s = weights.shape();
  if (s.rows != 1 || slot_of.size() != s.cols) {
    throw DimensionError("scatter_sum: " + std::to_string(slot_of.size()) + " slots for " + to_string(s));
  }
  Node n = make_node(Op::kScatterSum, {1, n_slots}, {&weights});
  const double* wd = node_of(weights).data();
  for (std::size_t i = 0; i < slot_of.size(); ++i) {
    const int slot = slot_of[i];
    if (slot < 0 || static_cast<std::size_t>(slot) >= n_slots) {
      throw IndexError("scatter_sum: slot " + std::to_string(slot) + " out of range " + std::to_string(n_slots));
    }
    n.value[static_cast<std::size_t>(slot)] += wd[i];
  }
  n.index.assign(slot_of.begin(), slot_of.end());
  return weights.tape()->push(std::move(n));
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  const Shape s = table.shape();
  Node n = make_node(Op::kGatherRows, {ids.size(), s.cols}, {&table});
  const double* td = node_of(table).data();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const int id = ids[k];
    if (id < 0 || static_cast<std::size_t>(id) >= s.rows) {
      throw IndexError("gather_rows: id " + std::to_string(id) + " out of range " + std::to_string(s.rows));
    }
    std::copy(td + static_cast<std::size_t>(id) * s.cols, td + (static_cast<std::size_t>(id) + 1) * s.cols,
              n.value.begin() + static_cast<long>(k * s.cols));
  }
  n.index.assign(ids.begin(), ids.end());
  return table.tape()->push(std::move(n));
}

Tensor pick(const Tensor& x, std::size_t r, std::size_t c) {
  const Shape s = x.shape();
  if (r >= s.rows || c >= s.cols) {
    throw IndexError("pick: (" + std::to_string(r) + "," + std::to_string(c) + ") of " + to_string(s));
  }
  Node n = make_node(Op::kPick, {1, 1}, {&x});
  const std::size_t flat = r * s.cols + c;
  n.value[0] = node_of(x).data()[flat];
  n.index = {static_cast<int>(flat)};
  return x.tape()->push(std::move(n));
}

Tensor sum(const Tensor& x) {
  Node n = make_node(Op::kSum, {1, 1}, {&x});
  auto v = x.values();
  n.value[0] = std::accumulate(v.begin(), v.end(), 0.0);
  return x.tape()->push(std::move(n));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  Tape& tape = same_tape(x, gain);
  same_tape(x, bias);
  const Shape s = x.shape();
  if (gain.shape() != Shape{1, s.cols} || bias.shape() != Shape{1, s.cols}) {
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(s.cols));
  }
  Node n = make_node(Op::kLayerNorm, s, {&x, &gain, &bias});
  const double* xd = node_of(x).data();
  const double* gd = node_of(gain).data();
  const double* bd = node_of(bias).data();
  n.aux.resize(2 * s.rows);
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* in = xd + r * s.cols;
    double mean = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) mean += in[j];
    mean /= static_cast<double>(s.cols);
    double var = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(s.cols);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    n.aux[2 * r] = mean;
    n.aux[2 * r + 1] = inv_std;
    for (std::size_t j = 0; j < s.cols; ++j) {
      n.value[r * s.cols + j] = (in[j] - mean) * inv_std * gd[j] + bd[j];
    }
  }
  return tape.push(std::move(n));
}

Tensor pad_cols(const Tensor& x, std::size_t cols) {
  const Shape s = x.shape();
  if (s.rows != 1 || cols < s.cols) {
    throw DimensionError("pad_cols: " + to_string(s) + " to " + std::to_string(cols));
  }
  Node n = make_node(Op::kPadCols, {1, cols}, {&x});
  auto v = x.values();
  std::copy(v.begin(), v.end(), n.value.begin());
  return x.tape()->push(std::move(n));
}

// --- finite differences ----------------------------------------------------

namespace {

double evaluate_loss(const LossBuilder& f) {
  Tape tape;
  Tensor loss = f(tape);
  const double v = loss.item();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport compare_gradients(const LossBuilder& f, std::span<Parameter* const> params,
                                  std::span<const std::vector<double>> analytic,
                                  const GradCheckOptions& options) {
  if (options.eps < 1e-7 || options.eps > 1e-3) {
    throw ContractError("finite_diff_check: eps must lie in [1e-7, 1e-3]");
  }
  if (analytic.size() != params.size()) throw ContractError("compare_gradients: one gradient per parameter");

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) coords.emplace_back(p, i);
  if (coords.size() > options.max_coords) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (auto [p, i] : coords) {
    double& x = params[p]->value[i];
    const double saved = x;
    x = saved + options.eps;
    const double up = evaluate_loss(f);
    x = saved - options.eps;
    const double down = evaluate_loss(f);
    x = saved;
    const double numeric = (up - down) / (2.0 * options.eps);
    const double g = analytic[p].at(i);
    const double rel = std::abs(g - numeric) / std::max(1e-8, std::abs(g) + std::abs(numeric));
    report.entries.push_back({params[p]->name, i, g, numeric, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

GradCheckReport finite_diff_check(const LossBuilder& f, std::span<Parameter* const> params,
                                  const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Tensor loss = f(tape);
    if (!std::isfinite(loss.item())) throw NumericError("finite_diff_check: loss is not finite");
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);
  return compare_gradients(f, params, analytic, options);
}

}  // namespace copyforge
