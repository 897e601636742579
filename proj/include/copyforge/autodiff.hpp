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

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every tensor is a matrix; vectors are 1 x n rows and scalars are 1 x 1.
// A Tape owns all nodes created while evaluating one graph. Nodes are
// appended in evaluation order, so the tape is topologically sorted by
// construction and backward() is a single reverse sweep.
//
// Learnable weights live outside the tape in Parameter objects. Binding a
// parameter to a tape does not copy its values; backward() adds the
// parameter's gradient into Parameter::grad.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace copyforge {

struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  // Biases and layer-norm parameters are excluded from weight decay.
  bool decay = true;

  Parameter() = default;
  Parameter(std::string name, Shape shape, bool decay);

  void zero_grad();
};

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kTranspose,
  kReshape,
  kAdd,
  kSub,
  kMul,
  kScaleBy,
  kUnary,
  kClamp,
  kSoftmax,
  kConcat,
  kSliceCols,
  kSliceRows,
  kStackRows,
  kScatterSum,
  kGatherRows,
  kPick,
  kSum,
  kLayerNorm,
  kPadCols,
};

enum class Unary : std::uint8_t { kTanh, kSigmoid, kRelu, kLog, kNeg, kScale, kShift };

// Probabilities are floored here before every log.
inline constexpr double kLogFloor = 1e-10;

class Tape;

// Lightweight handle to a node on a tape. Copying a Tensor copies the handle,
// not the data.
class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::span<const double> values() const;
  std::vector<double> to_vector() const;
  // Empty until backward() has reached this node.
  std::span<const double> grad() const;
  bool requires_grad() const;
  double item() const;
  double at(std::size_t r, std::size_t c) const;

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct Node {
  Op op = Op::kLeaf;
  Shape shape;
  std::vector<double> value;
  // Non-null for parameter leaves: values are read in place.
  const double* external = nullptr;
  std::vector<double> grad;
  std::vector<int> inputs;
  bool requires_grad = false;
  Unary unary = Unary::kNeg;
  double c0 = 0.0;
  double c1 = 0.0;
  std::vector<int> index;    // masks, slot maps, gathered ids
  std::vector<double> aux;   // cached forward quantities
  Parameter* param = nullptr;

  const double* data() const { return external ? external : value.data(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Shape shape, std::vector<double> values);
  Tensor variable(Shape shape, std::vector<double> values);
  Tensor zeros(Shape shape) { return constant(shape, std::vector<double>(shape.size(), 0.0)); }
  // Binding the same parameter twice returns the same node.
  Tensor parameter(Parameter& p);

  // Accumulates d(root)/d(node) for every node that requires grad, then adds
  // parameter gradients into their Parameter::grad.
  void backward(const Tensor& root);

  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }

  // Internal: used by the op implementations.
  Tensor push(Node&& node);
  Node& mutable_node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

 private:
  void backward_node(Node& n);
  std::vector<double>& grad_of(int id);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
};

// --- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Elementwise sum. `b` may also be a single row broadcast over the rows of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Multiplies `x` by a 1x1 scalar, or each row of `x` by a rows x 1 column.
Tensor scale_by(const Tensor& x, const Tensor& s);

Tensor apply_unary(Unary kind, const Tensor& x, double c = 0.0);
inline Tensor tanh(const Tensor& x) { return apply_unary(Unary::kTanh, x); }
inline Tensor sigmoid(const Tensor& x) { return apply_unary(Unary::kSigmoid, x); }
inline Tensor relu(const Tensor& x) { return apply_unary(Unary::kRelu, x); }
// Inputs below kLogFloor are floored (zero gradient); negative inputs throw.
inline Tensor log(const Tensor& x) { return apply_unary(Unary::kLog, x); }
inline Tensor neg(const Tensor& x) { return apply_unary(Unary::kNeg, x); }
inline Tensor scale(const Tensor& x, double c) { return apply_unary(Unary::kScale, x, c); }
inline Tensor shift(const Tensor& x, double c) { return apply_unary(Unary::kShift, x, c); }

// Gradient is zero where the input lies outside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);

// Softmax over the columns of each row. Masked columns get exactly zero
// probability. An empty mask means "all columns valid".
Tensor softmax_masked(const Tensor& x, std::span<const char> mask);
inline Tensor softmax(const Tensor& x) { return softmax_masked(x, {}); }

Tensor concat_last(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
inline Tensor row(const Tensor& x, std::size_t r) { return slice_rows(x, r, r + 1); }
Tensor stack_rows(std::span<const Tensor> rows);

// out[s] = sum of weights[i] over i with slot_of[i] == s.
Tensor scatter_sum(const Tensor& weights, std::span<const int> slot_of, std::size_t n_slots);

Tensor gather_rows(const Tensor& table, std::span<const int> ids);
Tensor pick(const Tensor& x, std::size_t r, std::size_t c);
Tensor sum(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Right-pads a row vector with zeros up to `cols` columns.
Tensor pad_cols(const Tensor& x, std::size_t cols);

// --- finite-difference oracle ---------------------------------------------

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  std::size_t max_coords = 200;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Builds the scalar loss on the given tape.
using LossBuilder = std::function<Tensor(Tape&)>;

// Runs backward once for analytic gradients, then compares them against
// central differences on at most `max_coords` seeded-random coordinates.
GradCheckReport finite_diff_check(const LossBuilder& f, std::span<Parameter* const> params,
                                  const GradCheckOptions& options = {});

// Same comparison with caller-supplied analytic gradients (one vector per
// parameter).
GradCheckReport compare_gradients(const LossBuilder& f, std::span<Parameter* const> params,
                                  std::span<const std::vector<double>> analytic,
                                  const GradCheckOptions& options = {});

}  // namespace copyforge
