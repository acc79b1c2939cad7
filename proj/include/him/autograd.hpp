/*
 * Copyright 2026 The HIM Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "him/params.hpp"
#include "him/tensor.hpp"

namespace him::ag {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records forward operations in execution order and replays their backward
// rules in reverse. One tape belongs to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Var constant(Tensor value);
  Var param(Parameter& p);

  // Low-level entry for operations. `inputs` are used to decide whether the
  // node needs a gradient; `backward` is dropped when none of them do.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(const char* op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);
  // A node whose backward writes straight into parameter storage
  // (embedding gathers).
  Var record_sink(const char* op, Tensor value, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of node `id`, allocated (zeroed) on first access.
  std::vector<double>& grad(int id);
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;  // stable references across record()
};

// ---- Operations -----------------------------------------------------------
// All operands are treated as matrices; rank-1 tensors are single rows.

Var matmul(Var a, Var b);
// Elementwise with broadcasting: each dimension of b equals a's or is 1
// (and symmetrically).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);

Var sum_all(Var a);
Var mean_all(Var a);
// Row-wise sum: [m,n] -> [m,1].
Var sum_cols(Var a);
// Sum of the rows of x [n,d] whose mask entry is nonzero -> [1,d].
Var sum_pool(Var x, std::span<const double> mask);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

enum class EmptyRows { Error, Zero };
// Row-wise softmax over unmasked entries (mask may be empty = all valid).
// Masked entries are 0. Rows with no valid entry either raise or yield zeros.
Var softmax_rows(Var x, const Tensor& mask = {},
                 EmptyRows empty = EmptyRows::Error);

// Row-wise dot product: [m,n] x [m,n] -> [m,1].
Var row_dot(Var a, Var b);
// Row-wise euclidean distance: [m,n] x [m,n] -> [m,1]. The backward pass
// clamps the distance denominator at 1e-12.
Var euclidean_rows(Var a, Var b);
Var euclidean_distance(Var a, Var b);
// Each row divided by max(norm, eps).
Var normalize_rows(Var a, double eps = 1e-12);

// Rows of an embedding table selected by index; backward scatters into the
// table's gradient.
Var gather(Tape& tape, Parameter& table, std::span<const std::int64_t> indices);
// Rows of a recorded matrix selected by index (lookup semantics).
Var index_rows(Var a, std::span<const std::int64_t> indices);

Var stop_gradient(Var a);

// Mean binary cross-entropy of two-class logits [N,2], where the click
// probability is the class-1 softmax entry clamped to [1e-12, 1 - 1e-12].
Var cross_entropy(Var logits, std::span<const int> labels);
// Class-1 softmax probability of two-class logits, per row.
std::vector<double> click_probability(const Tensor& logits);

struct GruWeights {
  Var w_z, u_z, b_z;  // update gate
  Var w_r, u_r, b_r;  // reset gate
  Var w_h, u_h, b_h;  // candidate
};

// z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
// c = tanh(x Wh + (r * h) Uh + bh), h' = (1 - z) * h + z * c.
Var gru_cell(Var x, Var h, const GruWeights& w);

}  // namespace him::ag
