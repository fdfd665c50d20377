// Copyright 2026 The SCASRec Authors.
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
#include <deque>
#include <span>
#include <string_view>
#include <vector>

#include "scasrec/diff/param_store.hpp"
#include "scasrec/diff/tensor.hpp"

namespace scasrec::diff {

// Additive value used by masked_add in place of -inf.
inline constexpr double kMaskValue = -1e9;

enum class OpKind : std::uint8_t {
  constant,
  param,
  matmul,
  add,
  sub,
  mul,
  add_row,
  mul_row,
  scale,
  add_scalar,
  concat,
  transpose,
  sigmoid,
  tanh,
  log,
  softmax_rows,
  sum,
  mean,
  masked_add,
  gather_rows,
  reshape,
  pick,
};

const char* op_name(OpKind op) noexcept;

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid until the graph is cleared.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  double item() const { return value().item(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// vector is already a topological order. One graph is bound to at most one
/// ParamStore. Node storage is reused across clear() calls.
class Graph {
 public:
  explicit Graph(bool record_grad = true) : record_grad_(record_grad) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void clear();
  bool records_grad() const noexcept { return record_grad_; }
  std::size_t size() const noexcept { return count_; }

  Var constant(Tensor value);
  Var param(ParamStore& store, int index);
  Var param(ParamStore& store, std::string_view name);

  const Tensor& value(int id) const;
  // Gradient of the last backward() w.r.t. node `id`; zero tensor if untouched.
  Tensor grad(int id) const;
  OpKind kind(int id) const { return nodes_.at(static_cast<std::size_t>(id)).op; }

  struct Node {
    OpKind op = OpKind::constant;
    int a = -1;
    int b = -1;
    int param_index = -1;
    bool needs_grad = false;
    bool has_grad = false;
    double scalar = 0.0;
    std::size_t aux0 = 0;
    std::size_t aux1 = 0;
    std::vector<int> index;
    Tensor value;
    Tensor grad;
    const Tensor* ref = nullptr;

    const Tensor& val() const { return ref != nullptr ? *ref : value; }
  };

  // Internal: used by the op functions.
  Node& emplace(OpKind op, int a, int b, int& out_id);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  bool needs(int id) const { return id >= 0 && node(id).needs_grad; }

  friend void backward(Graph& graph, Var loss);

 private:
  Tensor& ensure_grad(int id);

  bool record_grad_;
  std::deque<Node> nodes_;  // deque: values stay addressable while the tape grows
  std::size_t count_ = 0;
  ParamStore* store_ = nullptr;
  std::vector<int> param_nodes_;  // param index -> node id, -1 if absent
};

// --- forward ops (each records a node) ---
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a: m x n, row: 1 x n; broadcast over rows
Var add_row(Var a, Var row);
Var mul_row(Var a, Var row);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
// axis 0 stacks rows, axis 1 stacks columns
Var concat(Var a, Var b, int axis);
Var transpose(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var log(Var a);
Var softmax_rows(Var a);
Var sum(Var a);
Var mean(Var a);
// Adds kMaskValue at every flat index listed in `masked`.
Var masked_add(Var a, std::span<const int> masked);
Var gather_rows(Var a, std::span<const int> rows);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var pick(Var a, std::size_t row, std::size_t col);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

/// Backpropagates from a 1 x 1 loss. Parameter gradients are accumulated
/// (added) into the bound ParamStore's grad tensors.
void backward(Graph& graph, Var loss);

}  // namespace scasrec::diff
