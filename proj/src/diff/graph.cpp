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

#include "scasrec/diff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scasrec/errors.hpp"

namespace scasrec::diff {

namespace {

[[noreturn]] void shape_fail(OpKind op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

void require_same_graph(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph) throw ContractError("operands belong to different graphs");
}

// C = A * B
void matmul_kernel(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  c.reset(m, n, 0.0);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = c.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

const char* op_name(OpKind op) noexcept {
  switch (op) {
    case OpKind::constant: return "constant";
    case OpKind::param: return "param";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "elementwise-mul";
    case OpKind::add_row: return "broadcast-add";
    case OpKind::mul_row: return "broadcast-mul";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add-scalar";
    case OpKind::concat: return "concat";
    case OpKind::transpose: return "transpose";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh: return "tanh";
    case OpKind::log: return "log";
    case OpKind::softmax_rows: return "softmax-last-axis";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::masked_add: return "masked-add";
    case OpKind::gather_rows: return "gather-rows";
    case OpKind::reshape: return "reshape";
    case OpKind::pick: return "pick";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (graph == nullptr) throw ContractError("value() on unbound Var");
  return graph->value(id);
}

void Graph::clear() {
  count_ = 0;
  store_ = nullptr;
  param_nodes_.clear();
}

Graph::Node& Graph::emplace(OpKind op, int a, int b, int& out_id) {
  if (count_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[count_];
  out_id = static_cast<int>(count_);
  ++count_;
  n.op = op;
  n.a = a;
  n.b = b;
  n.param_index = -1;
  n.has_grad = false;
  n.scalar = 0.0;
  n.aux0 = n.aux1 = 0;
  n.index.clear();
  n.ref = nullptr;
  n.needs_grad = record_grad_ && ((a >= 0 && nodes_[static_cast<std::size_t>(a)].needs_grad) ||
                                  (b >= 0 && nodes_[static_cast<std::size_t>(b)].needs_grad));
  return n;
}

const Tensor& Graph::value(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= count_) throw ContractError("node id out of range");
  return node(id).val();
}

Tensor Graph::grad(int id) const {
  const Node& n = node(id);
  if (n.has_grad) return n.grad;
  return Tensor(n.val().rows(), n.val().cols());
}

Var Graph::constant(Tensor value) {
  int id = 0;
  Node& n = emplace(OpKind::constant, -1, -1, id);
  n.value = std::move(value);
  return {this, id};
}

Var Graph::param(ParamStore& store, int index) {
  if (store_ == nullptr) {
    store_ = &store;
  } else if (store_ != &store) {
    throw ContractError("graph is already bound to a different ParamStore");
  }
  if (param_nodes_.size() < store.size()) param_nodes_.resize(store.size(), -1);
  const auto slot = static_cast<std::size_t>(index);
  if (param_nodes_[slot] >= 0) return {this, param_nodes_[slot]};
  int id = 0;
  Node& n = emplace(OpKind::param, -1, -1, id);
  n.param_index = index;
  n.ref = &store.at(index).value;
  n.needs_grad = record_grad_;
  param_nodes_[slot] = id;
  return {this, id};
}

Var Graph::param(ParamStore& store, std::string_view name) { return param(store, store.index(name)); }

Tensor& Graph::ensure_grad(int id) {
  Node& n = node(id);
  if (!n.has_grad) {
    n.grad.reset(n.val().rows(), n.val().cols(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

// ---------------------------------------------------------------------------
// forward ops

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  if (a.cols() != b.rows()) shape_fail(OpKind::matmul, a.value(), b.value());
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::matmul, a.id, b.id, id);
  matmul_kernel(g.node(a.id).val(), g.node(b.id).val(), n.value);
  return {&g, id};
}

namespace {

template <typename F>
Var binary_same_shape(OpKind op, Var a, Var b, F f) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  if (a.value().shape() != b.value().shape()) shape_fail(op, a.value(), b.value());
  int id = 0;
  Graph::Node& n = g.emplace(op, a.id, b.id, id);
  const Tensor& x = g.node(a.id).val();
  const Tensor& y = g.node(b.id).val();
  n.value.reset(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = f(x[i], y[i]);
  return {&g, id};
}

template <typename F>
Var row_broadcast(OpKind op, Var a, Var row, F f) {
  require_same_graph(a, row);
  Graph& g = *a.graph;
  if (row.rows() != 1 || row.cols() != a.cols()) shape_fail(op, a.value(), row.value());
  int id = 0;
  Graph::Node& n = g.emplace(op, a.id, row.id, id);
  const Tensor& x = g.node(a.id).val();
  const Tensor& r = g.node(row.id).val();
  n.value.reset(x.rows(), x.cols());
  const std::size_t c = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < c; ++j) n.value[i * c + j] = f(x[i * c + j], r[j]);
  }
  return {&g, id};
}

template <typename F>
Var unary(OpKind op, Var a, F f) {
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(op, a.id, -1, id);
  const Tensor& x = g.node(a.id).val();
  n.value.reset(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = f(x[i]);
  return {&g, id};
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) { return binary_same_shape(OpKind::add, a, b, [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary_same_shape(OpKind::sub, a, b, [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary_same_shape(OpKind::mul, a, b, [](double x, double y) { return x * y; }); }

Var add_row(Var a, Var row) {
  return row_broadcast(OpKind::add_row, a, row, [](double x, double r) { return x + r; });
}
Var mul_row(Var a, Var row) {
  return row_broadcast(OpKind::mul_row, a, row, [](double x, double r) { return x * r; });
}

Var scale(Var a, double factor) {
  Var out = unary(OpKind::scale, a, [factor](double x) { return x * factor; });
  out.graph->node(out.id).scalar = factor;
  return out;
}

Var add_scalar(Var a, double c) { return unary(OpKind::add_scalar, a, [c](double x) { return x + c; }); }

Var concat(Var a, Var b, int axis) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& x0 = a.value();
  const Tensor& y0 = b.value();
  if (axis == 0) {
    if (x0.cols() != y0.cols()) shape_fail(OpKind::concat, x0, y0);
  } else if (axis == 1) {
    if (x0.rows() != y0.rows()) shape_fail(OpKind::concat, x0, y0);
  } else {
    throw ShapeError("concat: axis must be 0 or 1");
  }
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::concat, a.id, b.id, id);
  n.aux0 = static_cast<std::size_t>(axis);
  const Tensor& x = g.node(a.id).val();
  const Tensor& y = g.node(b.id).val();
  if (axis == 0) {
    n.value.reset(x.rows() + y.rows(), x.cols());
    std::copy(x.values().begin(), x.values().end(), n.value.values().begin());
    std::copy(y.values().begin(), y.values().end(), n.value.values().begin() + static_cast<std::ptrdiff_t>(x.size()));
  } else {
    const std::size_t c = x.cols() + y.cols();
    n.value.reset(x.rows(), c);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) n.value[i * c + j] = x(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) n.value[i * c + x.cols() + j] = y(i, j);
    }
  }
  return {&g, id};
}

Var transpose(Var a) {
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::transpose, a.id, -1, id);
  const Tensor& x = g.node(a.id).val();
  n.value.reset(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) n.value(j, i) = x(i, j);
  }
  return {&g, id};
}

Var sigmoid(Var a) { return unary(OpKind::sigmoid, a, stable_sigmoid); }
Var tanh(Var a) { return unary(OpKind::tanh, a, [](double x) { return std::tanh(x); }); }

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(OpKind::log, a, [](double x) { return std::log(x); });
}

Var softmax_rows(Var a) {
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::softmax_rows, a.id, -1, id);
  const Tensor& x = g.node(a.id).val();
  const std::size_t c = x.cols();
  n.value.reset(x.rows(), c);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(x(i, j) - mx);
      n.value(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < c; ++j) n.value(i, j) /= total;
  }
  return {&g, id};
}

Var sum(Var a) {
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::sum, a.id, -1, id);
  double s = 0.0;
  for (double v : g.node(a.id).val().values()) s += v;
  n.value.reset(1, 1, s);
  return {&g, id};
}

Var mean(Var a) {
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::mean, a.id, -1, id);
  const Tensor& x = g.node(a.id).val();
  double s = 0.0;
  for (double v : x.values()) s += v;
  n.value.reset(1, 1, s / static_cast<double>(x.size()));
  return {&g, id};
}

Var masked_add(Var a, std::span<const int> masked) {
  const std::size_t total = a.value().size();
  for (int m : masked) {
    if (m < 0 || static_cast<std::size_t>(m) >= total) {
      throw ShapeError("masked-add: mask index " + std::to_string(m) + " outside " + a.value().shape_string());
    }
  }
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::masked_add, a.id, -1, id);
  n.value = g.node(a.id).val();
  for (int m : masked) n.value[static_cast<std::size_t>(m)] += kMaskValue;
  return {&g, id};
}

Var gather_rows(Var a, std::span<const int> rows) {
  const std::size_t nrows = a.rows();
  if (rows.empty()) throw ShapeError("gather-rows: empty index list");
  for (int r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= nrows) {
      throw ShapeError("gather-rows: row " + std::to_string(r) + " outside " + a.value().shape_string());
    }
  }
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::gather_rows, a.id, -1, id);
  n.index.assign(rows.begin(), rows.end());
  const Tensor& x = g.node(a.id).val();
  const std::size_t c = x.cols();
  n.value.reset(rows.size(), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.row_span(static_cast<std::size_t>(rows[i]));
    std::copy(src.begin(), src.end(), n.value.values().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return {&g, id};
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size() || rows == 0) {
    throw ShapeError("reshape: cannot view " + a.value().shape_string() + " as " + shape_string(rows, cols));
  }
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::reshape, a.id, -1, id);
  const Tensor& x = g.node(a.id).val();
  n.value.reset(rows, cols);
  std::copy(x.values().begin(), x.values().end(), n.value.values().begin());
  return {&g, id};
}

Var pick(Var a, std::size_t row, std::size_t col) {
  if (row >= a.rows() || col >= a.cols()) {
    throw ShapeError("pick: (" + std::to_string(row) + "," + std::to_string(col) + ") outside " +
                     a.value().shape_string());
  }
  Graph& g = *a.graph;
  int id = 0;
  Graph::Node& n = g.emplace(OpKind::pick, a.id, -1, id);
  n.aux0 = row;
  n.aux1 = col;
  n.value.reset(1, 1, g.node(a.id).val()(row, col));
  return {&g, id};
}

// ---------------------------------------------------------------------------
// backward

void backward(Graph& g, Var loss) {
  if (loss.graph != &g) throw ContractError("backward: loss belongs to another graph");
  if (g.value(loss.id).size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + g.value(loss.id).shape_string());
  }
  if (!g.records_grad()) throw ContractError("backward: graph was built without gradient recording");
  for (std::size_t i = 0; i < g.count_; ++i) g.nodes_[i].has_grad = false;
  g.ensure_grad(loss.id).fill(1.0);

  for (int id = loss.id; id >= 0; --id) {
    Graph::Node& n = g.node(id);
    if (!n.has_grad || !n.needs_grad) continue;
    const Tensor& dy = n.grad;
    const int a = n.a;
    const int b = n.b;
    switch (n.op) {
      case OpKind::constant:
      case OpKind::param:
        break;
      case OpKind::matmul: {
        const Tensor& x = g.node(a).val();
        const Tensor& w = g.node(b).val();
        const std::size_t m = x.rows(), k = x.cols(), c = w.cols();
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j) s += dy[i * c + j] * w[p * c + j];
              dx[i * k + p] += s;
            }
          }
        }
        if (g.needs(b)) {
          Tensor& dw = g.ensure_grad(b);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double xv = x[i * k + p];
              if (xv == 0.0) continue;
              for (std::size_t j = 0; j < c; ++j) dw[p * c + j] += xv * dy[i * c + j];
            }
          }
        }
        break;
      }
      case OpKind::add:
      case OpKind::sub: {
        const double sign = n.op == OpKind::add ? 1.0 : -1.0;
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        }
        if (g.needs(b)) {
          Tensor& dw = g.ensure_grad(b);
          for (std::size_t i = 0; i < dy.size(); ++i) dw[i] += sign * dy[i];
        }
        break;
      }
      case OpKind::mul: {
        if (g.needs(a)) {
          const Tensor& y = g.node(b).val();
          Tensor& dx = g.ensure_grad(a);
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i];
        }
        if (g.needs(b)) {
          const Tensor& x = g.node(a).val();
          Tensor& dw = g.ensure_grad(b);
          for (std::size_t i = 0; i < dy.size(); ++i) dw[i] += dy[i] * x[i];
        }
        break;
      }
      case OpKind::add_row:
      case OpKind::mul_row: {
        const Tensor& x = g.node(a).val();
        const Tensor& r = g.node(b).val();
        const std::size_t rows = x.rows(), c = x.cols();
        const bool is_mul = n.op == OpKind::mul_row;
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += is_mul ? dy[i * c + j] * r[j] : dy[i * c + j];
          }
        }
        if (g.needs(b)) {
          Tensor& dr = g.ensure_grad(b);
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < c; ++j) dr[j] += is_mul ? dy[i * c + j] * x[i * c + j] : dy[i * c + j];
          }
        }
        break;
      }
      case OpKind::scale: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += n.scalar * dy[i];
        }
        break;
      }
      case OpKind::add_scalar:
      case OpKind::masked_add:
      case OpKind::reshape: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        }
        break;
      }
      case OpKind::concat: {
        const std::size_t xr = g.node(a).val().rows(), xc = g.node(a).val().cols();
        const std::size_t yc = g.node(b).val().cols();
        if (n.aux0 == 0) {
          const std::size_t split = xr * xc;
          if (g.needs(a)) {
            Tensor& dx = g.ensure_grad(a);
            for (std::size_t i = 0; i < split; ++i) dx[i] += dy[i];
          }
          if (g.needs(b)) {
            Tensor& dw = g.ensure_grad(b);
            for (std::size_t i = split; i < dy.size(); ++i) dw[i - split] += dy[i];
          }
        } else {
          const std::size_t c = xc + yc;
          if (g.needs(a)) {
            Tensor& dx = g.ensure_grad(a);
            for (std::size_t i = 0; i < xr; ++i) {
              for (std::size_t j = 0; j < xc; ++j) dx[i * xc + j] += dy[i * c + j];
            }
          }
          if (g.needs(b)) {
            Tensor& dw = g.ensure_grad(b);
            for (std::size_t i = 0; i < xr; ++i) {
              for (std::size_t j = 0; j < yc; ++j) dw[i * yc + j] += dy[i * c + xc + j];
            }
          }
        }
        break;
      }
      case OpKind::transpose: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          const std::size_t r = dy.rows(), c = dy.cols();
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) dx[j * r + i] += dy[i * c + j];
          }
        }
        break;
      }
      case OpKind::sigmoid: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          const Tensor& y = n.value;
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
        }
        break;
      }
      case OpKind::tanh: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          const Tensor& y = n.value;
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
        }
        break;
      }
      case OpKind::log: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          const Tensor& x = g.node(a).val();
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] / x[i];
        }
        break;
      }
      case OpKind::softmax_rows: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          const Tensor& y = n.value;
          const std::size_t c = y.cols();
          for (std::size_t i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += dy[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += y[i * c + j] * (dy[i * c + j] - dot);
          }
        }
        break;
      }
      case OpKind::sum:
      case OpKind::mean: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          const double d = n.op == OpKind::sum ? dy[0] : dy[0] / static_cast<double>(dx.size());
          for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d;
        }
        break;
      }
      case OpKind::gather_rows: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          const std::size_t c = dy.cols();
          for (std::size_t i = 0; i < n.index.size(); ++i) {
            const std::size_t r = static_cast<std::size_t>(n.index[i]);
            for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += dy[i * c + j];
          }
        }
        break;
      }
      case OpKind::pick: {
        if (g.needs(a)) {
          Tensor& dx = g.ensure_grad(a);
          dx(n.aux0, n.aux1) += dy[0];
        }
        break;
      }
    }
  }

  if (g.store_ != nullptr) {
    for (std::size_t slot = 0; slot < g.param_nodes_.size(); ++slot) {
      const int id = g.param_nodes_[slot];
      if (id < 0) continue;
      const Graph::Node& n = g.node(id);
      if (!n.has_grad) continue;
      Tensor& acc = g.store_->at(static_cast<int>(slot)).grad;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += n.grad[i];
    }
  }
}

}  // namespace scasrec::diff
