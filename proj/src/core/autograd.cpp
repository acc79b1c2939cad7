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

#include "him/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "him/error.hpp"

namespace him::ag {

namespace {

constexpr double kDistanceFloor = 1e-12;

Tape& tape_of(Var a) {
  HIM_CHECK(a.valid(), ErrorCode::InvalidArgument, "operation on an empty Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  HIM_CHECK(b.valid() && b.tape() == &t, ErrorCode::InvalidArgument,
            "operands recorded on different tapes");
  return t;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorCode::InvalidArgument, std::string(op) + ": shape mismatch " +
                                       shape_str(a) + " vs " + shape_str(b));
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename Forward, typename Deriv>
Var unary(const char* op, Var a, Forward f, Deriv dydx) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = f(x.data[i]);
  const int ia = a.id();
  return t.record(op, std::move(y), {a}, [ia, dydx](Tape& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ia).data;
    const auto& yv = t.value(self).data;
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(xv[i], yv[i]);
  });
}

struct Broadcast {
  std::size_t rows, cols;
  std::size_t ar, ac, br, bc;

  std::size_t ia(std::size_t r, std::size_t c) const {
    return (ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c);
  }
  std::size_t ib(std::size_t r, std::size_t c) const {
    return (br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c);
  }
};

Broadcast broadcast(const char* op, const Tensor& a, const Tensor& b) {
  Broadcast s{0, 0, a.rows(), a.cols(), b.rows(), b.cols()};
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    shape_error(op, a.shape, b.shape);
  };
  s.rows = dim(s.ar, s.br);
  s.cols = dim(s.ac, s.bc);
  return s;
}

enum class BinOp { Add, Sub, Mul };

Var binary(const char* op, BinOp kind, Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast s = broadcast(op, x, y);
  Tensor out({s.rows, s.cols});
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      const double u = x.data[s.ia(r, c)];
      const double v = y.data[s.ib(r, c)];
      double& o = out.data[r * s.cols + c];
      switch (kind) {
        case BinOp::Add: o = u + v; break;
        case BinOp::Sub: o = u - v; break;
        case BinOp::Mul: o = u * v; break;
      }
    }
  }
  const int ia = a.id(), ib = b.id();
  return t.record(op, std::move(out), {a, b}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ia).data;
    const auto& yv = t.value(ib).data;
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);
      for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) {
          const double gi = g[r * s.cols + c];
          ga[s.ia(r, c)] += kind == BinOp::Mul ? gi * yv[s.ib(r, c)] : gi;
        }
      }
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) {
          const double gi = g[r * s.cols + c];
          double d = gi;
          if (kind == BinOp::Sub) d = -gi;
          if (kind == BinOp::Mul) d = gi * xv[s.ia(r, c)];
          gb[s.ib(r, c)] += d;
        }
      }
    }
  });
}

}  // namespace

// ---- Var / Tape -----------------------------------------------------------

const Tensor& Var::value() const {
  HIM_CHECK(valid(), ErrorCode::InvalidArgument, "value of an empty Var");
  return tape_->value(id_);
}

double Var::item() const {
  const Tensor& v = value();
  HIM_CHECK(v.size() == 1, ErrorCode::InvalidArgument,
            "item() on non-scalar " + shape_str(v.shape));
  return v.data[0];
}

Var Tape::constant(Tensor value) {
  return record("constant", std::move(value), std::span<const Var>{}, nullptr);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.needs_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(op, std::move(value),
                std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  for (double v : value.data) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::Numeric,
           std::string("non-finite value produced by ") + op);
    }
  }
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    HIM_CHECK(in.tape() == this, ErrorCode::InvalidArgument,
              std::string(op) + ": input from another tape");
    n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record_sink(const char* op, Tensor value, BackwardFn backward) {
  Var v = record(op, std::move(value), std::span<const Var>{}, nullptr);
  nodes_[v.id()].needs_grad = true;
  nodes_[v.id()].backward = std::move(backward);
  return v;
}

std::vector<double>& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  HIM_CHECK(loss.tape() == this, ErrorCode::InvalidArgument,
            "backward: loss is not on this tape");
  HIM_CHECK(loss.value().size() == 1, ErrorCode::InvalidArgument,
            "backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!nodes_[loss.id()].needs_grad) return;
  grad(loss.id())[0] += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      add_into(n.param->grad.data, n.grad);
      n.param->grad_ready = true;
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

// ---- Linear algebra -------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  if (y.rows() != k) shape_error("matmul", x.shape, y.shape);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* o = &out.data[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x.data[i * k + p];
      if (xv == 0.0) continue;
      const double* yr = &y.data[p * n];
      for (std::size_t j = 0; j < n; ++j) o[j] += xv * yr[j];
    }
  }
  const int ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(out), {a, b}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ia).data;
    const auto& yv = t.value(ib).data;
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);  // g [m,n] * y^T [n,k]
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* gr = &g[i * n];
          const double* yr = &yv[p * n];
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += gr[j] * yr[j];
          ga[i * k + p] += s;
        }
      }
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);  // x^T [k,m] * g [m,n]
      for (std::size_t i = 0; i < m; ++i) {
        const double* gr = &g[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double xv_ip = xv[i * k + p];
          if (xv_ip == 0.0) continue;
          double* out_row = &gb[p * n];
          for (std::size_t j = 0; j < n; ++j) out_row[j] += xv_ip * gr[j];
        }
      }
    }
  });
}

Var add(Var a, Var b) { return binary("add", BinOp::Add, a, b); }
Var sub(Var a, Var b) { return binary("sub", BinOp::Sub, a, b); }
Var mul(Var a, Var b) { return binary("mul", BinOp::Mul, a, b); }

Var scale(Var a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; },
      [s](double, double) { return s; });
}

// ---- Shape manipulation ---------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
  HIM_CHECK(!parts.empty(), ErrorCode::InvalidArgument, "concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t m = parts[0].rows();
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    if (p.rows() != m) shape_error("concat_cols", parts[0].shape(), p.shape());
    ids.push_back(p.id());
    offsets.push_back(total);
    total += p.cols();
  }
  Tensor out({m, total});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    const std::size_t c = v.cols();
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(&v.data[r * c], c, &out.data[r * total + offsets[k]]);
    }
  }
  return t.record("concat_cols", std::move(out), parts,
                  [ids, offsets, m, total](Tape& t, int self) {
                    const auto& g = t.grad(self);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (!t.needs_grad(ids[k])) continue;
                      auto& gp = t.grad(ids[k]);
                      const std::size_t c = t.value(ids[k]).cols();
                      for (std::size_t r = 0; r < m; ++r) {
                        for (std::size_t j = 0; j < c; ++j) {
                          gp[r * c + j] += g[r * total + offsets[k] + j];
                        }
                      }
                    }
                  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  HIM_CHECK(begin < end && end <= n, ErrorCode::InvalidArgument,
            "slice_cols: range [" + std::to_string(begin) + "," +
                std::to_string(end) + ") out of " + shape_str(x.shape));
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(&x.data[r * n + begin], w, &out.data[r * w]);
  }
  const int ia = a.id();
  return t.record("slice_cols", std::move(out), {a}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t j = 0; j < w; ++j) ga[r * n + begin + j] += g[r * w + j];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  HIM_CHECK(!parts.empty(), ErrorCode::InvalidArgument, "concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t n = parts[0].cols();
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    if (p.cols() != n) shape_error("concat_rows", parts[0].shape(), p.shape());
    ids.push_back(p.id());
    offsets.push_back(total);
    total += p.rows();
  }
  Tensor out({total, n});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + offsets[k] * n);
  }
  return t.record("concat_rows", std::move(out), parts,
                  [ids, offsets, n](Tape& t, int self) {
                    const auto& g = t.grad(self);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (!t.needs_grad(ids[k])) continue;
                      auto& gp = t.grad(ids[k]);
                      const std::size_t base = offsets[k] * n;
                      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[base + i];
                    }
                  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  HIM_CHECK(begin < end && end <= m, ErrorCode::InvalidArgument,
            "slice_rows: range out of " + shape_str(x.shape));
  Tensor out({end - begin, n},
             std::vector<double>(x.data.begin() + begin * n,
                                 x.data.begin() + end * n));
  const int ia = a.id();
  return t.record("slice_rows", std::move(out), {a}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
}

// ---- Reductions -----------------------------------------------------------

Var sum_all(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data) s += v;
  const int ia = a.id();
  return t.record("sum_all", Tensor({1, 1}, {s}), {a}, [ia](Tape& t, int self) {
    const double g = t.grad(self)[0];
    for (double& x : t.grad(ia)) x += g;
  });
}

Var mean_all(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum_all(a), 1.0 / n);
}

Var sum_cols(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += x.data[r * n + c];
    out.data[r] = s;
  }
  const int ia = a.id();
  return t.record("sum_cols", std::move(out), {a}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g[r];
    }
  });
}

Var sum_pool(Var x, std::span<const double> mask) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t n = v.rows(), d = v.cols();
  HIM_CHECK(mask.size() == n, ErrorCode::InvalidArgument,
            "sum_pool: mask length " + std::to_string(mask.size()) +
                " vs rows " + std::to_string(n));
  std::vector<double> m(mask.begin(), mask.end());
  Tensor out({1, d});
  for (std::size_t r = 0; r < n; ++r) {
    if (m[r] == 0.0) continue;
    for (std::size_t c = 0; c < d; ++c) out.data[c] += v.data[r * d + c];
  }
  const int ix = x.id();
  return t.record("sum_pool", std::move(out), {x}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t r = 0; r < n; ++r) {
      if (m[r] == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[c];
    }
  });
}

// ---- Nonlinearities -------------------------------------------------------

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softmax_rows(Var x, const Tensor& mask, EmptyRows empty) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t m = v.rows(), n = v.cols();
  const bool masked = !mask.data.empty();
  if (masked && (mask.rows() != m || mask.cols() != n)) {
    shape_error("softmax_rows", v.shape, mask.shape);
  }
  std::vector<char> valid(m * n, 1);
  if (masked) {
    for (std::size_t i = 0; i < m * n; ++i) valid[i] = mask.data[i] != 0.0;
  }
  Tensor out({m, n});
  for (std::size_t r = 0; r < m; ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < n; ++c) {
      if (valid[r * n + c]) mx = std::max(mx, v.data[r * n + c]);
    }
    if (mx == -INFINITY) {
      HIM_CHECK(empty == EmptyRows::Zero, ErrorCode::InvalidArgument,
                "softmax_rows: row " + std::to_string(r) + " is fully masked");
      continue;
    }
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (!valid[r * n + c]) continue;
      const double e = std::exp(v.data[r * n + c] - mx);
      out.data[r * n + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < n; ++c) out.data[r * n + c] /= z;
  }
  const int ix = x.id();
  return t.record("softmax_rows", std::move(out), {x}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self).data;
    auto& gx = t.grad(ix);
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += y[r * n + c] * g[r * n + c];
      for (std::size_t c = 0; c < n; ++c) {
        gx[r * n + c] += y[r * n + c] * (g[r * n + c] - dot);
      }
    }
  });
}

// ---- Row-wise geometry ----------------------------------------------------

Var row_dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape != y.shape) shape_error("row_dot", x.shape, y.shape);
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += x.data[r * n + c] * y.data[r * n + c];
    out.data[r] = s;
  }
  const int ia = a.id(), ib = b.id();
  return t.record("row_dot", std::move(out), {a, b}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ia).data;
    const auto& yv = t.value(ib).data;
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);
      for (std::size_t i = 0; i < m * n; ++i) ga[i] += g[i / n] * yv[i];
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t i = 0; i < m * n; ++i) gb[i] += g[i / n] * xv[i];
    }
  });
}

Var euclidean_rows(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape != y.shape) shape_error("euclidean_rows", x.shape, y.shape);
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = x.data[r * n + c] - y.data[r * n + c];
      s += d * d;
    }
    out.data[r] = std::sqrt(s);
  }
  const int ia = a.id(), ib = b.id();
  return t.record("euclidean_rows", std::move(out), {a, b},
                  [=](Tape& t, int self) {
                    const auto& g = t.grad(self);
                    const auto& dist = t.value(self).data;
                    const auto& xv = t.value(ia).data;
                    const auto& yv = t.value(ib).data;
                    const bool ga_on = t.needs_grad(ia), gb_on = t.needs_grad(ib);
                    auto* ga = ga_on ? &t.grad(ia) : nullptr;
                    auto* gb = gb_on ? &t.grad(ib) : nullptr;
                    for (std::size_t r = 0; r < m; ++r) {
                      const double k = g[r] / std::max(dist[r], kDistanceFloor);
                      for (std::size_t c = 0; c < n; ++c) {
                        const double d = k * (xv[r * n + c] - yv[r * n + c]);
                        if (ga) (*ga)[r * n + c] += d;
                        if (gb) (*gb)[r * n + c] -= d;
                      }
                    }
                  });
}

Var euclidean_distance(Var a, Var b) {
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols()) {
    shape_error("euclidean_distance", a.shape(), b.shape());
  }
  return euclidean_rows(a, b);
}

Var normalize_rows(Var a, double eps) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out({m, n});
  std::vector<double> norms(m);
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += x.data[r * n + c] * x.data[r * n + c];
    norms[r] = std::sqrt(s);
    const double d = std::max(norms[r], eps);
    for (std::size_t c = 0; c < n; ++c) out.data[r * n + c] = x.data[r * n + c] / d;
  }
  const int ia = a.id();
  return t.record("normalize_rows", std::move(out), {a},
                  [=](Tape& t, int self) {
                    const auto& g = t.grad(self);
                    const auto& y = t.value(self).data;
                    auto& ga = t.grad(ia);
                    for (std::size_t r = 0; r < m; ++r) {
                      if (norms[r] <= eps) {
                        for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g[r * n + c] / eps;
                        continue;
                      }
                      double dot = 0.0;
                      for (std::size_t c = 0; c < n; ++c) dot += y[r * n + c] * g[r * n + c];
                      for (std::size_t c = 0; c < n; ++c) {
                        ga[r * n + c] += (g[r * n + c] - y[r * n + c] * dot) / norms[r];
                      }
                    }
                  });
}

// ---- Lookups --------------------------------------------------------------

Var gather(Tape& tape, Parameter& table, std::span<const std::int64_t> indices) {
  const std::size_t rows = table.value.rows(), d = table.value.cols();
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    HIM_CHECK(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < rows,
              ErrorCode::InvalidArgument,
              "gather: index " + std::to_string(idx[i]) + " out of table '" +
                  table.name + "' with " + std::to_string(rows) + " rows");
    std::copy_n(&table.value.data[idx[i] * d], d, &out.data[i * d]);
  }
  Parameter* p = &table;
  return tape.record_sink("gather", std::move(out), [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    auto& gp = p->grad.data;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < d; ++c) gp[idx[i] * d + c] += g[i * d + c];
    }
    p->grad_ready = true;
  });
}

Var index_rows(Var a, std::span<const std::int64_t> indices) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), d = x.cols();
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    HIM_CHECK(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < rows,
              ErrorCode::InvalidArgument,
              "index_rows: index " + std::to_string(idx[i]) + " out of " +
                  shape_str(x.shape));
    std::copy_n(&x.data[idx[i] * d], d, &out.data[i * d]);
  }
  const int ia = a.id();
  return t.record("index_rows", std::move(out), {a}, [=](Tape& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < d; ++c) ga[idx[i] * d + c] += g[i * d + c];
    }
  });
}

Var stop_gradient(Var a) { return tape_of(a).constant(a.value()); }

// ---- Losses ---------------------------------------------------------------

namespace {

double class1_probability(double l0, double l1) {
  const double z = l1 - l0;
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

constexpr double kProbFloor = 1e-12;

}  // namespace

std::vector<double> click_probability(const Tensor& logits) {
  HIM_CHECK(logits.cols() == 2, ErrorCode::InvalidArgument,
            "click_probability: expected [N,2] logits, got " +
                shape_str(logits.shape));
  std::vector<double> p(logits.rows());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = class1_probability(logits.data[2 * i], logits.data[2 * i + 1]);
  }
  return p;
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  Tape& t = tape_of(logits);
  const Tensor& l = logits.value();
  HIM_CHECK(l.cols() == 2 && l.rows() == labels.size(),
            ErrorCode::InvalidArgument,
            "cross_entropy: logits " + shape_str(l.shape) + " vs " +
                std::to_string(labels.size()) + " labels");
  const std::size_t n = labels.size();
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<double> p = click_probability(l);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    HIM_CHECK(y[i] == 0 || y[i] == 1, ErrorCode::InvalidArgument,
              "cross_entropy: label must be 0 or 1");
    const double pc = std::clamp(p[i], kProbFloor, 1.0 - kProbFloor);
    loss -= y[i] ? std::log(pc) : std::log(1.0 - pc);
  }
  loss /= static_cast<double>(n);
  const int il = logits.id();
  return t.record("cross_entropy", Tensor({1, 1}, {loss}), {logits},
                  [=](Tape& t, int self) {
                    const double g = t.grad(self)[0] / static_cast<double>(n);
                    auto& gl = t.grad(il);
                    for (std::size_t i = 0; i < n; ++i) {
                      if (p[i] < kProbFloor || p[i] > 1.0 - kProbFloor) continue;
                      const double d = g * (p[i] - y[i]);
                      gl[2 * i] -= d;
                      gl[2 * i + 1] += d;
                    }
                  });
}

// ---- GRU ------------------------------------------------------------------

Var gru_cell(Var x, Var h, const GruWeights& w) {
  const std::size_t hidden = h.cols();
  if (w.u_z.rows() != hidden || w.u_z.cols() != hidden ||
      w.w_z.rows() != x.cols() || w.w_z.cols() != hidden) {
    shape_error("gru_cell", x.shape(), w.w_z.shape());
  }
  Var z = sigmoid(add(add(matmul(x, w.w_z), matmul(h, w.u_z)), w.b_z));
  Var r = sigmoid(add(add(matmul(x, w.w_r), matmul(h, w.u_r)), w.b_r));
  Var c = tanh(add(add(matmul(x, w.w_h), matmul(mul(r, h), w.u_h)), w.b_h));
  return add(h, mul(z, sub(c, h)));
}

}  // namespace him::ag
