/**
 * Copyright 2026 The hugnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Differentiable dense operations recorded on a Tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/rng.hpp"
#include "hugnn/tape.hpp"
#include "hugnn/tensor.hpp"

namespace hugnn {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

inline void require_shape(const Tensor& a, std::size_t rows, std::size_t cols, const char* op) {
  if (a.rows() != rows || a.cols() != cols) {
    throw ShapeError(std::string(op) + ": expected " + Tensor::shape_string(rows, cols) + ", got " +
                     a.shape_string());
  }
}

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

}  // namespace detail

/// Index of the largest entry of row `r`; ties resolve to the lowest index.
inline std::size_t argmax_row(const Tensor& t, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < t.cols(); ++j)
    if (t(r, j) > t(r, best)) best = j;
  return best;
}

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.shape_string() + " * " + bv.shape_string());
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out(n, m);
  kernel::mm_nn(av.data(), bv.data(), out.data(), n, k, m);
  return a.tape->record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, const std::vector<double>& g) {
    if (t.needs_grad(a)) kernel::mm_nt(g.data(), t.value(b).data(), t.grad(a).data(), n, m, k, true);
    if (t.needs_grad(b)) kernel::mm_tn(t.value(a).data(), g.data(), t.grad(b).data(), n, k, m, true);
  });
}

/// a * b^T, for weights stored as (out x in).
inline Var matmul_bt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_bt: inner dimensions differ, " + av.shape_string() + " * " + bv.shape_string() +
                     "^T");
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  Tensor out(n, m);
  kernel::mm_nt(av.data(), bv.data(), out.data(), n, k, m);
  return a.tape->record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, const std::vector<double>& g) {
    if (t.needs_grad(a)) kernel::mm_nn(g.data(), t.value(b).data(), t.grad(a).data(), n, m, k, true);
    if (t.needs_grad(b)) kernel::mm_tn(g.data(), t.value(a).data(), t.grad(b).data(), n, m, k, true);
  });
}

/// a^T * b.
inline Var matmul_at(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw ShapeError("matmul_at: row counts differ, " + av.shape_string() + "^T * " + bv.shape_string());
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out(k, m);
  kernel::mm_tn(av.data(), bv.data(), out.data(), n, k, m);
  return a.tape->record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, const std::vector<double>& g) {
    if (t.needs_grad(a)) kernel::mm_nt(t.value(b).data(), g.data(), t.grad(a).data(), n, m, k, true);
    if (t.needs_grad(b)) kernel::mm_nn(t.value(a).data(), g.data(), t.grad(b).data(), n, k, m, true);
  });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const std::vector<double>& g) {
    for (Var v : {a, b}) {
      if (!t.needs_grad(v)) continue;
      auto& gv = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const std::vector<double>& g) {
    if (t.needs_grad(a)) {
      auto& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline Var hadamard(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "hadamard");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const std::vector<double>& g) {
    if (t.needs_grad(a)) {
      auto& ga = t.grad(a);
      const Tensor& bv = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

/// scale * x + shift.
inline Var affine(Var x, double scale, double shift = 0.0) {
  Tensor out = detail::map(x.value(), [=](double v) { return scale * v + shift; });
  return x.tape->record(std::move(out), {x}, [x, scale](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += scale * g[i];
  });
}

inline Var scale(Var x, double c) { return affine(x, c, 0.0); }

inline Var exp(Var x) {
  Tensor out = detail::map(x.value(), [](double v) { return std::exp(v); });
  return x.tape->record(std::move(out), {x}, [x](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * std::exp(xv[i]);
  });
}

inline Var log(Var x) {
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > 0.0)) throw DomainError("log: non-positive input " + std::to_string(xv[i]));
  }
  Tensor out = detail::map(xv, [](double v) { return std::log(v); });
  return x.tape->record(std::move(out), {x}, [x](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
  });
}

/// log(max(x, floor)); entries at or below the floor receive no gradient.
inline Var log_floor(Var x, double floor) {
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (xv[i] < 0.0 || std::isnan(xv[i])) throw DomainError("log_floor: negative input " + std::to_string(xv[i]));
  }
  Tensor out = detail::map(xv, [floor](double v) { return std::log(std::max(v, floor)); });
  return x.tape->record(std::move(out), {x}, [x, floor](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > floor) gx[i] += g[i] / xv[i];
  });
}

inline Var relu(Var x) {
  Tensor out = detail::map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return x.tape->record(std::move(out), {x}, [x](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

/// Logistic function kept inside the open interval (0, 1): beyond |v| of about 37
/// (upper side) or 745 (lower side) the exact value rounds to 1 or 0, so the result is
/// clamped to the nearest representable interior value.
inline double sigmoid(double v) {
  constexpr double kLo = std::numeric_limits<double>::denorm_min();
  constexpr double kHi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  const double y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  return std::clamp(y, kLo, kHi);
}

inline Var sigmoid(Var x) {
  Tensor out = detail::map(x.value(), [](double v) { return sigmoid(v); });
  Var y = x.tape->record(std::move(out), {x}, nullptr);
  x.tape->set_backward(y, [x, y](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& yv = t.value(y);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
  });
  return y;
}

/// Multiply by a constant mask (dropout, selection).
inline Var mask(Var x, const Tensor& m) {
  detail::require_same_shape(x.value(), m, "mask");
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
  return x.tape->record(std::move(out), {x}, [x, m](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * m[i];
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation and broadcasting
// ---------------------------------------------------------------------------

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (p.rows() != n) throw ShapeError("concat_cols: row counts differ");
    total += p.cols();
  }
  Tensor out(n, total);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, off + j) = pv(i, j);
    off += pv.cols();
  }
  return parts.front().tape->record(std::move(out), parts, [parts, n, total](Tape& t, const std::vector<double>& g) {
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t c = t.value(p).cols();
      if (t.needs_grad(p)) {
        auto& gp = t.grad(p);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * total + off + j];
      }
      off += c;
    }
  });
}

inline Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const Tensor& xv = x.value();
  if (start + count > xv.cols()) throw ShapeError("slice_cols: range exceeds " + xv.shape_string());
  const std::size_t n = xv.rows(), c = xv.cols();
  Tensor out(n, count);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = xv(i, start + j);
  return x.tape->record(std::move(out), {x}, [x, start, count, n, c](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < count; ++j) gx[i * c + start + j] += g[i * count + j];
  });
}

/// x (n x F) with row i multiplied by s_i, s (n x 1).
inline Var scale_rows(Var x, Var s) {
  const Tensor& xv = x.value();
  detail::require_shape(s.value(), xv.rows(), 1, "scale_rows");
  const std::size_t n = xv.rows(), f = xv.cols();
  Tensor out = xv;
  const Tensor& sv = s.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out(i, j) *= sv[i];
  return x.tape->record(std::move(out), {x, s}, [x, s, n, f](Tape& t, const std::vector<double>& g) {
    const Tensor& xv = t.value(x);
    const Tensor& sv = t.value(s);
    if (t.needs_grad(x)) {
      auto& gx = t.grad(x);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) gx[i * f + j] += g[i * f + j] * sv[i];
    }
    if (t.needs_grad(s)) {
      auto& gs = t.grad(s);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) gs[i] += g[i * f + j] * xv(i, j);
    }
  });
}

/// x (n x F) plus the row vector b (1 x F) on every row.
inline Var add_row(Var x, Var b) {
  const Tensor& xv = x.value();
  detail::require_shape(b.value(), 1, xv.cols(), "add_row");
  const std::size_t n = xv.rows(), f = xv.cols();
  Tensor out = xv;
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out(i, j) += bv[j];
  return x.tape->record(std::move(out), {x, b}, [x, b, n, f](Tape& t, const std::vector<double>& g) {
    if (t.needs_grad(x)) {
      auto& gx = t.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) gb[j] += g[i * f + j];
    }
  });
}

/// Repeat the row vector x (1 x F) n times.
inline Var broadcast_rows(Var x, std::size_t n) {
  const Tensor& xv = x.value();
  detail::require_shape(xv, 1, xv.cols(), "broadcast_rows");
  const std::size_t f = xv.cols();
  Tensor out(n, f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out(i, j) = xv[j];
  return x.tape->record(std::move(out), {x}, [x, n, f](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) gx[j] += g[i * f + j];
  });
}

/// x * s for a 1x1 tensor s.
inline Var mul_scalar(Var x, Var s) {
  detail::require_shape(s.value(), 1, 1, "mul_scalar");
  const double sv = s.value()[0];
  Tensor out = detail::map(x.value(), [sv](double v) { return v * sv; });
  return x.tape->record(std::move(out), {x, s}, [x, s](Tape& t, const std::vector<double>& g) {
    const Tensor& xv = t.value(x);
    if (t.needs_grad(x)) {
      auto& gx = t.grad(x);
      const double sv = t.value(s)[0];
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv;
    }
    if (t.needs_grad(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      t.grad(s)[0] += acc;
    }
  });
}

/// x + s for a 1x1 tensor s.
inline Var add_scalar(Var x, Var s) {
  detail::require_shape(s.value(), 1, 1, "add_scalar");
  const double sv = s.value()[0];
  Tensor out = detail::map(x.value(), [sv](double v) { return v + sv; });
  return x.tape->record(std::move(out), {x, s}, [x, s](Tape& t, const std::vector<double>& g) {
    if (t.needs_grad(x)) {
      auto& gx = t.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(s)) {
      double acc = 0.0;
      for (double v : g) acc += v;
      t.grad(s)[0] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape->record(Tensor(1, 1, s), {x}, [x](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    for (double& v : gx) v += g[0];
  });
}

inline Var mean_all(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<double>(n));
}

inline Var row_sum(Var x) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), f = xv.cols();
  Tensor out(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out[i] += xv(i, j);
  return x.tape->record(std::move(out), {x}, [x, n, f](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) gx[i * f + j] += g[i];
  });
}

inline Var row_mean(Var x) {
  const std::size_t f = x.value().cols();
  if (f == 0) throw ShapeError("row_mean: zero columns");
  return scale(row_sum(x), 1.0 / static_cast<double>(f));
}

/// Squared l2 norm of every row, (n x 1).
inline Var sq_norm_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), f = xv.cols();
  Tensor out(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out[i] += xv(i, j) * xv(i, j);
  return x.tape->record(std::move(out), {x}, [x, n, f](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) gx[i * f + j] += 2.0 * g[i] * xv(i, j);
  });
}

/// Mean over rows of the squared distance to the row centroid, summed over
/// columns. Returns 1x1. {(0,0),(2,2)} gives 2.
inline Var variance_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), f = xv.cols();
  if (n == 0) throw ShapeError("variance_rows: no rows");
  std::vector<double> mu(f, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) mu[j] += xv(i, j);
  for (double& v : mu) v /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) acc += (xv(i, j) - mu[j]) * (xv(i, j) - mu[j]);
  acc /= static_cast<double>(n);
  return x.tape->record(Tensor(1, 1, acc), {x}, [x, n, f, mu](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    const double c = 2.0 * g[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) gx[i * f + j] += c * (xv(i, j) - mu[j]);
  });
}

inline constexpr double kCosineEps = 1e-12;

/// Row-wise cosine similarity <a_i, b_i> / (|a_i| |b_i| + 1e-12), (n x 1).
inline Var cosine_rows(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_same_shape(av, bv, "cosine_rows");
  const std::size_t n = av.rows(), f = av.cols();
  Tensor out(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      dot += av(i, j) * bv(i, j);
      na += av(i, j) * av(i, j);
      nb += bv(i, j) * bv(i, j);
    }
    out[i] = dot / (std::sqrt(na) * std::sqrt(nb) + kCosineEps);
  }
  return a.tape->record(std::move(out), {a, b}, [a, b, n, f](Tape& t, const std::vector<double>& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    std::vector<double>* ga = t.needs_grad(a) ? &t.grad(a) : nullptr;
    std::vector<double>* gb = t.needs_grad(b) ? &t.grad(b) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0, na2 = 0.0, nb2 = 0.0;
      for (std::size_t j = 0; j < f; ++j) {
        dot += av(i, j) * bv(i, j);
        na2 += av(i, j) * av(i, j);
        nb2 += bv(i, j) * bv(i, j);
      }
      const double na = std::sqrt(na2), nb = std::sqrt(nb2);
      const double den = na * nb + kCosineEps;
      // d/da [dot / (|a||b| + eps)] = b / den - dot * |b| * (a / |a|) / den^2
      const double ca = na > 0.0 ? dot * nb / (na * den * den) : 0.0;
      const double cb = nb > 0.0 ? dot * na / (nb * den * den) : 0.0;
      for (std::size_t j = 0; j < f; ++j) {
        if (ga) (*ga)[i * f + j] += g[i] * (bv(i, j) / den - ca * av(i, j));
        if (gb) (*gb)[i * f + j] += g[i] * (av(i, j) / den - cb * bv(i, j));
      }
    }
  });
}

inline Tensor row_softmax(const Tensor& x) {
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      y(i, j) = std::exp(x(i, j) - mx);
      z += y(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) /= z;
  }
  return y;
}

/// Softmax of every row, computed after subtracting the row maximum.
inline Var row_softmax(Var x) {
  Tensor out = row_softmax(x.value());
  const std::size_t n = out.rows(), c = out.cols();
  Var y = x.tape->record(std::move(out), {x}, nullptr);
  x.tape->set_backward(y, [x, y, n, c](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& yv = t.value(y);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * yv(i, j);
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += yv(i, j) * (g[i * c + j] - dot);
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Gumbel-Softmax with straight-through one-hot output
// ---------------------------------------------------------------------------

inline constexpr double kProbabilityFloor = 1e-12;

struct GumbelSample {
  Var soft;  ///< relaxed sample, rows sum to 1
  Var hard;  ///< one-hot rows; gradients pass unchanged to `soft`
};

/// Gumbel(0,1) noise with the given shape.
inline Tensor gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor g(rows, cols);
  for (double& v : g.values()) v = rng.gumbel();
  return g;
}

/// Straight-through Gumbel-Softmax over the rows of a probability matrix.
///
/// Training: soft = softmax((log p + g) / temperature), hard = one_hot(argmax soft).
/// Evaluation (`noise == nullptr`): no noise, hard = one_hot(argmax p).
/// Probabilities are floored at 1e-12 before the log. Ties go to the lowest index.
inline GumbelSample gumbel_softmax_st(Var p, double temperature, const Tensor* noise) {
  if (!(temperature > 0.0)) throw ContractError("gumbel_softmax_st: temperature must be > 0");
  Tape& tape = *p.tape;
  Var logits = log_floor(p, kProbabilityFloor);
  if (noise) {
    detail::require_same_shape(p.value(), *noise, "gumbel_softmax_st noise");
    logits = add(logits, tape.constant_ref(*noise));
  }
  Var soft = row_softmax(scale(logits, 1.0 / temperature));
  const Tensor& decide = noise ? soft.value() : p.value();
  Tensor one_hot(decide.rows(), decide.cols());
  for (std::size_t i = 0; i < decide.rows(); ++i) one_hot(i, argmax_row(decide, i)) = 1.0;
  Var hard = tape.record(std::move(one_hot), {soft}, [soft](Tape& t, const std::vector<double>& g) {
    auto& gs = t.grad(soft);
    for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
  });
  return {soft, hard};
}

inline GumbelSample gumbel_softmax_st(Var p, double temperature, Rng& rng, bool train_mode) {
  if (!train_mode) return gumbel_softmax_st(p, temperature, nullptr);
  const Tensor noise = gumbel_noise(p.rows(), p.cols(), rng);
  // The noise must outlive the tape; keep it on the tape as an owned constant.
  Tape& tape = *p.tape;
  Var nv = tape.constant(noise);
  return gumbel_softmax_st(p, temperature, &nv.value());
}

}  // namespace hugnn
