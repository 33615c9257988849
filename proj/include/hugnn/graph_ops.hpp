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

// Differentiable operations over the arcs of a Graph. Arc a of node i points to
// neighbor j = g.arc_target(a); per-arc quantities are stored as (num_arcs x 1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "hugnn/graph.hpp"
#include "hugnn/ops.hpp"
#include "hugnn/tape.hpp"

namespace hugnn {

/// s_i = mean over j in N(i) of |x_i - x_j|^2, (n x 1). Isolated nodes give 0.
inline Var neighbor_msd(Var x, const Graph& g) {
  const Tensor& xv = x.value();
  if (xv.rows() != g.num_nodes()) throw ShapeError("neighbor_msd: " + xv.shape_string() + " rows differ from n");
  const std::size_t n = xv.rows(), f = xv.cols();
  Tensor out(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t deg = g.degree(i);
    if (deg == 0) continue;
    double acc = 0.0;
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
      const std::size_t j = g.arc_target(a);
      for (std::size_t c = 0; c < f; ++c) {
        const double diff = xv(i, c) - xv(j, c);
        acc += diff * diff;
      }
    }
    out[i] = acc / static_cast<double>(deg);
  }
  return x.tape->record(std::move(out), {x}, [x, &g, n, f](Tape& t, const std::vector<double>& gr) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t deg = g.degree(i);
      if (deg == 0 || gr[i] == 0.0) continue;
      const double c2 = 2.0 * gr[i] / static_cast<double>(deg);
      for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
        const std::size_t j = g.arc_target(a);
        for (std::size_t c = 0; c < f; ++c) {
          const double diff = c2 * (xv(i, c) - xv(j, c));
          gx[i * f + c] += diff;
          gx[j * f + c] -= diff;
        }
      }
    }
  });
}

/// Per-node softmax over incident arcs of score_i + target_j, (num_arcs x 1).
/// `source` and `target` are (n x 1).
inline Var edge_attention(Var source, Var target, const Graph& g) {
  const Tensor& sv = source.value();
  const Tensor& tv = target.value();
  const std::size_t n = g.num_nodes();
  detail::require_shape(sv, n, 1, "edge_attention source");
  detail::require_shape(tv, n, 1, "edge_attention target");
  Tensor out(g.num_arcs(), 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.degree(i) == 0) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) mx = std::max(mx, sv[i] + tv[g.arc_target(a)]);
    double z = 0.0;
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
      out[a] = std::exp(sv[i] + tv[g.arc_target(a)] - mx);
      z += out[a];
    }
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) out[a] /= z;
  }
  Var m = source.tape->record(std::move(out), {source, target}, nullptr);
  source.tape->set_backward(m, [source, target, m, &g, n](Tape& t, const std::vector<double>& gr) {
    const Tensor& mv = t.value(m);
    std::vector<double>* gs = t.needs_grad(source) ? &t.grad(source) : nullptr;
    std::vector<double>* gt = t.needs_grad(target) ? &t.grad(target) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) dot += mv[a] * gr[a];
      for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
        const double dl = mv[a] * (gr[a] - dot);
        if (gs) (*gs)[i] += dl;
        if (gt) (*gt)[g.arc_target(a)] += dl;
      }
    }
  });
  return m;
}

/// l_i = sum over arcs a of i of w_a * x_j, (n x F).
inline Var edge_aggregate(Var w, Var x, const Graph& g) {
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  const std::size_t n = g.num_nodes(), f = xv.cols();
  detail::require_shape(wv, g.num_arcs(), 1, "edge_aggregate weights");
  if (xv.rows() != n) throw ShapeError("edge_aggregate: " + xv.shape_string() + " rows differ from n");
  Tensor out(n, f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
      const std::size_t j = g.arc_target(a);
      for (std::size_t c = 0; c < f; ++c) out(i, c) += wv[a] * xv(j, c);
    }
  return w.tape->record(std::move(out), {w, x}, [w, x, &g, n, f](Tape& t, const std::vector<double>& gr) {
    const Tensor& wv = t.value(w);
    const Tensor& xv = t.value(x);
    std::vector<double>* gw = t.needs_grad(w) ? &t.grad(w) : nullptr;
    std::vector<double>* gx = t.needs_grad(x) ? &t.grad(x) : nullptr;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
        const std::size_t j = g.arc_target(a);
        double dot = 0.0;
        for (std::size_t c = 0; c < f; ++c) {
          dot += gr[i * f + c] * xv(j, c);
          if (gx) (*gx)[j * f + c] += wv[a] * gr[i * f + c];
        }
        if (gw) (*gw)[a] += dot;
      }
  });
}

/// Mean over neighbors (D^-1 A x); isolated nodes give 0.
inline Var neighbor_mean(Var x, const Graph& g) {
  Tensor w(g.num_arcs(), 1);
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) w[a] = 1.0 / static_cast<double>(g.degree(i));
  return edge_aggregate(x.tape->constant(std::move(w)), x, g);
}

/// 1/x elementwise, with 0 where x == 0 (and no gradient there).
inline Var reciprocal_or_zero(Var x) {
  Tensor out = detail::map(x.value(), [](double v) { return v == 0.0 ? 0.0 : 1.0 / v; });
  return x.tape->record(std::move(out), {x}, [x](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad(x);
    const Tensor& xv = t.value(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] != 0.0) gx[i] -= g[i] / (xv[i] * xv[i]);
  });
}

}  // namespace hugnn
