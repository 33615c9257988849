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

// Fixed-point probe for the uncertainty update U <- F(U).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "hugnn/graph.hpp"
#include "hugnn/model.hpp"
#include "hugnn/rng.hpp"
#include "json.hpp"

namespace hugnn {

using UncertaintyMap = std::function<std::vector<double>(const std::vector<double>&)>;

inline double max_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Neighbor averaging u_i <- mean of u over N(i) (plus i itself with self-loops).
/// Isolated nodes keep their value.
inline std::vector<double> reference_update(const Graph& g, const std::vector<double>& u, bool self_loops) {
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    double s = self_loops ? u[i] : 0.0;
    std::size_t k = self_loops ? 1 : 0;
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
      s += u[g.arc_target(a)];
      ++k;
    }
    out[i] = k ? s / static_cast<double>(k) : u[i];
  }
  return out;
}

/// The model's uncertainty update with projections frozen: attention over N(i) is
/// gated by exp(-U_j) and F(U)_i = f_u(sum_j m_ij(U) |th_i - th_j|^2).
/// Isolated nodes map to f_u(0).
class ModelUncertaintyMap {
 public:
  ModelUncertaintyMap(const Graph& g, Tensor projected, const Tensor& att, const Tensor& fu)
      : g_(&g), fu_(fu) {
    const std::size_t n = g.num_nodes(), f = projected.cols();
    src_.assign(n, 0.0);
    dst_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < f; ++c) {
        src_[i] += att[c] * projected(i, c);
        dst_[i] += att[f + c] * projected(i, c);
      }
    dist_.assign(g.num_arcs(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
        const std::size_t j = g.arc_target(a);
        for (std::size_t c = 0; c < f; ++c) {
          const double diff = projected(i, c) - projected(j, c);
          dist_[a] += diff * diff;
        }
      }
  }

  std::vector<double> operator()(const std::vector<double>& u) const {
    const Graph& g = *g_;
    std::vector<double> out(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) mx = std::max(mx, logit(i, a, u));
      double z = 0.0, s = 0.0;
      for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
        const double w = std::exp(logit(i, a, u) - mx);
        z += w;
        s += w * dist_[a];
      }
      out[i] = apply_fu(z > 0.0 ? s / z : 0.0, fu_);
    }
    return out;
  }

 private:
  double logit(std::size_t i, std::size_t a, const std::vector<double>& u) const {
    const std::size_t j = g_->arc_target(a);
    return src_[i] + dst_[j] - u[j];
  }

  const Graph* g_;
  Tensor fu_;
  std::vector<double> src_, dst_, dist_;
};

/// Builds the model map from the last local layer's projections of an evaluation pass.
inline ModelUncertaintyMap model_uncertainty_map(const DatasetBundle& b, ModelParams& params) {
  ModelState s = predict(b, params, Ablation{});
  const std::size_t last = params.layers() - 1;
  const Tensor& input = last == 0 ? b.features : s.h[last - 1];
  Tensor projected(b.n(), params.hidden());
  kernel::mm_nt(input.data(), params.w_o[last].data(), projected.data(), b.n(), input.cols(), params.hidden());
  return ModelUncertaintyMap(b.graph, std::move(projected), params.att[last], params.f_u);
}

struct ContractionConfig {
  std::size_t trials = 20;
  std::size_t iters = 100;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  bool reference = false;  ///< neighbor-averaging map instead of the model map
  bool self_loops = true;  ///< reference mode only
};

struct ContractionReport {
  ContractionConfig config;
  std::vector<std::vector<double>> steps;  ///< per trial, |U(t+1) - U(t)|_inf per iteration
  std::vector<double> lipschitz;           ///< per trial, |F(U) - F(U')| / |U - U'| for a random pair
  std::vector<bool> trial_converged;
  std::vector<std::size_t> iterations;     ///< iterations used per trial
  bool converged = false;                  ///< every trial converged
  double max_final_step = 0.0;
  double max_lipschitz = 0.0;
};

/// Iterates `f` from random starting points in [0,1]^n.
inline ContractionReport contraction_probe(const UncertaintyMap& f, std::size_t n, const ContractionConfig& cfg) {
  ContractionReport r;
  r.config = cfg;
  Rng rng = Rng(cfg.seed).derive("contraction");
  r.converged = true;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    std::vector<double> u(n), v(n);
    for (double& x : u) x = rng.uniform();
    for (double& x : v) x = rng.uniform();
    const double in = max_norm_diff(u, v);
    const double outd = max_norm_diff(f(u), f(v));
    const double ratio = in > 0.0 ? outd / in : 0.0;
    r.lipschitz.push_back(ratio);
    r.max_lipschitz = std::max(r.max_lipschitz, ratio);

    std::vector<double> steps;
    bool ok = false;
    std::size_t it = 0;
    while (it < cfg.iters) {
      std::vector<double> next = f(u);
      const double step = max_norm_diff(next, u);
      steps.push_back(step);
      u = std::move(next);
      ++it;
      if (step < cfg.tol) {
        ok = true;
        break;
      }
    }
    r.max_final_step = std::max(r.max_final_step, steps.empty() ? 0.0 : steps.back());
    r.steps.push_back(std::move(steps));
    r.trial_converged.push_back(ok);
    r.iterations.push_back(it);
    r.converged = r.converged && ok;
  }
  return r;
}

inline ContractionReport contraction_probe(const DatasetBundle& b, ModelParams& params, ContractionConfig cfg) {
  if (cfg.reference) {
    const Graph& g = b.graph;
    const bool loops = cfg.self_loops;
    return contraction_probe([&g, loops](const std::vector<double>& u) { return reference_update(g, u, loops); },
                             b.n(), cfg);
  }
  ModelUncertaintyMap map = model_uncertainty_map(b, params);
  return contraction_probe([&map](const std::vector<double>& u) { return map(u); }, b.n(), cfg);
}

inline nlohmann::json to_json(const ContractionReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (std::size_t k = 0; k < r.steps.size(); ++k) {
    trials.push_back({{"converged", static_cast<bool>(r.trial_converged[k])},
                      {"iterations", r.iterations[k]},
                      {"lipschitz", r.lipschitz[k]},
                      {"steps", r.steps[k]}});
  }
  return {{"mode", r.config.reference ? "reference" : "model"},
          {"self_loops", r.config.reference ? r.config.self_loops : false},
          {"trials", trials},
          {"converged", r.converged},
          {"max_final_step", r.max_final_step},
          {"max_lipschitz", r.max_lipschitz},
          {"tolerance", r.config.tol},
          {"max_iterations", r.config.iters}};
}

}  // namespace hugnn
