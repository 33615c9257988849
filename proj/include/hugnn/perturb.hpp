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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/graph.hpp"
#include "hugnn/model.hpp"
#include "hugnn/rng.hpp"

namespace hugnn {

enum class PerturbKind { drop_edge, feature_noise, greedy_flip, feature_pgd };

inline std::string_view kind_name(PerturbKind k) {
  switch (k) {
    case PerturbKind::drop_edge: return "drop_edge";
    case PerturbKind::feature_noise: return "feature_noise";
    case PerturbKind::greedy_flip: return "greedy_flip";
    case PerturbKind::feature_pgd: return "feature_pgd";
  }
  return "drop_edge";
}

inline PerturbKind parse_kind(std::string_view s) {
  if (s == "drop_edge") return PerturbKind::drop_edge;
  if (s == "feature_noise") return PerturbKind::feature_noise;
  if (s == "greedy_flip") return PerturbKind::greedy_flip;
  if (s == "feature_pgd") return PerturbKind::feature_pgd;
  throw ConfigError("unknown perturbation kind '" + std::string(s) + "'");
}

/// Human-readable label; greedy_flip is a heuristic structural attack, not a meta-gradient one.
inline std::string_view kind_label(PerturbKind k) {
  switch (k) {
    case PerturbKind::drop_edge: return "DropEdge";
    case PerturbKind::feature_noise: return "feature l2 noise (random direction)";
    case PerturbKind::greedy_flip: return "greedy cross-class edge insertion (surrogate structural attack)";
    case PerturbKind::feature_pgd: return "feature PGD (model gradient, l2 ball)";
  }
  return "";
}

struct PerturbSpec {
  PerturbKind kind = PerturbKind::drop_edge;
  double intensity = 0.0;  ///< edge ratio, or relative l2 radius for feature kinds
  std::uint64_t seed = 0;

  void validate() const {
    const bool structural = kind == PerturbKind::drop_edge || kind == PerturbKind::greedy_flip;
    if (structural && !(intensity >= 0.0 && intensity < 1.0)) {
      throw ContractError(std::string(kind_name(kind)) + ": ratio must lie in [0, 1), got " + std::to_string(intensity));
    }
    if (!structural && !(intensity >= 0.0)) throw ContractError("feature epsilon must be >= 0");
  }
};

/// Removes floor(ratio * m) uniformly chosen edges.
inline DatasetBundle drop_edges(const DatasetBundle& b, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ContractError("drop_edge: ratio must lie in [0, 1)");
  const auto& e = b.graph.edges();
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(e.size())));
  DatasetBundle out = b;
  if (k == 0) return out;
  std::vector<std::size_t> idx(e.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());
  std::vector<bool> drop(e.size(), false);
  for (std::size_t q = 0; q < k; ++q) drop[idx[q]] = true;
  std::vector<Edge> kept;
  kept.reserve(e.size() - k);
  for (std::size_t q = 0; q < e.size(); ++q)
    if (!drop[q]) kept.push_back(e[q]);
  out.graph = Graph::from_pairs(b.n(), kept);
  return out;
}

/// Adds to every row a random-direction vector of l2 norm exactly eps * |x_i|.
inline DatasetBundle feature_noise(const DatasetBundle& b, double eps, Rng& rng) {
  if (!(eps >= 0.0)) throw ContractError("feature_noise: epsilon must be >= 0");
  DatasetBundle out = b;
  if (eps == 0.0) return out;
  const std::size_t d = b.d();
  std::vector<double> dir(d);
  for (std::size_t i = 0; i < b.n(); ++i) {
    double xn = 0.0;
    for (std::size_t j = 0; j < d; ++j) xn += b.features(i, j) * b.features(i, j);
    xn = std::sqrt(xn);
    double dn = 0.0;
    do {
      dn = 0.0;
      for (double& v : dir) {
        v = rng.normal();
        dn += v * v;
      }
    } while (dn == 0.0);
    dn = std::sqrt(dn);
    for (std::size_t j = 0; j < d; ++j) out.features(i, j) += eps * xn * dir[j] / dn;
  }
  return out;
}

/// Repeatedly links the two highest-degree nodes (ties by lower id) that carry
/// different labels and are not yet adjacent, until floor(ratio * m) edges are added.
/// Degrees are updated after every insertion.
inline DatasetBundle greedy_flip(const DatasetBundle& b, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ContractError("greedy_flip: ratio must lie in [0, 1)");
  const std::size_t n = b.n();
  bool cross = false;
  for (std::size_t i = 0; i < n && !cross; ++i)
    for (std::size_t j = i + 1; j < n && !cross; ++j)
      cross = b.labels[i] != kNoLabel && b.labels[j] != kNoLabel && b.labels[i] != b.labels[j];
  if (!cross) throw ContractError("greedy_flip: no cross-class pair exists");
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(b.m())));
  DatasetBundle out = b;
  if (k == 0) return out;

  std::set<Edge> edges(b.graph.edges().begin(), b.graph.edges().end());
  std::vector<std::size_t> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = b.graph.degree(i);
  std::vector<std::size_t> order(n);
  for (std::size_t added = 0; added < k; ++added) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&deg](std::size_t a, std::size_t c) { return deg[a] > deg[c]; });
    bool found = false;
    for (std::size_t x = 0; x < n && !found; ++x) {
      const std::size_t u = order[x];
      if (b.labels[u] == kNoLabel) continue;
      for (std::size_t y = x + 1; y < n; ++y) {
        const std::size_t v = order[y];
        if (b.labels[v] == kNoLabel || b.labels[v] == b.labels[u]) continue;
        const Edge e{static_cast<std::uint32_t>(std::min(u, v)), static_cast<std::uint32_t>(std::max(u, v))};
        if (edges.count(e)) continue;
        edges.insert(e);
        ++deg[u];
        ++deg[v];
        found = true;
        break;
      }
    }
    if (!found) throw ContractError("greedy_flip: ran out of unlinked cross-class pairs");
  }
  out.graph = Graph::from_pairs(n, std::vector<Edge>(edges.begin(), edges.end()));
  return out;
}

/// Projected gradient ascent on the model's NLL over labelled nodes: `steps` steps of
/// size eps/steps * |x_i| along the per-row normalised gradient, projected to the
/// per-row ball of radius eps * |x_i|.
inline DatasetBundle feature_pgd(const DatasetBundle& b, double eps, ModelParams& params, const Ablation& ablate,
                                 std::size_t steps = 5) {
  if (!(eps >= 0.0)) throw ContractError("feature_pgd: epsilon must be >= 0");
  DatasetBundle out = b;
  if (eps == 0.0 || steps == 0) return out;
  const std::size_t n = b.n(), d = b.d();
  std::vector<bool> labelled(n);
  for (std::size_t i = 0; i < n; ++i) labelled[i] = b.labels[i] != kNoLabel;
  std::vector<double> radius(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += b.features(i, j) * b.features(i, j);
    radius[i] = eps * std::sqrt(s);
  }
  Tensor delta(n, d);
  for (std::size_t step = 0; step < steps; ++step) {
    Tensor x = b.features;
    for (std::size_t q = 0; q < x.size(); ++q) x[q] += delta[q];
    Tape t;
    ForwardOptions opt;
    opt.input = t.variable(x);
    ForwardResult fr = forward(t, b.graph, x, params, ablate, opt);
    t.backward(loss_nll(fr.probs, b.labels, labelled), true);
    const std::vector<double>& g = t.grad_of(*opt.input);
    for (std::size_t i = 0; i < n; ++i) {
      double gn = 0.0;
      for (std::size_t j = 0; j < d; ++j) gn += g[i * d + j] * g[i * d + j];
      gn = std::sqrt(gn);
      if (gn > 0.0) {
        const double s = radius[i] / static_cast<double>(steps) / gn;
        for (std::size_t j = 0; j < d; ++j) delta(i, j) += s * g[i * d + j];
      }
      double dn = 0.0;
      for (std::size_t j = 0; j < d; ++j) dn += delta(i, j) * delta(i, j);
      dn = std::sqrt(dn);
      if (dn > radius[i] && dn > 0.0)
        for (std::size_t j = 0; j < d; ++j) delta(i, j) *= radius[i] / dn;
    }
    for (Tensor* p : params.all()) p->clear_grad();
  }
  for (std::size_t q = 0; q < delta.size(); ++q) out.features[q] += delta[q];
  return out;
}

/// Applies `spec` to a copy of `b`. feature_pgd needs the attacked model's parameters.
inline DatasetBundle perturb(const DatasetBundle& b, const PerturbSpec& spec, ModelParams* params = nullptr,
                             const Ablation& ablate = {}) {
  spec.validate();
  Rng rng = Rng(spec.seed).derive("perturb");
  switch (spec.kind) {
    case PerturbKind::drop_edge: return drop_edges(b, spec.intensity, rng);
    case PerturbKind::feature_noise: return feature_noise(b, spec.intensity, rng);
    case PerturbKind::greedy_flip: return greedy_flip(b, spec.intensity);
    case PerturbKind::feature_pgd:
      if (!params) throw ContractError("feature_pgd needs model parameters");
      return feature_pgd(b, spec.intensity, *params, ablate);
  }
  return b;
}

}  // namespace hugnn
