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

#include <cmath>
#include <cstddef>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/graph.hpp"

namespace hugnn {

namespace detail {
inline void require_full_labels(const DatasetBundle& b, const char* op) {
  if (b.labels.size() != b.n()) throw ContractError(std::string(op) + ": label count differs from n");
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    if (b.labels[i] == kNoLabel) throw ContractError(std::string(op) + ": node " + std::to_string(i) + " is unlabeled");
  }
}
}  // namespace detail

/// Fraction of edges whose endpoints share a label.
inline double homophily_ratio(const DatasetBundle& b) {
  detail::require_full_labels(b, "homophily_ratio");
  if (b.m() == 0) throw ContractError("homophily_ratio: graph has no edges");
  std::size_t same = 0;
  for (auto [u, v] : b.graph.edges()) same += b.labels[u] == b.labels[v];
  return static_cast<double>(same) / static_cast<double>(b.m());
}

/// Fraction of ordered pairs (i, k), k two hops from i but neither i nor a direct
/// neighbor of i, where k shares i's label.
inline double two_hop_homophily(const DatasetBundle& b) {
  detail::require_full_labels(b, "two_hop_homophily");
  const Graph& g = b.graph;
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> stamp(n, static_cast<std::size_t>(-1));
  std::size_t pairs = 0, same = 0;
  for (std::size_t i = 0; i < n; ++i) {
    stamp[i] = i;
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) stamp[g.arc_target(a)] = i;
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
      const std::size_t j = g.arc_target(a);
      for (std::size_t c = g.arc_begin(j); c < g.arc_end(j); ++c) {
        const std::size_t k = g.arc_target(c);
        if (stamp[k] == i) continue;
        stamp[k] = i;
        ++pairs;
        same += b.labels[k] == b.labels[i];
      }
    }
  }
  if (pairs == 0) throw ContractError("two_hop_homophily: graph has no two-hop pairs");
  return static_cast<double>(same) / static_cast<double>(pairs);
}

/// Participation ratio 1 / sum_j m_ij^2 of the per-arc weights of every node.
/// `arc_weights` is indexed like the graph's arcs. Isolated nodes get 0.
inline std::vector<double> effective_degree(const Graph& g, const std::vector<double>& arc_weights) {
  if (arc_weights.size() != g.num_arcs()) {
    throw ContractError("effective_degree: expected " + std::to_string(g.num_arcs()) + " arc weights, got " +
                        std::to_string(arc_weights.size()));
  }
  std::vector<double> out(g.num_nodes(), 0.0);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (g.degree(i) == 0) continue;
    double s = 0.0, sq = 0.0;
    bool uniform = true;
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) {
      if (arc_weights[a] < 0.0) throw ContractError("effective_degree: negative weight at node " + std::to_string(i));
      uniform = uniform && arc_weights[a] == arc_weights[g.arc_begin(i)];
      s += arc_weights[a];
      sq += arc_weights[a] * arc_weights[a];
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ContractError("effective_degree: weights of node " + std::to_string(i) + " sum to " + std::to_string(s));
    }
    // Equal weights give the degree exactly, without rounding from the squares.
    out[i] = uniform ? static_cast<double>(g.degree(i)) : 1.0 / sq;
  }
  return out;
}

struct HomophilyReport {
  double h_one_hop = 0.0;
  double h_two_hop = 0.0;
  std::vector<std::size_t> degree_histogram;  ///< count of nodes per degree 0..max_degree
  std::size_t max_degree = 0;
};

inline HomophilyReport homophily_report(const DatasetBundle& b) {
  HomophilyReport r;
  r.h_one_hop = homophily_ratio(b);
  r.h_two_hop = two_hop_homophily(b);
  r.max_degree = b.graph.max_degree();
  r.degree_histogram.assign(r.max_degree + 1, 0);
  for (std::size_t i = 0; i < b.n(); ++i) ++r.degree_histogram[b.graph.degree(i)];
  return r;
}

}  // namespace hugnn
