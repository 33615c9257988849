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
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/rng.hpp"
#include "hugnn/tensor.hpp"

namespace hugnn {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Undirected simple graph. Edges are stored once with u < v, sorted; the
/// adjacency is kept in CSR form with sorted neighbor lists.
class Graph {
 public:
  Graph() = default;

  /// Builds a graph from arbitrary pairs: (v,u) and (u,v) are merged, self-loops
  /// and duplicates dropped. The number of dropped pairs is written to `dropped`.
  static Graph from_pairs(std::size_t n, const std::vector<Edge>& pairs, std::size_t* dropped = nullptr) {
    std::vector<Edge> e;
    e.reserve(pairs.size());
    std::size_t bad = 0;
    for (auto [u, v] : pairs) {
      if (u >= n || v >= n) {
        throw ContractError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range for n=" +
                            std::to_string(n));
      }
      if (u == v) {
        ++bad;
        continue;
      }
      e.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(e.begin(), e.end());
    const std::size_t before = e.size();
    e.erase(std::unique(e.begin(), e.end()), e.end());
    bad += before - e.size();
    if (dropped) *dropped = bad;
    Graph g;
    g.n_ = n;
    g.edges_ = std::move(e);
    g.build_csr();
    return g;
  }

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  /// Number of directed arcs, 2m.
  std::size_t num_arcs() const noexcept { return adj_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  std::size_t max_degree() const {
    std::size_t d = 0;
    for (std::size_t i = 0; i < n_; ++i) d = std::max(d, degree(i));
    return d;
  }

  /// Arc range of node i: arcs [arc_begin(i), arc_end(i)) point to neighbors(i).
  std::size_t arc_begin(std::size_t i) const { return offsets_[i]; }
  std::size_t arc_end(std::size_t i) const { return offsets_[i + 1]; }
  std::uint32_t arc_target(std::size_t a) const { return adj_[a]; }

  std::vector<std::uint32_t> neighbors(std::size_t i) const {
    return {adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
            adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1])};
  }

  bool has_edge(std::size_t u, std::size_t v) const {
    if (u >= n_ || v >= n_) return false;
    auto first = adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]);
    auto last = adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]);
    return std::binary_search(first, last, static_cast<std::uint32_t>(v));
  }

  /// Same graph with nodes renamed by `perm` (old id i becomes perm[i]).
  Graph permuted(const std::vector<std::size_t>& perm) const {
    std::vector<Edge> e;
    e.reserve(edges_.size());
    for (auto [u, v] : edges_)
      e.emplace_back(static_cast<std::uint32_t>(perm[u]), static_cast<std::uint32_t>(perm[v]));
    return from_pairs(n_, e);
  }

  friend bool operator==(const Graph& a, const Graph& b) { return a.n_ == b.n_ && a.edges_ == b.edges_; }

 private:
  void build_csr() {
    offsets_.assign(n_ + 1, 0);
    for (auto [u, v] : edges_) {
      ++offsets_[u + 1];
      ++offsets_[v + 1];
    }
    for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
    adj_.assign(2 * edges_.size(), 0);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (auto [u, v] : edges_) {
      adj_[fill[u]++] = v;
      adj_[fill[v]++] = u;
    }
    for (std::size_t i = 0; i < n_; ++i) {
      std::sort(adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    }
  }

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> adj_;
};

enum class Role : std::uint8_t { train, val, test, unlabeled };

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::train: return "train";
    case Role::val: return "val";
    case Role::test: return "test";
    case Role::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline bool parse_role(std::string_view s, Role& out) {
  if (s == "train") out = Role::train;
  else if (s == "val") out = Role::val;
  else if (s == "test") out = Role::test;
  else if (s == "unlabeled") out = Role::unlabeled;
  else return false;
  return true;
}

/// Label value for nodes without a known class.
inline constexpr int kNoLabel = -1;

struct DatasetBundle {
  std::string name;
  Graph graph;
  Tensor features;          // n x d
  std::vector<int> labels;  // class id in [0, num_classes) or kNoLabel
  std::vector<Role> roles;
  std::size_t num_classes = 0;

  std::size_t n() const noexcept { return graph.num_nodes(); }
  std::size_t m() const noexcept { return graph.num_edges(); }
  std::size_t d() const noexcept { return features.cols(); }

  std::vector<std::size_t> nodes_with(Role r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles.size(); ++i)
      if (roles[i] == r) out.push_back(i);
    return out;
  }

  std::vector<bool> mask(Role r) const {
    std::vector<bool> out(roles.size());
    for (std::size_t i = 0; i < roles.size(); ++i) out[i] = roles[i] == r;
    return out;
  }

  bool fully_labeled() const {
    return std::all_of(labels.begin(), labels.end(), [](int y) { return y != kNoLabel; });
  }

  /// Throws ContractError when the bundle's parts disagree.
  void validate() const {
    const std::size_t nn = n();
    if (features.rows() != nn) throw ContractError("features have " + std::to_string(features.rows()) + " rows, n=" + std::to_string(nn));
    if (labels.size() != nn) throw ContractError("labels have " + std::to_string(labels.size()) + " entries, n=" + std::to_string(nn));
    if (roles.size() != nn) throw ContractError("roles have " + std::to_string(roles.size()) + " entries, n=" + std::to_string(nn));
    if (num_classes == 0) throw ContractError("num_classes must be positive");
    for (std::size_t i = 0; i < nn; ++i) {
      const int y = labels[i];
      if (y != kNoLabel && (y < 0 || static_cast<std::size_t>(y) >= num_classes)) {
        throw ContractError("label " + std::to_string(y) + " of node " + std::to_string(i) + " out of range");
      }
      if (roles[i] == Role::train && y == kNoLabel) {
        throw ContractError("train node " + std::to_string(i) + " has no label");
      }
    }
    if (!features.all_finite()) throw ContractError("non-finite feature value");
  }

  /// Same bundle with nodes renamed by `perm` (old id i becomes perm[i]).
  DatasetBundle permuted(const std::vector<std::size_t>& perm) const {
    DatasetBundle b;
    b.name = name;
    b.num_classes = num_classes;
    b.graph = graph.permuted(perm);
    b.features = Tensor(features.rows(), features.cols());
    b.labels.assign(labels.size(), kNoLabel);
    b.roles.assign(roles.size(), Role::unlabeled);
    for (std::size_t i = 0; i < n(); ++i) {
      for (std::size_t j = 0; j < d(); ++j) b.features(perm[i], j) = features(i, j);
      b.labels[perm[i]] = labels[i];
      b.roles[perm[i]] = roles[i];
    }
    return b;
  }
};

/// Standard split: `per_class` random train nodes per class, then 500 val and 1000 test
/// when enough labelled nodes remain, otherwise the remainder halved (val gets the extra one).
/// Nodes without a label stay unlabeled. With `halve_rest` the remainder is always halved.
inline std::vector<Role> make_split(const std::vector<int>& labels, std::size_t num_classes, Rng& rng,
                                    std::size_t per_class = 20, bool halve_rest = false) {
  std::vector<Role> roles(labels.size(), Role::unlabeled);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoLabel) order.push_back(i);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::size_t> taken(num_classes, 0);
  std::vector<std::size_t> rest;
  for (std::size_t i : order) {
    auto& t = taken[static_cast<std::size_t>(labels[i])];
    if (t < per_class) {
      roles[i] = Role::train;
      ++t;
    } else {
      rest.push_back(i);
    }
  }
  std::size_t n_val, n_test;
  if (!halve_rest && rest.size() >= 1500) {
    n_val = 500;
    n_test = 1000;
  } else {
    n_val = (rest.size() + 1) / 2;
    n_test = rest.size() - n_val;
  }
  for (std::size_t k = 0; k < n_val; ++k) roles[rest[k]] = Role::val;
  for (std::size_t k = n_val; k < n_val + n_test; ++k) roles[rest[k]] = Role::test;
  return roles;
}

}  // namespace hugnn
