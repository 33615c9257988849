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

#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/graph.hpp"
#include "hugnn/rng.hpp"

namespace hugnn {

struct SynthSpec {
  std::size_t n = 1000;
  std::size_t num_classes = 2;
  std::size_t degree = 10;
  double p = 0.5;  ///< probability that a drawn neighbor shares the node's class
  double feature_noise = 0.5;
};

/// Random graph with controlled edge homophily.
///
/// Labels are balanced and shuffled. Every node draws `degree` partners: with
/// probability p from its own class, otherwise from a uniformly chosen other class.
/// Partners already linked are redrawn a bounded number of times. Features are the
/// one-hot class vector plus N(0, feature_noise^2) noise, so d = num_classes.
/// 20 train nodes per class; the rest is halved into val and test.
inline DatasetBundle synth_heterophily(const SynthSpec& s, Rng& rng) {
  if (s.n == 0 || s.num_classes == 0) throw ContractError("synth: n and num_classes must be positive");
  if (!(s.p >= 0.0 && s.p <= 1.0)) throw ContractError("synth: p must lie in [0, 1]");
  if (!(s.feature_noise >= 0.0)) throw ContractError("synth: feature_noise must be non-negative");
  if (s.num_classes < 2 && s.p < 1.0) throw ContractError("synth: p < 1 needs at least two classes");
  const std::size_t smallest = s.n / s.num_classes;
  if (s.degree >= smallest) {
    throw ContractError("synth: degree " + std::to_string(s.degree) + " infeasible with class size " +
                        std::to_string(smallest));
  }
  const std::size_t n = s.n, c = s.num_classes;

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);
  rng.shuffle(labels.begin(), labels.end());
  std::vector<std::vector<std::uint32_t>> members(c);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<std::uint32_t>(i));

  std::vector<std::vector<std::uint32_t>> linked(n);
  auto is_linked = [&](std::size_t u, std::size_t v) {
    for (auto w : linked[u])
      if (w == v) return true;
    return false;
  };
  std::vector<Edge> pairs;
  pairs.reserve(n * s.degree);
  constexpr int kRetries = 32;
  for (std::size_t i = 0; i < n; ++i) {
    const auto yi = static_cast<std::size_t>(labels[i]);
    for (std::size_t k = 0; k < s.degree; ++k) {
      std::size_t cls = yi;
      if (!(rng.uniform() < s.p)) {
        cls = static_cast<std::size_t>(rng.uniform_int(c - 1));
        if (cls >= yi) ++cls;
      }
      const auto& pool = members[cls];
      for (int attempt = 0; attempt < kRetries; ++attempt) {
        const std::size_t j = pool[rng.uniform_int(pool.size())];
        if (j == i || is_linked(i, j)) continue;
        linked[i].push_back(static_cast<std::uint32_t>(j));
        linked[j].push_back(static_cast<std::uint32_t>(i));
        pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        break;
      }
    }
  }

  DatasetBundle b;
  char name[64];
  std::snprintf(name, sizeof name, "synth_p%.2f", s.p);
  b.name = name;
  b.num_classes = c;
  b.graph = Graph::from_pairs(n, pairs);
  b.labels = labels;
  b.features = Tensor(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double base = static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0;
      b.features(i, j) = base + s.feature_noise * rng.normal();
    }
  }
  b.roles = make_split(b.labels, c, rng, 20, true);
  return b;
}

}  // namespace hugnn
