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
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/rng.hpp"
#include "hugnn/tensor.hpp"

namespace hugnn {

/// Components switched off for ablation runs. Flags combine.
struct Ablation {
  bool community = false;
  bool global = false;
  bool uncertainty = false;

  bool none() const noexcept { return !community && !global && !uncertainty; }

  /// "none", "community", "global", "uncertainty", or a '+'/',' separated combination.
  static Ablation parse(std::string_view s) {
    Ablation a;
    if (s.empty() || s == "none") return a;
    std::size_t pos = 0;
    while (pos <= s.size()) {
      std::size_t end = s.find_first_of("+,", pos);
      if (end == std::string_view::npos) end = s.size();
      const std::string_view tok = s.substr(pos, end - pos);
      if (tok == "community") a.community = true;
      else if (tok == "global") a.global = true;
      else if (tok == "uncertainty") a.uncertainty = true;
      else throw ConfigError("unknown ablation '" + std::string(tok) + "'");
      pos = end + 1;
    }
    return a;
  }

  std::string to_string() const {
    if (none()) return "none";
    std::string s;
    auto add = [&s](const char* t) {
      if (!s.empty()) s += '+';
      s += t;
    };
    if (community) add("community");
    if (global) add("global");
    if (uncertainty) add("uncertainty");
    return s;
  }

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct HyperParams {
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t communities = 0;  ///< 0 selects max(2, round(sqrt(n)))
  double temp_start = 1.0;
  double temp_end = 0.1;
  double dropout = 0.5;
  double tau_calib = 0.1;
  double beta1 = 0.3;
  double beta2 = 0.1;
  double lr = 1e-3;
  double weight_decay = 5e-4;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  Ablation ablate;

  void validate() const {
    if (hidden_dim == 0) throw ConfigError("hidden_dim must be >= 1");
    if (layers == 0) throw ConfigError("layers must be >= 1");
    if (!(temp_end > 0.0 && temp_end <= temp_start)) throw ConfigError("need 0 < temp_end <= temp_start");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(tau_calib >= 0.0)) throw ConfigError("tau_calib must be >= 0");
    if (!(beta1 >= 0.0) || !(beta2 >= 0.0)) throw ConfigError("beta1 and beta2 must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  }

  std::size_t communities_for(std::size_t n) const {
    if (communities > 0) return communities;
    const auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    return r < 2 ? 2 : r;
  }
};

/// Glorot-uniform fill for a (fan_out x fan_in) weight.
inline Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

inline Tensor uniform_fill(std::size_t rows, std::size_t cols, double limit, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

/// Trainable weights. Projections are stored (out x in) and applied as h * W^T.
struct ModelParams {
  std::vector<Tensor> w_o;  ///< per layer, F' x F_in
  std::vector<Tensor> att;  ///< per layer, 1 x 2F' (source half, target half)
  Tensor w_m;               ///< M x F'
  Tensor w_c;               ///< F' x F'
  Tensor w_g;               ///< F' x F'
  Tensor w_f;               ///< C x F'
  Tensor a_fuse;            ///< 1 x 2F'
  Tensor f_u;               ///< 1 x 2: weight and bias of sigmoid(w * s + b)

  std::size_t layers() const noexcept { return w_o.size(); }
  std::size_t hidden() const noexcept { return w_c.rows(); }
  std::size_t communities() const noexcept { return w_m.rows(); }
  std::size_t classes() const noexcept { return w_f.rows(); }
  std::size_t input_dim() const noexcept { return w_o.empty() ? 0 : w_o.front().cols(); }

  static ModelParams init(std::size_t in_dim, std::size_t num_classes, std::size_t num_communities,
                          const HyperParams& hp, Rng& rng) {
    ModelParams p;
    const std::size_t f = hp.hidden_dim;
    for (std::size_t l = 0; l < hp.layers; ++l) {
      p.w_o.push_back(glorot(f, l == 0 ? in_dim : f, rng));
      p.att.push_back(uniform_fill(1, 2 * f, 0.1, rng));
    }
    p.w_m = glorot(num_communities, f, rng);
    p.w_c = glorot(f, f, rng);
    p.w_g = glorot(f, f, rng);
    p.w_f = glorot(num_classes, f, rng);
    p.a_fuse = uniform_fill(1, 2 * f, 0.1, rng);
    p.f_u = Tensor::rows_of({{1.0, 0.0}});
    return p;
  }

  /// Stable (name, tensor) listing used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Tensor*>> named() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t l = 0; l < w_o.size(); ++l) {
      out.emplace_back("W_O." + std::to_string(l), &w_o[l]);
      out.emplace_back("a." + std::to_string(l), &att[l]);
    }
    out.emplace_back("W_M", &w_m);
    out.emplace_back("W_C", &w_c);
    out.emplace_back("W_G", &w_g);
    out.emplace_back("W_F", &w_f);
    out.emplace_back("a_fuse", &a_fuse);
    out.emplace_back("f_u", &f_u);
    return out;
  }

  std::vector<Tensor*> all() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
  }

  void zero_grad() {
    for (Tensor* t : all()) t->zero_grad();
  }
};

/// Feature-only two-layer MLP used to initialise node uncertainty.
struct InitClassifier {
  Tensor w1;  ///< H x d
  Tensor b1;  ///< 1 x H
  Tensor w2;  ///< C x H
  Tensor b2;  ///< 1 x C

  static InitClassifier init(std::size_t in_dim, std::size_t num_classes, std::size_t hidden, Rng& rng) {
    InitClassifier c;
    c.w1 = glorot(hidden, in_dim, rng);
    c.b1 = Tensor(1, hidden);
    c.w2 = glorot(num_classes, hidden, rng);
    c.b2 = Tensor(1, num_classes);
    return c;
  }

  std::vector<std::pair<std::string, Tensor*>> named() {
    return {{"init.W1", &w1}, {"init.b1", &b1}, {"init.W2", &w2}, {"init.b2", &b2}};
  }
  std::vector<Tensor*> all() { return {&w1, &b1, &w2, &b2}; }
};

}  // namespace hugnn
