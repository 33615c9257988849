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

// Central finite-difference checks of tape gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hugnn/model.hpp"
#include "hugnn/tape.hpp"
#include "hugnn/train.hpp"

namespace hugnn {

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  std::size_t entries = 0;
  std::vector<std::pair<std::string, double>> per_param;  ///< max relative error per parameter
};

/// `loss` records a scalar on the given tape, reading the listed parameters via
/// Tape::parameter. Every entry of every parameter is checked.
inline GradcheckReport gradcheck(const std::function<Var(Tape&)>& loss,
                                 const std::vector<std::pair<std::string, Tensor*>>& params, double h = 1e-5) {
  for (auto& [name, p] : params) p->zero_grad();
  {
    Tape t;
    t.backward(loss(t));
  }
  auto eval = [&loss] {
    Tape t;
    return loss(t).value()[0];
  };
  GradcheckReport r;
  for (auto& [name, p] : params) {
    const std::vector<double> analytic = p->grad;
    double worst = 0.0;
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double keep = (*p)[i];
      (*p)[i] = keep + h;
      const double up = eval();
      (*p)[i] = keep - h;
      const double down = eval();
      (*p)[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      ++r.entries;
      worst = std::max(worst, err);
      if (r.worst_param.empty() || err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_param = name;
        r.worst_index = i;
        r.worst_analytic = analytic[i];
        r.worst_numeric = numeric;
      }
    }
    r.per_param.emplace_back(name, worst);
    p->clear_grad();
  }
  return r;
}

/// Finite-difference check of the full training loss on `b`, with soft community
/// assignments in the forward pass and fixed noise so the loss is smooth and deterministic.
inline GradcheckReport model_gradcheck(const DatasetBundle& b, ModelParams& params, const HyperParams& hp,
                                       std::uint64_t seed, double h = 1e-5) {
  Rng root(seed);
  Rng grng = root.derive("gumbel");
  Rng drng = root.derive("dropout");
  const ForwardNoise noise =
      sample_noise(b.n(), params.communities(), params.hidden(), params.layers(), hp.dropout, grng, drng);
  const auto train = b.mask(Role::train);
  auto loss = [&](Tape& t) {
    ForwardOptions opt;
    opt.train = true;
    opt.temperature = hp.temp_start;
    opt.noise = &noise;
    opt.relaxed = true;
    ForwardResult fr = forward(t, b.graph, b.features, params, hp.ablate, opt);
    return composite_loss(fr, b, train, hp.beta1, hp.beta2, hp.tau_calib).total;
  };
  return gradcheck(loss, params.named(), h);
}

}  // namespace hugnn
