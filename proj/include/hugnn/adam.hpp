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
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/tensor.hpp"

namespace hugnn {

/// Bias-corrected Adam. Weight decay is classic L2: `weight_decay * p` is added
/// to the gradient before the moment updates.
struct AdamState {
  double lr = 1e-3;
  double beta_m = 0.9;
  double beta_v = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  AdamState(double lr_, double weight_decay_) : lr(lr_), weight_decay(weight_decay_) {}

  /// Updates every parameter in place from its `grad` slot. Parameters without a
  /// gradient are treated as having zero gradient.
  void update(const std::vector<Tensor*>& params) {
    if (m.empty()) {
      for (const Tensor* p : params) {
        m.emplace_back(p->rows(), p->cols());
        v.emplace_back(p->rows(), p->cols());
      }
    }
    if (m.size() != params.size()) throw ContractError("adam: parameter count changed between steps");
    if (step >= (std::int64_t{1} << 31) - 1) throw ContractError("adam: step counter overflow");
    ++step;
    const double bc_m = 1.0 - std::pow(beta_m, static_cast<double>(step));
    const double bc_v = 1.0 - std::pow(beta_v, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& p = *params[k];
      if (!p.same_shape(m[k])) {
        throw ContractError("adam: parameter " + std::to_string(k) + " is " + p.shape_string() +
                            ", moments are " + m[k].shape_string());
      }
      if (p.has_grad() && p.grad.size() != p.size()) throw ContractError("adam: gradient size mismatch");
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = (p.has_grad() ? p.grad[i] : 0.0) + weight_decay * p[i];
        m[k][i] = beta_m * m[k][i] + (1.0 - beta_m) * g;
        v[k][i] = beta_v * v[k][i] + (1.0 - beta_v) * g * g;
        const double mh = m[k][i] / bc_m;
        const double vh = v[k][i] / bc_v;
        p[i] -= lr * mh / (std::sqrt(vh) + eps);
      }
    }
  }
};

/// Scales all gradients so their joint l2 norm is at most `max_norm`. Returns the norm before scaling.
inline double clip_grad_norm(const std::vector<Tensor*>& params, double max_norm) {
  double sq = 0.0;
  for (const Tensor* p : params)
    for (double g : p->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor* p : params)
      for (double& g : p->grad) g *= s;
  }
  return norm;
}

}  // namespace hugnn
