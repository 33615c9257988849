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
#include "hugnn/ops.hpp"
#include "hugnn/tape.hpp"

namespace hugnn {

struct LossBreakdown {
  double nll = 0.0;
  double sharp = 0.0;
  double calib = 0.0;
  double total = 0.0;
};

inline std::size_t count_mask(const std::vector<bool>& mask) {
  std::size_t k = 0;
  for (bool b : mask) k += b;
  return k;
}

/// Mean of -log max(p_i[y_i], 1e-12) over masked nodes, (1 x 1).
inline Var loss_nll(Var probs, const std::vector<int>& labels, const std::vector<bool>& mask) {
  const Tensor& pv = probs.value();
  const std::size_t n = pv.rows(), c = pv.cols();
  if (labels.size() != n || mask.size() != n) throw ShapeError("loss_nll: labels/mask length differs from rows");
  const std::size_t k = count_mask(mask);
  if (k == 0) throw ContractError("loss_nll: empty mask");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) throw ContractError("loss_nll: masked node without a valid label");
    acc -= std::log(std::max(pv(i, static_cast<std::size_t>(labels[i])), kProbabilityFloor));
  }
  const double inv = 1.0 / static_cast<double>(k);
  return probs.tape->record(Tensor(1, 1, acc * inv), {probs}, [probs, labels, mask, inv, c](Tape& t, const std::vector<double>& g) {
    auto& gp = t.grad(probs);
    const Tensor& pv = t.value(probs);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const std::size_t idx = i * c + static_cast<std::size_t>(labels[i]);
      if (pv[idx] > kProbabilityFloor) gp[idx] -= g[0] * inv / pv[idx];
    }
  });
}

/// Mean over masked nodes of 1(argmax p_i == y_i) * u_i. The indicator is a constant.
inline Var loss_sharp(const Tensor& probs, const std::vector<int>& labels, Var u, const std::vector<bool>& mask) {
  const std::size_t n = probs.rows();
  detail::require_shape(u.value(), n, 1, "loss_sharp u");
  if (labels.size() != n || mask.size() != n) throw ShapeError("loss_sharp: labels/mask length differs from rows");
  const std::size_t k = count_mask(mask);
  if (k == 0) throw ContractError("loss_sharp: empty mask");
  Tensor w(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i] && static_cast<int>(argmax_row(probs, i)) == labels[i]) w[i] = 1.0 / static_cast<double>(k);
  return matmul_at(u.tape->constant(std::move(w)), u);
}

/// Mean over all nodes of max(0, tau - u_i)^2.
inline Var loss_calib(Var u, double tau) {
  Var gap = relu(affine(u, -1.0, tau));
  return mean_all(hadamard(gap, gap));
}

}  // namespace hugnn
