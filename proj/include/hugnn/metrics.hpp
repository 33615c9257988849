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
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/ops.hpp"
#include "hugnn/tensor.hpp"

namespace hugnn {

/// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
inline double accuracy(const Tensor& probs, const std::vector<int>& labels, const std::vector<bool>& mask) {
  if (labels.size() != probs.rows() || mask.size() != probs.rows()) throw ShapeError("accuracy: length mismatch");
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!mask[i]) continue;
    ++total;
    correct += static_cast<int>(argmax_row(probs, i)) == labels[i];
  }
  if (total == 0) throw ContractError("accuracy: empty mask");
  return static_cast<double>(correct) / static_cast<double>(total);
}

struct EceBin {
  double confidence = 0.0;  ///< mean confidence of the bin (0 when empty)
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct EceReport {
  std::vector<EceBin> bins;
  double ece = 0.0;
};

/// Bin index of a confidence in [0, 1] for `bins` equal-width bins; 1.0 lands in the last bin.
inline std::size_t ece_bin(double confidence, std::size_t bins) {
  const auto b = static_cast<std::size_t>(confidence * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

/// Expected calibration error over the masked rows with equal-width confidence bins.
/// An empty mask gives ece = 0.
inline EceReport ece(const Tensor& probs, const std::vector<int>& labels, const std::vector<bool>& mask,
                     std::size_t bins = 15) {
  if (bins == 0) throw ContractError("ece: bins must be positive");
  if (labels.size() != probs.rows() || mask.size() != probs.rows()) throw ShapeError("ece: length mismatch");
  EceReport r;
  r.bins.resize(bins);
  std::vector<double> conf_sum(bins, 0.0), hit(bins, 0.0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!mask[i]) continue;
    const std::size_t k = argmax_row(probs, i);
    const double conf = probs(i, k);
    const std::size_t b = ece_bin(conf, bins);
    conf_sum[b] += conf;
    hit[b] += static_cast<int>(k) == labels[i] ? 1.0 : 0.0;
    ++r.bins[b].count;
    ++total;
  }
  if (total == 0) return r;
  for (std::size_t b = 0; b < bins; ++b) {
    EceBin& e = r.bins[b];
    if (e.count == 0) continue;
    e.confidence = conf_sum[b] / static_cast<double>(e.count);
    e.accuracy = hit[b] / static_cast<double>(e.count);
    r.ece += static_cast<double>(e.count) / static_cast<double>(total) * std::abs(e.accuracy - e.confidence);
  }
  return r;
}

}  // namespace hugnn
