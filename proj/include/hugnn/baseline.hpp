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

// Mean-aggregation baseline: H' = relu(D^-1 A H W1^T), Y = softmax(D^-1 A H' W2^T).

#include <cstddef>
#include <vector>

#include "hugnn/adam.hpp"
#include "hugnn/graph.hpp"
#include "hugnn/graph_ops.hpp"
#include "hugnn/losses.hpp"
#include "hugnn/metrics.hpp"
#include "hugnn/params.hpp"

namespace hugnn {

struct BaselineParams {
  Tensor w1;  ///< H x d
  Tensor w2;  ///< C x H

  static BaselineParams init(std::size_t in_dim, std::size_t num_classes, std::size_t hidden, Rng& rng) {
    return {glorot(hidden, in_dim, rng), glorot(num_classes, hidden, rng)};
  }
  std::vector<Tensor*> all() { return {&w1, &w2}; }
};

/// `dropout_mask` (n x H), when given, multiplies the hidden layer.
inline Var baseline_forward(Tape& t, const Graph& g, const Tensor& features, BaselineParams& p,
                            const Tensor* dropout_mask = nullptr) {
  Var x = t.constant_ref(features);
  Var h = relu(matmul_bt(neighbor_mean(x, g), t.parameter(p.w1)));
  if (dropout_mask) h = mask(h, *dropout_mask);
  return row_softmax(matmul_bt(neighbor_mean(h, g), t.parameter(p.w2)));
}

struct BaselineResult {
  BaselineParams best;
  std::size_t best_epoch = 0;
  double best_val_acc = -1.0;
  double test_acc = 0.0;
  double test_ece = 0.0;
};

/// NLL training with Adam and early stopping on validation accuracy; test metrics
/// come from the best-validation weights.
inline BaselineResult train_baseline(const DatasetBundle& b, const HyperParams& hp, std::size_t patience = 50) {
  Rng root(hp.seed);
  Rng init_rng = root.derive("init");
  Rng drop_rng = root.derive("dropout");
  BaselineParams p = BaselineParams::init(b.d(), b.num_classes, hp.hidden_dim, init_rng);
  AdamState adam(hp.lr, hp.weight_decay);
  const auto train = b.mask(Role::train), val = b.mask(Role::val), test = b.mask(Role::test);
  BaselineResult r;
  r.best = p;
  std::size_t since = 0;
  const double keep = 1.0 - hp.dropout;
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    Tensor dm(b.n(), hp.hidden_dim);
    for (double& v : dm.values()) v = drop_rng.uniform() < keep ? 1.0 / keep : 0.0;
    for (Tensor* t : p.all()) t->zero_grad();
    {
      Tape t;
      Var probs = baseline_forward(t, b.graph, b.features, p, &dm);
      t.backward(loss_nll(probs, b.labels, train));
    }
    clip_grad_norm(p.all(), 5.0);
    adam.update(p.all());
    Tape t;
    const Tensor probs = baseline_forward(t, b.graph, b.features, p).value();
    const double va = count_mask(val) ? accuracy(probs, b.labels, val) : accuracy(probs, b.labels, train);
    if (va > r.best_val_acc) {
      r.best_val_acc = va;
      r.best = p;
      r.best_epoch = e;
      since = 0;
    } else if (++since >= patience) {
      break;
    }
  }
  Tape t;
  const Tensor probs = baseline_forward(t, b.graph, b.features, r.best).value();
  r.test_acc = accuracy(probs, b.labels, test);
  r.test_ece = ece(probs, b.labels, test).ece;
  for (Tensor* q : r.best.all()) q->clear_grad();
  return r;
}

}  // namespace hugnn
