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
#include <optional>
#include <string>
#include <vector>

#include "hugnn/adam.hpp"
#include "hugnn/error.hpp"
#include "hugnn/graph.hpp"
#include "hugnn/graph_ops.hpp"
#include "hugnn/losses.hpp"
#include "hugnn/ops.hpp"
#include "hugnn/params.hpp"
#include "hugnn/rng.hpp"
#include "hugnn/tape.hpp"

namespace hugnn {

// ---------------------------------------------------------------------------
// Building blocks. Every function records on the tape of its first argument; the
// Graph passed in must outlive that tape.
// ---------------------------------------------------------------------------

/// u = sigmoid(w * s + b) with f_u = [w, b].
inline Var apply_fu(Var s, Var fu) {
  detail::require_shape(fu.value(), 1, 2, "f_u");
  Var w = slice_cols(fu, 0, 1);
  Var b = slice_cols(fu, 1, 1);
  return sigmoid(add_scalar(mul_scalar(s, w), b));
}

inline double apply_fu(double s, const Tensor& fu) { return sigmoid(fu[0] * s + fu[1]); }

struct LocalOut {
  Var projected;  ///< tilde h, n x F'
  Var u;          ///< n x 1
  Var m;          ///< num_arcs x 1
  Var low;        ///< l, n x F'
  Var high;       ///< d = tilde h - l
  Var p;          ///< cosine weight, n x 1
  Var h;          ///< n x F'
};

/// One uncertainty-aware local layer. u is computed from the projections before
/// attention; attention logits are a_src.th_i + a_dst.th_j - u_j (no -u_j when
/// `ablate_uncertainty`).
inline LocalOut local_layer(Var h_in, const Graph& g, Var w_o, Var att, Var fu, bool ablate_uncertainty) {
  const std::size_t f = w_o.rows();
  detail::require_shape(att.value(), 1, 2 * f, "attention vector");
  LocalOut o;
  o.projected = matmul_bt(h_in, w_o);
  o.u = apply_fu(neighbor_msd(o.projected, g), fu);
  Var src = matmul_bt(o.projected, slice_cols(att, 0, f));
  Var dst = matmul_bt(o.projected, slice_cols(att, f, f));
  Var target = ablate_uncertainty ? dst : sub(dst, o.u);
  o.m = edge_attention(src, target, g);
  o.low = edge_aggregate(o.m, o.projected, g);
  o.high = sub(o.projected, o.low);
  o.p = cosine_rows(o.projected, o.low);
  Var mixed = add(scale_rows(o.low, o.p), scale_rows(o.high, affine(o.p, -1.0, 1.0)));
  o.h = relu(add(o.projected, mixed));
  return o;
}

struct AssignOut {
  Var probs;  ///< softmax(h W_M^T), n x M
  Var soft;   ///< relaxed Gumbel sample (equals probs at evaluation)
  Var z;      ///< one-hot rows (or `soft` in relaxed mode)
};

/// Community assignment. `noise == nullptr` selects the noiseless argmax of probs.
inline AssignOut assign_communities(Var h, Var w_m, double temperature, const Tensor* noise, bool relaxed = false) {
  AssignOut o;
  o.probs = row_softmax(matmul_bt(h, w_m));
  GumbelSample s = gumbel_softmax_st(o.probs, temperature, noise);
  o.soft = noise ? s.soft : o.probs;
  o.z = relaxed ? s.soft : s.hard;
  return o;
}

struct PoolOut {
  Var h_c;  ///< M x F'
  Var u_c;  ///< M x 1
  std::vector<double> sizes;
  std::vector<bool> empty;
};

/// Mean pooling of projected members, h_C = mean_{j in C} W_C h_j, and
/// u_C = f_u(mean_{j in C} |h_j - h_C|^2). Empty communities get h_C = 0, u_C = 1.
inline PoolOut pool_communities(Var h, Var z, Var w_c, Var fu) {
  Tape& t = *h.tape;
  const std::size_t n = h.rows(), m = z.cols();
  if (z.rows() != n) throw ShapeError("pool_communities: z rows differ from h rows");
  PoolOut o;
  Var ones = t.constant(Tensor(n, 1, 1.0));
  Var count = matmul_at(z, ones);
  Var inv = reciprocal_or_zero(count);
  o.h_c = scale_rows(matmul_at(z, matmul_bt(h, w_c)), inv);
  Var member_center = matmul(z, o.h_c);
  Var dev = sq_norm_rows(sub(h, member_center));
  Var msd = scale_rows(matmul_at(z, dev), inv);
  Var raw = apply_fu(msd, fu);
  Tensor keep(m, 1), fill(m, 1);
  o.sizes.resize(m);
  o.empty.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    o.sizes[k] = count.value()[k];
    o.empty[k] = count.value()[k] == 0.0;
    keep[k] = o.empty[k] ? 0.0 : 1.0;
    fill[k] = o.empty[k] ? 1.0 : 0.0;
  }
  o.u_c = add(mask(raw, keep), t.constant(std::move(fill)));
  return o;
}

struct GlobalOut {
  Var h_g;  ///< 1 x F'
  Var u_g;  ///< 1 x 1
};

/// h_G = mean over non-empty communities of W_G h_C, u_G = f_u(mean |h_G - h_C|^2).
inline GlobalOut global_integrate(Var h_c, const std::vector<bool>& empty, Var w_g, Var fu) {
  const std::size_t m = h_c.rows();
  if (empty.size() != m) throw ShapeError("global_integrate: empty flags length differs from communities");
  std::size_t k = 0;
  for (bool e : empty) k += !e;
  if (k == 0) throw ContractError("global_integrate: all communities are empty");
  Tensor sel(m, 1);
  for (std::size_t j = 0; j < m; ++j) sel[j] = empty[j] ? 0.0 : 1.0 / static_cast<double>(k);
  Var selv = h_c.tape->constant(std::move(sel));
  GlobalOut o;
  o.h_g = matmul_at(selv, matmul_bt(h_c, w_g));
  Var dev = sq_norm_rows(sub(broadcast_rows(o.h_g, m), h_c));
  o.u_g = apply_fu(matmul_at(selv, dev), fu);
  return o;
}

struct FuseOut {
  Var lambda;     ///< n x k over the active candidates, in order self, community, global
  Tensor lambda3; ///< n x 3 with zero columns for removed candidates
  Var h_final;
  Var logits;
  Var probs;
};

/// Per-node fusion of self, community and global embeddings followed by the
/// softmax classifier. Absent candidates are passed as std::nullopt.
/// `h_comm`/`u_comm` are per node (the node's own community), `h_glob`/`u_glob` 1 x F' / 1 x 1.
inline FuseOut fuse_and_classify(Var h, Var u, std::optional<Var> h_comm, std::optional<Var> u_comm,
                                 std::optional<Var> h_glob, std::optional<Var> u_glob, Var a_fuse, Var w_f,
                                 bool ablate_uncertainty) {
  const std::size_t n = h.rows(), f = h.cols();
  detail::require_shape(a_fuse.value(), 1, 2 * f, "a_fuse");
  Var a_self = slice_cols(a_fuse, 0, f);
  Var a_other = slice_cols(a_fuse, f, f);
  Var base = matmul_bt(h, a_self);
  std::vector<Var> logits;
  std::vector<Var> sources;
  std::vector<int> slot;
  auto push = [&](Var alpha, Var uv, Var hv, int s) {
    logits.push_back(ablate_uncertainty ? alpha : sub(alpha, uv));
    sources.push_back(hv);
    slot.push_back(s);
  };
  push(add(base, matmul_bt(h, a_other)), u, h, 0);
  if (h_comm) push(add(base, matmul_bt(*h_comm, a_other)), *u_comm, *h_comm, 1);
  if (h_glob) {
    Var alpha = add_scalar(base, matmul_bt(*h_glob, a_other));
    push(alpha, broadcast_rows(*u_glob, n), broadcast_rows(*h_glob, n), 2);
  }
  FuseOut o;
  o.lambda = row_softmax(concat_cols(logits));
  o.lambda3 = Tensor(n, 3);
  std::optional<Var> acc;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    Var lk = slice_cols(o.lambda, k, 1);
    Var term = scale_rows(sources[k], lk);
    acc = acc ? add(*acc, term) : term;
    for (std::size_t i = 0; i < n; ++i) o.lambda3(i, static_cast<std::size_t>(slot[k])) = o.lambda.value()(i, k);
  }
  o.h_final = *acc;
  o.logits = matmul_bt(o.h_final, w_f);
  o.probs = row_softmax(o.logits);
  return o;
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

/// Random draws consumed by one training-mode forward pass. Injecting them makes
/// the pass a deterministic function of the parameters.
struct ForwardNoise {
  Tensor gumbel;                ///< n x M
  std::vector<Tensor> dropout;  ///< one n x F' mask per gap between local layers, entries 0 or 1/(1-rate)
};

inline ForwardNoise sample_noise(std::size_t n, std::size_t communities, std::size_t hidden, std::size_t layers,
                                 double dropout, Rng& gumbel_rng, Rng& dropout_rng) {
  ForwardNoise z;
  z.gumbel = gumbel_noise(n, communities, gumbel_rng);
  const double keep = 1.0 - dropout;
  for (std::size_t l = 1; l < layers; ++l) {
    Tensor m(n, hidden);
    for (double& v : m.values()) v = dropout_rng.uniform() < keep ? 1.0 / keep : 0.0;
    z.dropout.push_back(std::move(m));
  }
  return z;
}

/// Noise with rows relabelled by `perm` (old row i moves to perm[i]).
inline ForwardNoise permute_noise(const ForwardNoise& z, const std::vector<std::size_t>& perm) {
  auto move_rows = [&perm](const Tensor& t) {
    Tensor out(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) out(perm[i], j) = t(i, j);
    return out;
  };
  ForwardNoise out;
  out.gumbel = move_rows(z.gumbel);
  for (const Tensor& d : z.dropout) out.dropout.push_back(move_rows(d));
  return out;
}

struct ForwardOptions {
  bool train = false;
  double temperature = 1.0;
  /// Training-mode noise; when null in training mode, no dropout and no Gumbel noise are applied.
  const ForwardNoise* noise = nullptr;
  /// Soft assignments in the forward pass instead of one-hot (finite-difference checks only).
  bool relaxed = false;
  /// Input handle to use instead of a constant copy of the features (for input gradients).
  std::optional<Var> input;
};

/// Plain-value snapshot of one forward pass.
struct ModelState {
  std::vector<Tensor> h;  ///< per layer, n x F'
  std::vector<Tensor> u;  ///< per layer, n x 1
  std::vector<Tensor> m;  ///< per layer, num_arcs x 1
  Tensor u0;              ///< initial uncertainty, n x 1 (empty when not provided)
  Tensor assign_probs;    ///< n x M
  Tensor z;               ///< n x M
  std::vector<int> community;  ///< assigned community per node, -1 when ablated
  Tensor h_c;                  ///< M x F'
  Tensor u_c;                  ///< M x 1
  std::vector<double> community_size;
  std::vector<bool> community_empty;
  Tensor h_g;                  ///< 1 x F'
  double u_g = 0.0;
  Tensor lambda;               ///< n x 3 (self, community, global)
  Tensor probs;                ///< n x C
};

struct ForwardResult {
  Var probs;    ///< n x C
  Var u_final;  ///< last local layer uncertainty, n x 1
  ModelState state;
};

/// Handles to the parameters bound on a tape.
struct BoundParams {
  std::vector<Var> w_o, att;
  Var w_m, w_c, w_g, w_f, a_fuse, f_u;

  static BoundParams bind(Tape& t, ModelParams& p) {
    BoundParams b;
    for (std::size_t l = 0; l < p.layers(); ++l) {
      b.w_o.push_back(t.parameter(p.w_o[l]));
      b.att.push_back(t.parameter(p.att[l]));
    }
    b.w_m = t.parameter(p.w_m);
    b.w_c = t.parameter(p.w_c);
    b.w_g = t.parameter(p.w_g);
    b.w_f = t.parameter(p.w_f);
    b.a_fuse = t.parameter(p.a_fuse);
    b.f_u = t.parameter(p.f_u);
    return b;
  }
};

/// Full forward pass: local layers, community assignment and pooling, global node,
/// fusion and classification. `features` and `g` must outlive the tape.
inline ForwardResult forward(Tape& t, const Graph& g, const Tensor& features, ModelParams& params,
                             const Ablation& ablate, const ForwardOptions& opt, const Tensor* u0 = nullptr) {
  if (features.rows() != g.num_nodes()) throw ShapeError("forward: feature rows differ from n");
  if (features.cols() != params.input_dim()) {
    throw ShapeError("forward: features have " + std::to_string(features.cols()) + " columns, model expects " +
                     std::to_string(params.input_dim()));
  }
  const std::size_t n = g.num_nodes();
  const ForwardNoise* noise = opt.train ? opt.noise : nullptr;
  BoundParams bp = BoundParams::bind(t, params);
  ForwardResult r;
  ModelState& st = r.state;
  if (u0) st.u0 = *u0;

  Var h = opt.input ? *opt.input : t.constant_ref(features);
  Var u;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    if (l > 0 && noise) {
      if (noise->dropout.size() < l) throw ContractError("forward: missing dropout mask for layer " + std::to_string(l));
      h = mask(h, noise->dropout[l - 1]);
    }
    LocalOut lo = local_layer(h, g, bp.w_o[l], bp.att[l], bp.f_u, ablate.uncertainty);
    h = lo.h;
    u = lo.u;
    st.h.push_back(lo.h.value());
    st.u.push_back(lo.u.value());
    st.m.push_back(lo.m.value());
  }

  std::optional<Var> h_comm, u_comm, h_glob, u_glob;
  st.community.assign(n, -1);
  if (!ablate.community) {
    const Tensor* gumbel = noise ? &noise->gumbel : nullptr;
    AssignOut as = assign_communities(h, bp.w_m, opt.temperature, gumbel, opt.relaxed);
    PoolOut po = pool_communities(h, as.z, bp.w_c, bp.f_u);
    st.assign_probs = as.probs.value();
    st.z = as.z.value();
    for (std::size_t i = 0; i < n; ++i) st.community[i] = static_cast<int>(argmax_row(st.z, i));
    st.h_c = po.h_c.value();
    st.u_c = po.u_c.value();
    st.community_size = po.sizes;
    st.community_empty = po.empty;
    h_comm = matmul(as.z, po.h_c);
    u_comm = matmul(as.z, po.u_c);
    if (!ablate.global) {
      GlobalOut go = global_integrate(po.h_c, po.empty, bp.w_g, bp.f_u);
      h_glob = go.h_g;
      u_glob = go.u_g;
    }
  } else if (!ablate.global) {
    // Without communities every node acts as its own group for the global node.
    GlobalOut go = global_integrate(h, std::vector<bool>(n, false), bp.w_g, bp.f_u);
    h_glob = go.h_g;
    u_glob = go.u_g;
  }
  if (h_glob) {
    st.h_g = h_glob->value();
    st.u_g = u_glob->value()[0];
  }

  FuseOut fo = fuse_and_classify(h, u, h_comm, u_comm, h_glob, u_glob, bp.a_fuse, bp.w_f, ablate.uncertainty);
  st.lambda = fo.lambda3;
  st.probs = fo.probs.value();
  r.probs = fo.probs;
  r.u_final = u;
  return r;
}

/// Evaluation-mode forward on a scratch tape.
inline ModelState predict(const DatasetBundle& b, ModelParams& params, const Ablation& ablate,
                          const Tensor* u0 = nullptr) {
  Tape t;
  ForwardOptions opt;
  return forward(t, b.graph, b.features, params, ablate, opt, u0).state;
}

// ---------------------------------------------------------------------------
// Uncertainty initialisation
// ---------------------------------------------------------------------------

inline Var init_classifier_probs(Tape& t, const Tensor& features, InitClassifier& c) {
  Var x = t.constant_ref(features);
  Var hidden = relu(add_row(matmul_bt(x, t.parameter(c.w1)), t.parameter(c.b1)));
  return row_softmax(add_row(matmul_bt(hidden, t.parameter(c.w2)), t.parameter(c.b2)));
}

/// Trains the feature-only classifier on the train nodes (Adam, no weight decay).
inline InitClassifier train_init_classifier(const DatasetBundle& b, Rng& rng, std::size_t epochs = 100,
                                            double lr = 1e-3, std::size_t hidden = 64) {
  const std::vector<bool> train = b.mask(Role::train);
  if (count_mask(train) == 0) throw ContractError("init_uncertainty: no labelled training nodes");
  InitClassifier c = InitClassifier::init(b.d(), b.num_classes, hidden, rng);
  AdamState adam(lr, 0.0);
  for (std::size_t e = 0; e < epochs; ++e) {
    for (Tensor* p : c.all()) p->zero_grad();
    Tape t;
    Var probs = init_classifier_probs(t, b.features, c);
    t.backward(loss_nll(probs, b.labels, train));
    adam.update(c.all());
  }
  for (Tensor* p : c.all()) p->clear_grad();
  return c;
}

/// u0_i = 1 - max softmax output of the frozen classifier, (n x 1).
inline Tensor init_uncertainty(const Tensor& features, InitClassifier& c) {
  Tape t;
  const Tensor& p = init_classifier_probs(t, features, c).value();
  Tensor u(p.rows(), 1);
  for (std::size_t i = 0; i < p.rows(); ++i) u[i] = 1.0 - p(i, argmax_row(p, i));
  return u;
}

}  // namespace hugnn
