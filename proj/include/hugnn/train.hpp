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

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hugnn/adam.hpp"
#include "hugnn/error.hpp"
#include "hugnn/losses.hpp"
#include "hugnn/metrics.hpp"
#include "hugnn/model.hpp"
#include "hugnn/state_json.hpp"
#include "json.hpp"

namespace hugnn {

/// Multiplicative beta2 controller driven by validation ECE.
struct Beta2Schedule {
  bool enabled = true;
  std::size_t check_every = 10;
  bool repeat = true;  ///< false applies the rule only once, at the first check
  double up = 1.2;
  double down = 0.8;
  double ece_hi = 0.05;
  double ece_lo = 0.02;

  void validate() const {
    if (check_every == 0) throw ConfigError("beta2 check interval must be >= 1");
    if (!(up > 1.0 && down > 0.0 && down < 1.0)) throw ConfigError("need up > 1 > down > 0");
  }

  /// The rule itself: up-scale when ECE is high, down-scale when low, else keep.
  double next(double beta2, double ece_value) const {
    if (ece_value > ece_hi) return beta2 * up;
    if (ece_value < ece_lo) return beta2 * down;
    return beta2;
  }

  /// True when the rule fires after `epoch` (0-based) has finished.
  bool fires_after(std::size_t epoch) const {
    if (!enabled) return false;
    const std::size_t done = epoch + 1;
    if (done % check_every != 0) return false;
    return repeat || done == check_every;
  }
};

struct TrainConfig {
  HyperParams hp;
  std::size_t patience = 50;
  Beta2Schedule beta2_schedule;
  double clip_norm = 5.0;
  std::size_t init_epochs = 100;
  /// When set, beta1/beta2 are rescaled before training so each auxiliary term
  /// contributes `warmup_ratio*` of the NLL at step 0.
  bool calibration_warmup = false;
  double warmup_ratio1 = 0.3;
  double warmup_ratio2 = 0.1;

  void validate() const {
    hp.validate();
    beta2_schedule.validate();
    if (patience == 0) throw ConfigError("patience must be >= 1");
    if (hp.epochs == 0) throw ConfigError("epochs must be >= 1");
  }
};

struct MetricsRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;
  double train_acc = 0.0, val_acc = 0.0, test_acc = 0.0;
  double ece = 0.0;  ///< validation ECE
  double mean_u_local = 0.0, mean_u_comm = 0.0, u_global = 0.0;
  double temperature = 0.0, beta1 = 0.0, beta2 = 0.0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
};

inline nlohmann::json to_json(const MetricsRecord& r) {
  return {{"epoch", r.epoch},       {"nll", r.loss.nll},         {"sharp", r.loss.sharp},
          {"calib", r.loss.calib},  {"total", r.loss.total},     {"train_acc", r.train_acc},
          {"val_acc", r.val_acc},   {"test_acc", r.test_acc},    {"ece", r.ece},
          {"mean_u_local", r.mean_u_local}, {"mean_u_comm", r.mean_u_comm}, {"u_global", r.u_global},
          {"temperature", r.temperature},   {"beta1", r.beta1}, {"beta2", r.beta2},
          {"seed", r.seed},         {"wall_ms", r.wall_ms}};
}

/// Geometric interpolation from temp_start (first epoch) to temp_end (last epoch).
inline double temperature_at(const HyperParams& hp, std::size_t epoch) {
  if (hp.epochs <= 1) return hp.temp_start;
  const double frac = static_cast<double>(epoch) / static_cast<double>(hp.epochs - 1);
  return hp.temp_start * std::pow(hp.temp_end / hp.temp_start, frac);
}

/// beta_k = ratio_k * nll / aux_k; a zero auxiliary term leaves its beta unchanged.
inline std::pair<double, double> scale_betas(double nll, double sharp, double calib, double ratio1, double ratio2,
                                             double beta1, double beta2) {
  return {sharp > 0.0 ? ratio1 * nll / sharp : beta1, calib > 0.0 ? ratio2 * nll / calib : beta2};
}

/// Loss terms of one forward pass. Expects `b` to have train nodes.
struct LossVars {
  Var nll, sharp, calib, total;
  LossBreakdown values;
};

inline LossVars composite_loss(const ForwardResult& fr, const DatasetBundle& b, const std::vector<bool>& train,
                               double beta1, double beta2, double tau_calib) {
  LossVars l;
  l.nll = loss_nll(fr.probs, b.labels, train);
  l.sharp = loss_sharp(fr.probs.value(), b.labels, fr.u_final, train);
  l.calib = loss_calib(fr.u_final, tau_calib);
  l.total = add(add(l.nll, scale(l.sharp, beta1)), scale(l.calib, beta2));
  l.values = {l.nll.value()[0], l.sharp.value()[0], l.calib.value()[0], l.total.value()[0]};
  return l;
}

/// One evaluation-mode pass with beta1 = beta2 = 0, then rescaled betas. Deterministic.
inline std::pair<double, double> calibration_warmup(const DatasetBundle& b, ModelParams& params, const TrainConfig& cfg) {
  Tape t;
  ForwardOptions opt;
  ForwardResult fr = forward(t, b.graph, b.features, params, cfg.hp.ablate, opt);
  LossVars l = composite_loss(fr, b, b.mask(Role::train), 0.0, 0.0, cfg.hp.tau_calib);
  return scale_betas(l.values.nll, l.values.sharp, l.values.calib, cfg.warmup_ratio1, cfg.warmup_ratio2,
                     cfg.hp.beta1, cfg.hp.beta2);
}

struct EvalSummary {
  double train_acc = 0.0, val_acc = 0.0, test_acc = 0.0;
  double val_ece = 0.0, test_ece = 0.0;
  double mean_u_local = 0.0, mean_u_comm = 0.0, u_global = 0.0;
};

inline EvalSummary summarize(const DatasetBundle& b, const ModelState& s) {
  EvalSummary e;
  const auto train = b.mask(Role::train), val = b.mask(Role::val), test = b.mask(Role::test);
  if (count_mask(train)) e.train_acc = accuracy(s.probs, b.labels, train);
  if (count_mask(val)) {
    e.val_acc = accuracy(s.probs, b.labels, val);
    e.val_ece = ece(s.probs, b.labels, val).ece;
  }
  if (count_mask(test)) {
    e.test_acc = accuracy(s.probs, b.labels, test);
    e.test_ece = ece(s.probs, b.labels, test).ece;
  }
  const Tensor& u = s.u.back();
  for (double v : u.values()) e.mean_u_local += v;
  e.mean_u_local /= static_cast<double>(u.size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < s.u_c.rows(); ++c) {
    if (s.community_empty[c]) continue;
    e.mean_u_comm += s.u_c[c];
    ++k;
  }
  if (k) e.mean_u_comm /= static_cast<double>(k);
  e.u_global = s.u_g;
  return e;
}

struct TrainResult {
  TrainedModel model;  ///< best-validation weights
  TrainedModel initial;  ///< weights before the first update
  std::vector<MetricsRecord> history;
  std::size_t best_epoch = 0;
  EvalSummary best;     ///< evaluation of the best-validation weights
  EvalSummary at_init;  ///< evaluation of the initial weights
  double final_beta1 = 0.0, final_beta2 = 0.0;
};

namespace train_detail {
inline std::string diagnostic_dump(std::size_t epoch, const LossBreakdown& l, double temperature, ModelParams& p) {
  nlohmann::json j = {{"epoch", epoch},
                      {"nll", l.nll},
                      {"sharp", l.sharp},
                      {"calib", l.calib},
                      {"total", l.total},
                      {"temperature", temperature}};
  nlohmann::json finite = nlohmann::json::object();
  for (auto& [name, t] : p.named()) finite[name] = t->all_finite();
  j["parameters_finite"] = finite;
  return j.dump();
}
}  // namespace train_detail

/// Full training run. `on_epoch` (optional) receives every metrics record as it is produced.
inline TrainResult train(const DatasetBundle& b, const TrainConfig& cfg,
                         const std::function<void(const MetricsRecord&)>& on_epoch = {}) {
  cfg.validate();
  b.validate();
  const HyperParams& hp = cfg.hp;
  const auto train_mask = b.mask(Role::train);
  if (count_mask(train_mask) == 0) throw ContractError("train: bundle has no train nodes");

  Rng root(hp.seed);
  Rng init_rng = root.derive("init");
  Rng gumbel_rng = root.derive("gumbel");
  Rng dropout_rng = root.derive("dropout");
  Rng uinit_rng = root.derive("uncertainty-init");

  TrainResult res;
  TrainedModel& cur = res.initial;
  cur.hp = hp;
  const std::size_t m = hp.communities_for(b.n());
  cur.params = ModelParams::init(b.d(), b.num_classes, m, hp, init_rng);
  cur.init = train_init_classifier(b, uinit_rng, cfg.init_epochs);
  cur.u0 = init_uncertainty(b.features, cur.init);

  double beta1 = hp.beta1, beta2 = hp.beta2;
  if (cfg.calibration_warmup) std::tie(beta1, beta2) = calibration_warmup(b, cur.params, cfg);

  res.at_init = summarize(b, predict(b, cur.params, hp.ablate, &cur.u0));
  res.model = cur;
  res.best = res.at_init;
  double best_val = -1.0;
  std::size_t since = 0;

  TrainedModel live = cur;
  AdamState adam(hp.lr, hp.weight_decay);
  const auto params = live.params.all();
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsRecord rec;
    rec.epoch = e;
    rec.seed = hp.seed;
    rec.temperature = temperature_at(hp, e);
    rec.beta1 = beta1;
    rec.beta2 = beta2;

    ForwardNoise noise = sample_noise(b.n(), m, hp.hidden_dim, hp.layers, hp.dropout, gumbel_rng, dropout_rng);
    live.params.zero_grad();
    {
      Tape t;
      ForwardOptions opt;
      opt.train = true;
      opt.temperature = rec.temperature;
      opt.noise = &noise;
      ForwardResult fr = forward(t, b.graph, b.features, live.params, hp.ablate, opt, &live.u0);
      LossVars l = composite_loss(fr, b, train_mask, beta1, beta2, hp.tau_calib);
      rec.loss = l.values;
      if (!std::isfinite(rec.loss.total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(e),
                           train_detail::diagnostic_dump(e, rec.loss, rec.temperature, live.params));
      }
      t.backward(l.total);
    }
    clip_grad_norm(params, cfg.clip_norm);
    adam.update(params);
    for (Tensor* p : params) {
      if (!p->all_finite()) {
        throw NumericError("non-finite parameter after epoch " + std::to_string(e),
                           train_detail::diagnostic_dump(e, rec.loss, rec.temperature, live.params));
      }
    }

    const EvalSummary ev = summarize(b, predict(b, live.params, hp.ablate, &live.u0));
    rec.train_acc = ev.train_acc;
    rec.val_acc = ev.val_acc;
    rec.test_acc = ev.test_acc;
    rec.ece = ev.val_ece;
    rec.mean_u_local = ev.mean_u_local;
    rec.mean_u_comm = ev.mean_u_comm;
    rec.u_global = ev.u_global;
    if (cfg.beta2_schedule.fires_after(e)) beta2 = cfg.beta2_schedule.next(beta2, ev.val_ece);

    if (ev.val_acc > best_val) {
      best_val = ev.val_acc;
      res.model = live;
      res.best = ev;
      res.best_epoch = e;
      since = 0;
    } else {
      ++since;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (since >= cfg.patience) break;
  }
  for (Tensor* p : res.model.params.all()) p->clear_grad();
  for (Tensor* p : res.initial.params.all()) p->clear_grad();
  res.final_beta1 = beta1;
  res.final_beta2 = beta2;
  return res;
}

}  // namespace hugnn
