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

// JSON views of hyper-parameters and model state, and model checkpoints.

#include <filesystem>
#include <string>
#include <vector>

#include "hugnn/checkpoint.hpp"
#include "hugnn/model.hpp"
#include "hugnn/params.hpp"
#include "json.hpp"

namespace hugnn {

inline nlohmann::json to_json(const HyperParams& hp) {
  return {{"hidden_dim", hp.hidden_dim}, {"layers", hp.layers},        {"communities", hp.communities},
          {"temp_start", hp.temp_start}, {"temp_end", hp.temp_end},    {"dropout", hp.dropout},
          {"tau_calib", hp.tau_calib},   {"beta1", hp.beta1},          {"beta2", hp.beta2},
          {"lr", hp.lr},                 {"weight_decay", hp.weight_decay}, {"epochs", hp.epochs},
          {"seed", hp.seed},             {"ablate", hp.ablate.to_string()}};
}

/// Missing keys keep their defaults.
inline HyperParams hyper_from_json(const nlohmann::json& j) {
  HyperParams hp;
  hp.hidden_dim = j.value("hidden_dim", hp.hidden_dim);
  hp.layers = j.value("layers", hp.layers);
  hp.communities = j.value("communities", hp.communities);
  hp.temp_start = j.value("temp_start", hp.temp_start);
  hp.temp_end = j.value("temp_end", hp.temp_end);
  hp.dropout = j.value("dropout", hp.dropout);
  hp.tau_calib = j.value("tau_calib", hp.tau_calib);
  hp.beta1 = j.value("beta1", hp.beta1);
  hp.beta2 = j.value("beta2", hp.beta2);
  hp.lr = j.value("lr", hp.lr);
  hp.weight_decay = j.value("weight_decay", hp.weight_decay);
  hp.epochs = j.value("epochs", hp.epochs);
  hp.seed = j.value("seed", hp.seed);
  hp.ablate = Ablation::parse(j.value("ablate", std::string("none")));
  return hp;
}

/// Everything needed to run inference: weights, the frozen init classifier and its u0.
struct TrainedModel {
  HyperParams hp;
  ModelParams params;
  InitClassifier init;
  Tensor u0;
};

inline void save_model(const std::filesystem::path& dir, TrainedModel& m) {
  std::vector<std::pair<std::string, const Tensor*>> list;
  for (auto& [name, t] : m.params.named()) list.emplace_back(name, t);
  for (auto& [name, t] : m.init.named()) list.emplace_back(name, t);
  list.emplace_back("u0", &m.u0);
  nlohmann::json extra = {{"format", "hugnn-model"},
                          {"seed", m.hp.seed},
                          {"hyperparameters", to_json(m.hp)},
                          {"num_classes", m.params.classes()},
                          {"input_dim", m.params.input_dim()},
                          {"communities", m.params.communities()}};
  save_checkpoint(dir, list, extra);
}

inline TrainedModel load_model(const std::filesystem::path& dir) {
  Checkpoint c = load_checkpoint(dir);
  TrainedModel m;
  try {
    m.hp = hyper_from_json(c.manifest.at("hyperparameters"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError((dir / "manifest.json").string(), 0, e.what());
  }
  std::size_t layers = 0;
  while (c.tensors.count("W_O." + std::to_string(layers))) ++layers;
  if (layers == 0) throw LoadError((dir / "manifest.json").string(), 0, "no local layers in checkpoint");
  m.params.w_o.resize(layers);
  m.params.att.resize(layers);
  for (auto& [name, t] : m.params.named()) *t = c.at(name);
  for (auto& [name, t] : m.init.named()) *t = c.at(name);
  m.u0 = c.at("u0");
  return m;
}

/// Per-node inspection record: uncertainty, fusion weights, community and prediction.
inline nlohmann::json state_to_json(const ModelState& s) {
  const std::size_t n = s.probs.rows();
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json node = {{"id", i},
                           {"u", s.u.empty() ? 0.0 : s.u.back()[i]},
                           {"lambda", {s.lambda(i, 0), s.lambda(i, 1), s.lambda(i, 2)}},
                           {"community", s.community.empty() ? -1 : s.community[i]},
                           {"pred", argmax_row(s.probs, i)}};
    if (!s.u0.empty()) node["u0"] = s.u0[i];
    nodes.push_back(std::move(node));
  }
  nlohmann::json comm = nlohmann::json::array();
  for (std::size_t k = 0; k < s.u_c.rows(); ++k) {
    comm.push_back({{"id", k}, {"size", s.community_size[k]}, {"u", s.u_c[k]}, {"empty", static_cast<bool>(s.community_empty[k])}});
  }
  return {{"nodes", nodes}, {"communities", comm}, {"u_global", s.u_g}};
}

}  // namespace hugnn
