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
// hugnn command-line entry point: synth, train, eval, perturb, check, sweep.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hugnn/hugnn.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hugnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct RunConfig {
  std::string data;
  std::string out;
  std::string config;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  bool beta2_single_shot = false;
  bool no_beta2_schedule = false;
};

json run_config_json(const std::string& command, const RunConfig& rc) {
  const TrainConfig& tc = rc.train;
  return {{"command", command},
          {"data", rc.data},
          {"out", rc.out},
          {"split_seed", rc.split_seed},
          {"hyperparameters", to_json(tc.hp)},
          {"patience", tc.patience},
          {"clip_norm", tc.clip_norm},
          {"init_epochs", tc.init_epochs},
          {"calibration_warmup", tc.calibration_warmup},
          {"warmup_ratio1", tc.warmup_ratio1},
          {"warmup_ratio2", tc.warmup_ratio2},
          {"beta2_schedule",
           {{"enabled", tc.beta2_schedule.enabled},
            {"check_every", tc.beta2_schedule.check_every},
            {"repeat", tc.beta2_schedule.repeat},
            {"up", tc.beta2_schedule.up},
            {"down", tc.beta2_schedule.down},
            {"ece_hi", tc.beta2_schedule.ece_hi},
            {"ece_lo", tc.beta2_schedule.ece_lo}}}};
}

void apply_run_config_json(const json& j, RunConfig& rc) {
  TrainConfig& tc = rc.train;
  rc.data = j.value("data", rc.data);
  rc.split_seed = j.value("split_seed", rc.split_seed);
  if (j.contains("hyperparameters")) tc.hp = hyper_from_json(j.at("hyperparameters"));
  tc.patience = j.value("patience", tc.patience);
  tc.clip_norm = j.value("clip_norm", tc.clip_norm);
  tc.init_epochs = j.value("init_epochs", tc.init_epochs);
  tc.calibration_warmup = j.value("calibration_warmup", tc.calibration_warmup);
  tc.warmup_ratio1 = j.value("warmup_ratio1", tc.warmup_ratio1);
  tc.warmup_ratio2 = j.value("warmup_ratio2", tc.warmup_ratio2);
  if (j.contains("beta2_schedule")) {
    const json& s = j.at("beta2_schedule");
    Beta2Schedule& b = tc.beta2_schedule;
    b.enabled = s.value("enabled", b.enabled);
    b.check_every = s.value("check_every", b.check_every);
    b.repeat = s.value("repeat", b.repeat);
    b.up = s.value("up", b.up);
    b.down = s.value("down", b.down);
    b.ece_hi = s.value("ece_hi", b.ece_hi);
    b.ece_lo = s.value("ece_lo", b.ece_lo);
  }
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError(p.string(), 0, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(p.string(), 0, e.what());
  }
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad grid value '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

/// Hyper-parameter and schedule flags shared by train and sweep.
void add_train_flags(CLI::App* app, RunConfig& rc) {
  HyperParams& hp = rc.train.hp;
  app->add_option("--hidden", hp.hidden_dim, "hidden embedding size")->capture_default_str();
  app->add_option("--layers", hp.layers, "local layers")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--communities", hp.communities, "communities (0: max(2, round(sqrt(n))))")->capture_default_str();
  app->add_option("--temp-start", hp.temp_start, "initial Gumbel temperature")->capture_default_str();
  app->add_option("--temp-end", hp.temp_end, "final Gumbel temperature")->capture_default_str();
  app->add_option("--dropout", hp.dropout, "dropout between local layers")->capture_default_str();
  app->add_option("--tau-calib", hp.tau_calib, "calibration margin")->capture_default_str();
  app->add_option("--beta1", hp.beta1, "sharpness weight")->capture_default_str();
  app->add_option("--beta2", hp.beta2, "calibration weight")->capture_default_str();
  app->add_option("--lr", hp.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--weight-decay", hp.weight_decay, "L2 weight decay")->capture_default_str();
  app->add_option("--epochs", hp.epochs, "maximum epochs")->capture_default_str();
  app->add_option("--seed", hp.seed, "root seed")->capture_default_str();
  app->add_option_function<std::string>(
         "--ablate", [&hp](const std::string& s) { hp.ablate = Ablation::parse(s); },
         "none | community | global | uncertainty, combinable with '+'")
      ->default_str("none");
  app->add_option("--patience", rc.train.patience, "early-stopping patience (epochs)")->capture_default_str();
  app->add_option("--clip-norm", rc.train.clip_norm, "global gradient-norm clip")->capture_default_str();
  app->add_option("--init-epochs", rc.train.init_epochs, "epochs for the uncertainty-init classifier")->capture_default_str();
  app->add_flag("--beta2-single-shot", rc.beta2_single_shot, "apply the beta2 rule only once");
  app->add_flag("--no-beta2-schedule", rc.no_beta2_schedule, "keep beta2 fixed");
  app->add_flag("--calibration-warmup", rc.train.calibration_warmup, "rescale betas from one initial pass");
  app->add_option("--split-seed", rc.split_seed, "seed for the split when the bundle has none")->capture_default_str();
}

void finalize_schedule(RunConfig& rc) {
  if (rc.beta2_single_shot) rc.train.beta2_schedule.repeat = false;
  if (rc.no_beta2_schedule) rc.train.beta2_schedule.enabled = false;
}

DatasetBundle load_data(const RunConfig& rc) {
  if (rc.data.empty()) throw ConfigError("--data is required");
  LoadReport rep;
  DatasetBundle b = load_bundle(rc.data, rc.split_seed, &rep);
  if (rep.dropped_pairs) std::cerr << "warning: dropped " << rep.dropped_pairs << " duplicate or self-loop edge entries\n";
  if (rep.meta_m && rep.meta_m != b.m()) {
    std::cerr << "note: meta.json lists m=" << rep.meta_m << ", loaded " << b.m() << " undirected edges\n";
  }
  return b;
}

/// Accepts a run directory (containing ckpt-best/) or a checkpoint directory.
TrainedModel load_trained(const std::string& path) {
  fs::path p(path);
  if (fs::exists(p / "ckpt-best" / "manifest.json")) p /= "ckpt-best";
  return load_model(p);
}

json eval_json(const DatasetBundle& b, TrainedModel& m) {
  const ModelState s = predict(b, m.params, m.hp.ablate, &m.u0);
  const EvalSummary e = summarize(b, s);
  return {{"test_acc", e.test_acc}, {"test_ece", e.test_ece}, {"val_acc", e.val_acc},
          {"val_ece", e.val_ece},   {"train_acc", e.train_acc}, {"mean_u", e.mean_u_local}};
}

int cmd_synth(SynthSpec& s, std::uint64_t seed, const std::string& out) {
  Rng rng = Rng(seed).derive("synth");
  DatasetBundle b = synth_heterophily(s, rng);
  save_bundle(b, out);
  std::cout << json{{"out", out}, {"n", b.n()}, {"m", b.m()}, {"homophily", homophily_ratio(b)}}.dump() << "\n";
  return kExitOk;
}

int cmd_train(RunConfig& rc) {
  if (rc.out.empty()) throw ConfigError("--out is required");
  const DatasetBundle b = load_data(rc);
  fs::create_directories(rc.out);
  write_text(fs::path(rc.out) / "config.json", run_config_json("train", rc).dump(2) + "\n");
  std::ofstream metrics(fs::path(rc.out) / "metrics.jsonl", std::ios::trunc);
  TrainResult r = train(b, rc.train, [&metrics](const MetricsRecord& m) {
    metrics << to_json(m).dump() << "\n";
    metrics.flush();
  });
  save_model(fs::path(rc.out) / "ckpt-best", r.model);
  const ModelState s = predict(b, r.model.params, rc.train.hp.ablate, &r.model.u0);
  write_text(fs::path(rc.out) / "state.json", state_to_json(s).dump() + "\n");
  std::cout << json{{"best_epoch", r.best_epoch},
                    {"epochs_run", r.history.size()},
                    {"val_acc", r.best.val_acc},
                    {"test_acc", r.best.test_acc},
                    {"test_ece", r.best.test_ece},
                    {"beta2", r.final_beta2}}
                   .dump()
            << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, const std::string& ckpt) {
  const DatasetBundle b = load_data(rc);
  TrainedModel m = load_trained(ckpt);
  std::cout << eval_json(b, m).dump() << "\n";
  return kExitOk;
}

int cmd_perturb(const RunConfig& rc, const std::string& ckpt, const std::string& kind, double intensity,
                std::uint64_t seed) {
  const DatasetBundle b = load_data(rc);
  TrainedModel m = load_trained(ckpt);
  PerturbSpec spec{parse_kind(kind), intensity, seed};
  const DatasetBundle pb = perturb(b, spec, &m.params, m.hp.ablate);
  std::cerr << "perturbation: " << kind_label(spec.kind) << ", intensity " << intensity << ", m " << b.m() << " -> "
            << pb.m() << "\n";
  std::cout << eval_json(pb, m).dump() << "\n";
  return kExitOk;
}

DatasetBundle two_triangles() {
  DatasetBundle b;
  b.name = "two-triangles";
  b.num_classes = 2;
  b.graph = Graph::from_pairs(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}});
  Rng rng(11);
  b.features = Tensor(6, 4);
  for (double& v : b.features.values()) v = rng.normal();
  b.labels = {0, 0, 0, 1, 1, 1};
  b.roles = {Role::train, Role::train, Role::val, Role::train, Role::train, Role::test};
  return b;
}

int cmd_check(const RunConfig& rc, const std::string& ckpt, double threshold, const std::string& report_path) {
  const HyperParams& hp = rc.train.hp;
  const DatasetBundle tiny = two_triangles();
  Rng init = Rng(hp.seed).derive("init");
  ModelParams fresh = ModelParams::init(tiny.d(), tiny.num_classes, 2, hp, init);
  const GradcheckReport g = model_gradcheck(tiny, fresh, hp, hp.seed);
  const bool ok = g.max_rel_error < threshold;
  std::printf("gradcheck: %s max_rel_error=%.3e worst=%s[%zu] entries=%zu\n", ok ? "PASS" : "FAIL", g.max_rel_error,
              g.worst_param.c_str(), g.worst_index, g.entries);

  json report = {{"gradcheck", {{"pass", ok}, {"max_rel_error", g.max_rel_error}, {"entries", g.entries}}}};
  bool probe_ok = true;
  if (!rc.data.empty()) {
    const DatasetBundle b = load_data(rc);
    ModelParams params;
    if (!ckpt.empty()) {
      params = load_trained(ckpt).params;
    } else {
      Rng r = Rng(hp.seed).derive("init");
      params = ModelParams::init(b.d(), b.num_classes, hp.communities_for(b.n()), hp, r);
    }
    ContractionConfig cc;
    cc.seed = hp.seed;
    const ContractionReport cr = contraction_probe(b, params, cc);
    probe_ok = cr.converged;
    std::printf("contraction: %s trials=%zu max_final_step=%.3e max_lipschitz=%.4f\n", cr.converged ? "PASS" : "FAIL",
                cr.steps.size(), cr.max_final_step, cr.max_lipschitz);
    report["contraction"] = to_json(cr);
    if (b.fully_labeled() && b.m() > 0) {
      const HomophilyReport h = homophily_report(b);
      std::printf("homophily: one_hop=%.4f two_hop=%.4f max_degree=%zu\n", h.h_one_hop, h.h_two_hop, h.max_degree);
      report["homophily"] = {{"one_hop", h.h_one_hop}, {"two_hop", h.h_two_hop}, {"max_degree", h.max_degree}};
    }
  }
  if (!report_path.empty()) write_text(report_path, report.dump(2) + "\n");
  return ok && probe_ok ? kExitOk : kExitNumeric;
}

int cmd_sweep_beta(RunConfig& rc, const std::string& b1s, const std::string& b2s) {
  if (rc.out.empty()) throw ConfigError("--out is required");
  const auto g1 = parse_grid(b1s), g2 = parse_grid(b2s);
  const DatasetBundle b = load_data(rc);
  fs::create_directories(rc.out);
  write_text(fs::path(rc.out) / "config.json", run_config_json("sweep", rc).dump(2) + "\n");
  std::string csv = "beta1,beta2,val_acc,test_acc,val_ece,test_ece\n";
  char buf[256];
  for (double b1 : g1)
    for (double b2 : g2) {
      TrainConfig tc = rc.train;
      tc.hp.beta1 = b1;
      tc.hp.beta2 = b2;
      const TrainResult r = train(b, tc);
      std::snprintf(buf, sizeof buf, "%g,%g,%.6f,%.6f,%.6f,%.6f\n", b1, b2, r.best.val_acc, r.best.test_acc,
                    r.best.val_ece, r.best.test_ece);
      csv += buf;
      std::cerr << buf;
    }
  write_text(fs::path(rc.out) / "sweep.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_sweep_heterophily(RunConfig& rc, const std::string& p_grid, std::size_t seeds, SynthSpec synth) {
  if (rc.out.empty()) throw ConfigError("--out is required");
  ExperimentConfig ec;
  ec.p_grid = parse_grid(p_grid);
  for (double p : ec.p_grid)
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("p grid values must lie in (0, 1)");
  ec.seeds.clear();
  for (std::size_t s = 0; s < seeds; ++s) ec.seeds.push_back(rc.train.hp.seed + s);
  ec.synth = synth;
  ec.train = rc.train;
  ec.threads = threads_from_env(1);
  fs::create_directories(rc.out);
  write_text(fs::path(rc.out) / "config.json", run_config_json("sweep", rc).dump(2) + "\n");
  const auto rows = heterophily_experiment(ec);
  const std::string csv = experiment_csv(rows);
  write_text(fs::path(rc.out) / "heterophily.csv", csv);
  std::cout << csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical uncertainty-aware graph neural network"};
  app.require_subcommand(1);
  RunConfig rc;

  SynthSpec synth;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* sc = app.add_subcommand("synth", "write a synthetic graph bundle of controlled homophily");
  sc->add_option("--n", synth.n, "nodes")->capture_default_str();
  sc->add_option("--classes", synth.num_classes, "classes")->capture_default_str();
  sc->add_option("--degree", synth.degree, "partners drawn per node")->capture_default_str();
  sc->add_option("--p", synth.p, "same-class neighbor probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sc->add_option("--noise", synth.feature_noise, "feature noise scale")->capture_default_str()->check(CLI::NonNegativeNumber);
  sc->add_option("--seed", synth_seed, "seed")->capture_default_str();
  sc->add_option("--out", synth_out, "output bundle directory")->required();

  auto* tr = app.add_subcommand("train", "train a model on a bundle");
  tr->add_option("--data", rc.data, "bundle directory");
  tr->add_option("--out", rc.out, "run directory")->required();
  tr->add_option("--config", rc.config, "config.json of a previous run; explicit flags override it");
  add_train_flags(tr, rc);

  std::string ckpt;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--data", rc.data, "bundle directory")->required();
  ev->add_option("--ckpt", ckpt, "run or checkpoint directory")->required();
  ev->add_option("--split-seed", rc.split_seed, "seed for the split when the bundle has none");

  std::string kind = "drop_edge";
  double intensity = 0.0;
  std::uint64_t perturb_seed = 0;
  auto* pe = app.add_subcommand("perturb", "perturb a bundle, then evaluate a checkpoint on it");
  pe->add_option("--data", rc.data, "bundle directory")->required();
  pe->add_option("--ckpt", ckpt, "run or checkpoint directory")->required();
  pe->add_option("--kind", kind, "drop_edge | feature_noise | greedy_flip | feature_pgd")->capture_default_str();
  pe->add_option("--ratio,--eps", intensity, "edge ratio or relative l2 radius")->capture_default_str();
  pe->add_option("--seed", perturb_seed, "perturbation seed")->capture_default_str();
  pe->add_option("--split-seed", rc.split_seed, "seed for the split when the bundle has none");

  double threshold = 1e-4;
  std::string report_path;
  auto* ch = app.add_subcommand("check", "gradient check and contraction probe");
  ch->add_option("--data", rc.data, "bundle directory for the contraction probe");
  ch->add_option("--ckpt", ckpt, "use trained weights for the probe");
  ch->add_option("--threshold", threshold, "maximum relative error")->capture_default_str();
  ch->add_option("--report", report_path, "write a JSON report here");
  ch->add_option("--hidden", rc.train.hp.hidden_dim, "hidden size of the checked model")->capture_default_str();
  ch->add_option("--seed", rc.train.hp.seed, "seed")->capture_default_str();

  std::string beta1_grid = "0.1,0.3,1.0", beta2_grid = "0.05,0.10,0.20", p_grid = "0.1,0.2";
  bool heterophily = false;
  std::size_t seeds = 10;
  SynthSpec sweep_synth;
  auto* sw = app.add_subcommand("sweep", "beta grid sweep, or the heterophily experiment with --heterophily");
  sw->add_option("--data", rc.data, "bundle directory (beta sweep)");
  sw->add_option("--out", rc.out, "output directory")->required();
  sw->add_option("--beta1-grid", beta1_grid, "comma-separated beta1 values")->capture_default_str();
  sw->add_option("--beta2-grid", beta2_grid, "comma-separated beta2 values")->capture_default_str();
  sw->add_flag("--heterophily", heterophily, "run model variants on synthetic graphs instead");
  sw->add_option("--p-grid", p_grid, "comma-separated same-class probabilities")->capture_default_str();
  sw->add_option("--seeds", seeds, "seeds per grid point")->capture_default_str();
  sw->add_option("--n", sweep_synth.n, "synthetic nodes")->capture_default_str();
  sw->add_option("--classes", sweep_synth.num_classes, "synthetic classes")->capture_default_str();
  sw->add_option("--degree", sweep_synth.degree, "synthetic partners per node")->capture_default_str();
  sw->add_option("--noise", sweep_synth.feature_noise, "synthetic feature noise")->capture_default_str();
  add_train_flags(sw, rc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!rc.config.empty()) {
      // Re-parse so explicit flags win over the loaded file.
      RunConfig loaded;
      apply_run_config_json(read_json_file(rc.config), loaded);
      const std::string out = rc.out;
      rc = loaded;
      rc.out = out;
      rc.config.clear();
      app.parse(argc, argv);
      rc.out = out;
    }
    finalize_schedule(rc);
    rc.train.validate();
    if (*sc) return cmd_synth(synth, synth_seed, synth_out);
    if (*tr) return cmd_train(rc);
    if (*ev) return cmd_eval(rc, ckpt);
    if (*pe) return cmd_perturb(rc, ckpt, kind, intensity, perturb_seed);
    if (*ch) return cmd_check(rc, ckpt, threshold, report_path);
    if (*sw) return heterophily ? cmd_sweep_heterophily(rc, p_grid, seeds, sweep_synth) : cmd_sweep_beta(rc, beta1_grid, beta2_grid);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LoadError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n" << e.diagnostic() << "\n";
    return kExitNumeric;
  } catch (const ContractError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
