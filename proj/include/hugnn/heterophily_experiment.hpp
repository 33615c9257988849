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

// Accuracy of model variants on synthetic graphs of controlled edge homophily.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hugnn/baseline.hpp"
#include "hugnn/homophily.hpp"
#include "hugnn/synth.hpp"
#include "hugnn/train.hpp"

namespace hugnn {

enum class Variant { full, flat, no_uncertainty, mean_baseline };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::flat: return "flat";  // community and global removed
    case Variant::no_uncertainty: return "no_uncertainty";
    case Variant::mean_baseline: return "mean_baseline";
  }
  return "";
}

inline const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::full, Variant::flat, Variant::no_uncertainty, Variant::mean_baseline};
  return v;
}

struct ExperimentRow {
  Variant variant = Variant::full;
  double p = 0.0;
  std::uint64_t seed = 0;
  double q_measured = 0.0;
  double test_acc = 0.0;
  double ece = 0.0;
  double mean_u = 0.0;  ///< mean final-layer uncertainty; 0 for the baseline
};

struct ExperimentConfig {
  std::vector<double> p_grid{0.1, 0.2};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<Variant> variants = all_variants();
  SynthSpec synth;  ///< p is overwritten per grid point
  TrainConfig train;
  std::size_t threads = 1;
};

/// Worker cap from HUGNN_THREADS, falling back to `fallback`.
inline std::size_t threads_from_env(std::size_t fallback = 1) {
  if (const char* s = std::getenv("HUGNN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && v > 0) return static_cast<std::size_t>(v);
  }
  return fallback;
}

inline ExperimentRow run_variant(const DatasetBundle& b, Variant v, double p, std::uint64_t seed, double q,
                                 TrainConfig cfg) {
  ExperimentRow row{v, p, seed, q, 0.0, 0.0, 0.0};
  cfg.hp.seed = seed;
  if (v == Variant::mean_baseline) {
    BaselineResult r = train_baseline(b, cfg.hp, cfg.patience);
    row.test_acc = r.test_acc;
    row.ece = r.test_ece;
    return row;
  }
  cfg.hp.ablate = Ablation{};
  if (v == Variant::flat) cfg.hp.ablate.community = cfg.hp.ablate.global = true;
  if (v == Variant::no_uncertainty) cfg.hp.ablate.uncertainty = true;
  TrainResult r = train(b, cfg);
  row.test_acc = r.best.test_acc;
  row.ece = r.best.test_ece;
  row.mean_u = r.best.mean_u_local;
  return row;
}

/// Rows ordered by (p, seed, variant). Grid points run on up to `threads` workers.
inline std::vector<ExperimentRow> heterophily_experiment(const ExperimentConfig& cfg) {
  struct Job {
    std::size_t pi, si;
  };
  std::vector<Job> jobs;
  for (std::size_t pi = 0; pi < cfg.p_grid.size(); ++pi)
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) jobs.push_back({pi, si});
  const std::size_t nv = cfg.variants.size();
  std::vector<ExperimentRow> rows(jobs.size() * nv);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        const double p = cfg.p_grid[jobs[k].pi];
        const std::uint64_t seed = cfg.seeds[jobs[k].si];
        SynthSpec s = cfg.synth;
        s.p = p;
        Rng rng = Rng(seed).derive("synth");
        const DatasetBundle b = synth_heterophily(s, rng);
        const double q = two_hop_homophily(b);
        for (std::size_t v = 0; v < nv; ++v) rows[k * nv + v] = run_variant(b, cfg.variants[v], p, seed, q, cfg.train);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t nt = std::max<std::size_t>(1, std::min(cfg.threads, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

inline std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
  std::string s = "variant,p,seed,q_measured,test_acc,ece,mean_u\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4g,%llu,%.6f,%.6f,%.6f,%.6f\n", variant_name(r.variant), r.p,
                  static_cast<unsigned long long>(r.seed), r.q_measured, r.test_acc, r.ece, r.mean_u);
    s += buf;
  }
  return s;
}

struct VariantSummary {
  double mean_acc = 0.0, std_acc = 0.0, mean_q = 0.0;
  std::size_t count = 0;
};

inline VariantSummary summarize_rows(const std::vector<ExperimentRow>& rows, Variant v, double p) {
  VariantSummary s;
  std::vector<double> acc;
  for (const auto& r : rows) {
    if (r.variant != v || r.p != p) continue;
    acc.push_back(r.test_acc);
    s.mean_q += r.q_measured;
  }
  s.count = acc.size();
  if (acc.empty()) return s;
  for (double a : acc) s.mean_acc += a;
  s.mean_acc /= static_cast<double>(acc.size());
  s.mean_q /= static_cast<double>(acc.size());
  for (double a : acc) s.std_acc += (a - s.mean_acc) * (a - s.mean_acc);
  s.std_acc = std::sqrt(s.std_acc / static_cast<double>(acc.size()));
  return s;
}

}  // namespace hugnn
