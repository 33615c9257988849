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
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"

namespace hugnn {
namespace {

namespace fs = std::filesystem;

DatasetBundle labeled_graph(std::size_t n, const std::vector<Edge>& pairs, std::vector<int> labels) {
  DatasetBundle b;
  b.name = "toy";
  b.graph = Graph::from_pairs(n, pairs);
  b.labels = std::move(labels);
  b.num_classes = 1 + static_cast<std::size_t>(*std::max_element(b.labels.begin(), b.labels.end()));
  b.features = Tensor(n, 1, 1.0);
  b.roles.assign(n, Role::train);
  return b;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class TempDir {
 public:
  explicit TempDir(const std::string& tag) : path_(fs::temp_directory_path() / ("hugnn_" + tag)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

DatasetBundle triangle() {
  DatasetBundle b = labeled_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {0, 1, 0});
  b.features = Tensor::rows_of({{0.1, 1.0 / 3}, {-2.5, 1e-17}, {7, 0}});
  b.roles = {Role::train, Role::val, Role::test};
  return b;
}

TEST(Graph, DropsSelfLoopsAndDuplicatesAndSymmetrizes) {
  std::size_t dropped = 0;
  const Graph g = Graph::from_pairs(4, {{0, 1}, {1, 0}, {2, 2}, {1, 3}, {0, 1}}, &dropped);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(dropped, 3u);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_TRUE(g.has_edge(3, 1));
  EXPECT_FALSE(g.has_edge(2, 2));
  for (std::size_t u = 0; u < 4; ++u)
    for (auto v : g.neighbors(u)) EXPECT_TRUE(g.has_edge(v, u));
  EXPECT_EQ(g.neighbors(1), (std::vector<std::uint32_t>{0, 3}));
}

TEST(LoadBundle, TriangleRoundTrips) {
  TempDir dir("tri");
  save_bundle(triangle(), dir.path());
  const DatasetBundle b = load_bundle(dir.path());
  EXPECT_EQ(b.n(), 3u);
  EXPECT_EQ(b.m(), 3u);
  EXPECT_EQ(b.features, triangle().features);
  EXPECT_EQ(b.labels, triangle().labels);
  EXPECT_EQ(b.roles, triangle().roles);
}

TEST(LoadBundle, SaveOfLoadIsByteIdentical) {
  TempDir a("rt_a"), b("rt_b");
  Rng rng(4);
  SynthSpec s;
  s.n = 120;
  s.num_classes = 3;
  s.degree = 4;
  save_bundle(synth_heterophily(s, rng), a.path());
  save_bundle(load_bundle(a.path()), b.path());
  for (const char* f : {"meta.json", "edges.tsv", "features.csv", "labels.csv", "split.csv"}) {
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
  }
}

TEST(LoadBundle, LabelEqualToClassCountIsReportedWithLine) {
  TempDir dir("badlabel");
  DatasetBundle t = triangle();
  t.num_classes = 7;
  save_bundle(t, dir.path());
  write(dir.path() / "labels.csv", "0\n7\n1\n");
  try {
    load_bundle(dir.path());
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(fs::path(e.file()).filename(), "labels.csv");
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadBundle, StructuredErrors) {
  TempDir dir("errors");
  save_bundle(triangle(), dir.path());
  const std::string features = slurp(dir.path() / "features.csv");

  write(dir.path() / "features.csv", "1,2\n3,abc\n5,6\n");
  try {
    load_bundle(dir.path());
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(fs::path(e.file()).filename(), "features.csv");
    EXPECT_EQ(e.line(), 2u);
  }

  write(dir.path() / "features.csv", "1,2\n3,4\n");
  EXPECT_THROW(load_bundle(dir.path()), LoadError);
  write(dir.path() / "features.csv", features);

  write(dir.path() / "edges.tsv", "0\t1\n1\t9\n");
  try {
    load_bundle(dir.path());
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  fs::remove(dir.path() / "edges.tsv");
  EXPECT_THROW(load_bundle(dir.path()), LoadError);
  EXPECT_THROW(load_bundle(dir.path() / "missing"), LoadError);
}

TEST(LoadBundle, DirectedAndDuplicateEdgesAreCounted) {
  TempDir dir("dups");
  save_bundle(triangle(), dir.path());
  write(dir.path() / "edges.tsv", "0\t1\n1\t0\n1\t2\n2\t2\n0\t2\n");
  LoadReport rep;
  const DatasetBundle b = load_bundle(dir.path(), 0, &rep);
  EXPECT_EQ(b.m(), 3u);
  EXPECT_EQ(rep.dropped_pairs, 2u);
}

TEST(LoadBundle, MissingSplitIsGenerated) {
  TempDir dir("nosplit");
  Rng rng(2);
  SynthSpec s;
  s.n = 200;
  s.degree = 3;
  save_bundle(synth_heterophily(s, rng), dir.path());
  fs::remove(dir.path() / "split.csv");
  LoadReport rep;
  const DatasetBundle b = load_bundle(dir.path(), 5, &rep);
  EXPECT_TRUE(rep.split_generated);
  EXPECT_EQ(b.nodes_with(Role::train).size(), 40u);
  EXPECT_EQ(b.nodes_with(Role::val).size(), 80u);
  EXPECT_EQ(b.nodes_with(Role::test).size(), 80u);
  EXPECT_EQ(load_bundle(dir.path(), 5).roles, b.roles);
}

TEST(MakeSplit, LargeRemainderGivesFiveHundredAndOneThousand) {
  std::vector<int> labels(3000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 7);
  labels[5] = kNoLabel;
  Rng rng(1);
  const auto roles = make_split(labels, 7, rng);
  std::vector<std::size_t> per_class(7, 0);
  std::size_t val = 0, test = 0;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i] == Role::train) ++per_class[labels[i]];
    val += roles[i] == Role::val;
    test += roles[i] == Role::test;
  }
  for (auto c : per_class) EXPECT_EQ(c, 20u);
  EXPECT_EQ(val, 500u);
  EXPECT_EQ(test, 1000u);
  EXPECT_EQ(roles[5], Role::unlabeled);
}

TEST(Homophily, SingleClassIsOne) {
  EXPECT_EQ(homophily_ratio(labeled_graph(4, {{0, 1}, {1, 2}, {2, 3}}, {0, 0, 0, 0})), 1.0);
}

TEST(Homophily, FourEdgesTwoMatching) {
  const DatasetBundle b = labeled_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}, {0, 0, 1, 1});
  EXPECT_EQ(homophily_ratio(b), 0.5);
  const auto [same, total] = oracle::homophily_counts(b);
  EXPECT_EQ(same, 2u);
  EXPECT_EQ(total, 4u);
}

TEST(Homophily, UnlabeledNodeIsContractError) {
  DatasetBundle b = labeled_graph(3, {{0, 1}, {1, 2}}, {0, 1, 0});
  b.labels[1] = kNoLabel;
  EXPECT_THROW(homophily_ratio(b), ContractError);
  EXPECT_THROW(two_hop_homophily(b), ContractError);
}

TEST(Homophily, MatchesBruteForceAndOneOnlyWhenAllIntraClass) {
  Rng rng(10);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 5 + rng.uniform_int(46);
    DatasetBundle b = testing::random_bundle(n, 2, 1 + rng.uniform_int(3), rng.uniform(0.05, 0.4), rng);
    if (b.m() == 0) continue;
    const double h = homophily_ratio(b);
    const auto [same, total] = oracle::homophily_counts(b);
    EXPECT_EQ(h, static_cast<double>(same) / static_cast<double>(total));
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, 1.0);
    EXPECT_EQ(h == 1.0, same == total);
  }
}

TEST(TwoHop, PathWithMatchingEnds) {
  EXPECT_EQ(two_hop_homophily(labeled_graph(3, {{0, 1}, {1, 2}}, {0, 1, 0})), 1.0);
}

TEST(TwoHop, StarLeavesMatchEachOther) {
  const DatasetBundle b = labeled_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, {0, 1, 1, 1, 1});
  EXPECT_EQ(two_hop_homophily(b), 1.0);
  const auto [same, total] = oracle::two_hop_counts(b);
  EXPECT_EQ(total, 12u);
  EXPECT_EQ(same, 12u);
}

TEST(TwoHop, ExcludesDirectNeighbors) {
  // In a triangle every two-hop node is also a neighbor.
  EXPECT_THROW(two_hop_homophily(labeled_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {0, 1, 0})), ContractError);
}

TEST(TwoHop, HeterophilousSynthHasHighTwoHopAgreement) {
  Rng rng(3);
  SynthSpec s;
  s.p = 0.1;
  EXPECT_GT(two_hop_homophily(synth_heterophily(s, rng)), 0.5);
}

TEST(Synth, FullHomophily) {
  Rng rng(1);
  SynthSpec s;
  s.p = 1.0;
  EXPECT_NEAR(homophily_ratio(synth_heterophily(s, rng)), 1.0, 0.02);
}

TEST(Synth, LowHomophilyWindow) {
  Rng rng(1);
  SynthSpec s;
  s.p = 0.2;
  const DatasetBundle b = synth_heterophily(s, rng);
  const double h = homophily_ratio(b);
  EXPECT_GE(h, 0.17);
  EXPECT_LE(h, 0.23);
}

TEST(Synth, EmpiricalHomophilyTracksRequestedP) {
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (std::uint64_t seed : {1u, 2u}) {
      Rng rng(seed);
      SynthSpec s;
      s.n = 1000;
      s.num_classes = 3;
      s.p = p;
      EXPECT_NEAR(homophily_ratio(synth_heterophily(s, rng)), p, 0.03) << p;
    }
  }
}

TEST(Synth, StructureAndSplit) {
  Rng rng(8);
  SynthSpec s;
  s.n = 300;
  s.num_classes = 3;
  s.degree = 5;
  const DatasetBundle b = synth_heterophily(s, rng);
  b.validate();
  std::vector<std::size_t> sizes(3, 0), train(3, 0);
  for (std::size_t i = 0; i < b.n(); ++i) {
    ++sizes[b.labels[i]];
    train[b.labels[i]] += b.roles[i] == Role::train;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(sizes[c], 100u);
    EXPECT_EQ(train[c], 20u);
  }
  EXPECT_EQ(b.nodes_with(Role::val).size(), 120u);
  EXPECT_EQ(b.nodes_with(Role::test).size(), 120u);
  EXPECT_EQ(b.d(), 3u);
}

TEST(Synth, SameSeedSameBytes) {
  TempDir a("syn_a"), b("syn_b");
  SynthSpec s;
  s.n = 150;
  s.degree = 4;
  Rng r1(77), r2(77);
  save_bundle(synth_heterophily(s, r1), a.path());
  save_bundle(synth_heterophily(s, r2), b.path());
  for (const char* f : {"meta.json", "edges.tsv", "features.csv", "labels.csv", "split.csv"}) {
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
  }
}

TEST(Synth, InfeasibleRequestsThrow) {
  Rng rng(1);
  SynthSpec s;
  s.n = 20;
  s.degree = 10;
  EXPECT_THROW(synth_heterophily(s, rng), ContractError);
  s.degree = 2;
  s.p = 1.2;
  EXPECT_THROW(synth_heterophily(s, rng), ContractError);
}

std::vector<double> star_weights(const std::vector<double>& w, Graph& g) {
  std::vector<Edge> pairs;
  for (std::uint32_t k = 1; k <= w.size(); ++k) pairs.emplace_back(0, k);
  g = Graph::from_pairs(w.size() + 1, pairs);
  std::vector<double> arcs(g.num_arcs(), 1.0);
  for (std::size_t a = g.arc_begin(0); a < g.arc_end(0); ++a) arcs[a] = w[g.arc_target(a) - 1];
  return arcs;
}

TEST(EffectiveDegree, Examples) {
  Graph g;
  EXPECT_EQ(effective_degree(g, star_weights({0.25, 0.25, 0.25, 0.25}, g))[0], 4.0);
  EXPECT_EQ(effective_degree(g, star_weights({1, 0, 0, 0}, g))[0], 1.0);
  EXPECT_EQ(effective_degree(g, star_weights({0.5, 0.5, 0, 0}, g))[0], 2.0);
}

TEST(EffectiveDegree, UniformWeightsGiveDegreeExactly) {
  Rng rng(12);
  const DatasetBundle b = testing::random_bundle(40, 2, 2, 0.2, rng);
  const Graph& g = b.graph;
  std::vector<double> w(g.num_arcs());
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    for (std::size_t a = g.arc_begin(i); a < g.arc_end(i); ++a) w[a] = 1.0 / static_cast<double>(g.degree(i));
  const auto eff = effective_degree(g, w);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) EXPECT_EQ(eff[i], static_cast<double>(g.degree(i)));
}

TEST(EffectiveDegree, UnnormalizedRowIsContractError) {
  Graph g;
  EXPECT_THROW(effective_degree(g, star_weights({0.5, 0.2, 0.2, 0.2}, g)), ContractError);
}

TEST(HomophilyReport, HistogramCountsEveryNode) {
  Rng rng(5);
  SynthSpec s;
  s.n = 200;
  s.degree = 3;
  const DatasetBundle b = synth_heterophily(s, rng);
  const HomophilyReport r = homophily_report(b);
  std::size_t total = 0;
  for (auto c : r.degree_histogram) total += c;
  EXPECT_EQ(total, b.n());
  EXPECT_EQ(r.max_degree + 1, r.degree_histogram.size());
  EXPECT_GE(r.h_two_hop, 0.0);
  EXPECT_LE(r.h_two_hop, 1.0);
}

TEST(Cora, LoadsWithPublishedCounts) {
  const char* dir = std::getenv("HUGNN_CORA_DIR");
  if (!dir) GTEST_SKIP() << "HUGNN_CORA_DIR not set";
  const DatasetBundle b = load_bundle(dir);
  EXPECT_EQ(b.n(), 2708u);
  EXPECT_EQ(b.m(), 5279u);
  EXPECT_EQ(2 * b.m(), 10558u);
  EXPECT_NEAR(homophily_ratio(b), 0.81, 0.01);
}

}  // namespace
}  // namespace hugnn
