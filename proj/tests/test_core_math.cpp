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

#include <cmath>
#include <numeric>

#include "test_util.hpp"

namespace hugnn {
namespace {

using testing::fd_error;
using testing::random_tensor;
using testing::weighted_sum;

constexpr double kOpTolerance = 1e-5;

TEST(Matmul, IdentityLeavesMatrix) {
  Tape t;
  Var a = t.constant(Tensor::identity(2));
  Var b = t.constant(Tensor::rows_of({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(a, b).value(), Tensor::rows_of({{1, 2}, {3, 4}}));
}

TEST(Matmul, RowTimesColumn) {
  Tape t;
  Var c = matmul(t.constant(Tensor::rows_of({{1, 2}})), t.constant(Tensor::column({3, 4})));
  EXPECT_EQ(c.value(), Tensor(1, 1, 11.0));
}

TEST(Matmul, MismatchNamesBothShapes) {
  Tape t;
  try {
    matmul(t.constant(Tensor(2, 3)), t.constant(Tensor(2, 3)));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tensor> in{random_tensor(3, 4, rng), random_tensor(4, 2, rng)};
    const double err = fd_error([&](Tape& t, const auto& v) { return weighted_sum(t, matmul(v[0], v[1]), 7); }, in);
    EXPECT_LT(err, 1e-6);
  }
}

TEST(Matmul, TransposedVariantsAgreeWithExplicitProducts) {
  Rng rng(2);
  std::vector<Tensor> in{random_tensor(3, 4, rng), random_tensor(5, 4, rng)};
  EXPECT_LT(fd_error([&](Tape& t, const auto& v) { return weighted_sum(t, matmul_bt(v[0], v[1]), 3); }, in), kOpTolerance);
  std::vector<Tensor> in2{random_tensor(4, 3, rng), random_tensor(4, 5, rng)};
  EXPECT_LT(fd_error([&](Tape& t, const auto& v) { return weighted_sum(t, matmul_at(v[0], v[1]), 3); }, in2), kOpTolerance);
}

TEST(Elementwise, ReluExample) {
  Tape t;
  EXPECT_EQ(relu(t.constant(Tensor::rows_of({{-1, 0, 2}}))).value(), Tensor::rows_of({{0, 0, 2}}));
}

TEST(Elementwise, CosineOfSelfIsOne) {
  Rng rng(3);
  Tape t;
  const Tensor x = random_tensor(5, 7, rng);
  Var v = t.constant(x);
  const Tensor c = cosine_rows(v, v).value();
  for (std::size_t i = 0; i < 5; ++i) {
    double sq = 0;
    for (double e : x.row(i)) sq += e * e;
    // Only the 1e-12 guard in the denominator separates it from 1.
    EXPECT_NEAR(c[i], sq / (sq + kCosineEps), 1e-15);
    EXPECT_NEAR(c[i], 1.0, 1e-10);
  }
}

TEST(Elementwise, VarianceOfTwoPoints) {
  Tape t;
  EXPECT_DOUBLE_EQ(variance_rows(t.constant(Tensor::rows_of({{0, 0}, {2, 2}}))).value()[0], 2.0);
}

TEST(Elementwise, LogOutsideDomainThrows) {
  Tape t;
  EXPECT_THROW(log(t.constant(Tensor::rows_of({{1.0, 0.0}}))), DomainError);
  EXPECT_THROW(log(t.constant(Tensor::rows_of({{-2.0}}))), DomainError);
}

struct UnaryCase {
  const char* name;
  std::function<Var(Tape&, const std::vector<Var>&)> f;
  double lo, hi;
  std::size_t inputs;
};

class OpGradient : public ::testing::TestWithParam<UnaryCase> {};

TEST_P(OpGradient, MatchesFiniteDifferencesOnTenInstances) {
  const UnaryCase& c = GetParam();
  Rng rng(Rng::fnv1a(c.name));
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tensor> in;
    for (std::size_t k = 0; k < c.inputs; ++k) in.push_back(random_tensor(4, 3, rng, c.lo, c.hi));
    EXPECT_LT(fd_error(c.f, in), kOpTolerance) << c.name << " trial " << trial;
  }
}

Var ws(Tape& t, Var x) { return weighted_sum(t, x, 5); }

INSTANTIATE_TEST_SUITE_P(
    Suite, OpGradient,
    ::testing::Values(
        UnaryCase{"add", [](Tape& t, const auto& v) { return ws(t, add(v[0], v[1])); }, -1, 1, 2},
        UnaryCase{"sub", [](Tape& t, const auto& v) { return ws(t, sub(v[0], v[1])); }, -1, 1, 2},
        UnaryCase{"scale", [](Tape& t, const auto& v) { return ws(t, scale(v[0], -2.5)); }, -1, 1, 1},
        UnaryCase{"hadamard", [](Tape& t, const auto& v) { return ws(t, hadamard(v[0], v[1])); }, -1, 1, 2},
        UnaryCase{"exp", [](Tape& t, const auto& v) { return ws(t, exp(v[0])); }, -1, 1, 1},
        UnaryCase{"log", [](Tape& t, const auto& v) { return ws(t, log(v[0])); }, 0.2, 2, 1},
        UnaryCase{"relu", [](Tape& t, const auto& v) { return ws(t, relu(v[0])); }, -1, 1, 1},
        UnaryCase{"sigmoid", [](Tape& t, const auto& v) { return ws(t, sigmoid(v[0])); }, -3, 3, 1},
        UnaryCase{"concat_cols", [](Tape& t, const auto& v) { return ws(t, concat_cols({v[0], v[1]})); }, -1, 1, 2},
        UnaryCase{"row_sum", [](Tape& t, const auto& v) { return ws(t, row_sum(v[0])); }, -1, 1, 1},
        UnaryCase{"row_mean", [](Tape& t, const auto& v) { return ws(t, row_mean(v[0])); }, -1, 1, 1},
        UnaryCase{"sq_norm_rows", [](Tape& t, const auto& v) { return ws(t, sq_norm_rows(v[0])); }, -1, 1, 1},
        UnaryCase{"variance_rows", [](Tape& t, const auto& v) { return ws(t, variance_rows(v[0])); }, -1, 1, 1},
        UnaryCase{"cosine_rows", [](Tape& t, const auto& v) { return ws(t, cosine_rows(v[0], v[1])); }, -1, 1, 2},
        UnaryCase{"row_softmax", [](Tape& t, const auto& v) { return ws(t, row_softmax(v[0])); }, -2, 2, 1},
        UnaryCase{"slice_cols", [](Tape& t, const auto& v) { return ws(t, slice_cols(v[0], 1, 2)); }, -1, 1, 1},
        UnaryCase{"sum_all", [](Tape&, const auto& v) { return sum_all(hadamard(v[0], v[0])); }, -1, 1, 1},
        UnaryCase{"mean_all", [](Tape&, const auto& v) { return mean_all(hadamard(v[0], v[1])); }, -1, 1, 2}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(RowSoftmax, SymmetricRowIsUniform) {
  const Tensor y = row_softmax(Tensor::rows_of({{0, 0}}));
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
}

TEST(RowSoftmax, LogThreeGapGivesQuarterAndThreeQuarters) {
  for (double c : {-50.0, 0.0, 3.7, 400.0}) {
    const Tensor y = row_softmax(Tensor::rows_of({{c, c + std::log(3.0)}}));
    EXPECT_NEAR(y[0], 0.25, 1e-12) << c;
    EXPECT_NEAR(y[1], 0.75, 1e-12) << c;
  }
}

TEST(RowSoftmax, LargeLogitDoesNotOverflow) {
  const Tensor y = row_softmax(Tensor::rows_of({{1000, 0}}));
  EXPECT_TRUE(y.all_finite());
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_LT(y[1], 1e-300);
}

TEST(RowSoftmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor(6, 5, rng, -20, 20);
    Tensor shifted = x;
    const double c = rng.uniform(-100, 100);
    for (double& v : shifted.values()) v += c;
    const Tensor a = row_softmax(x), b = row_softmax(shifted);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (double v : a.row(i)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_LE(max_abs_diff(a, b), 1e-12);
  }
}

TEST(GumbelSoftmax, EvalModeTakesArgmax) {
  Tape t;
  Rng rng(0);
  const GumbelSample s = gumbel_softmax_st(t.constant(Tensor::rows_of({{0.7, 0.3}})), 1.0, rng, false);
  EXPECT_EQ(s.hard.value(), Tensor::rows_of({{1, 0}}));
}

TEST(GumbelSoftmax, EvalTiesGoToLowestIndex) {
  Tape t;
  const GumbelSample s = gumbel_softmax_st(t.constant(Tensor::rows_of({{0.25, 0.5, 0.25}, {0.5, 0.5, 0.0}})), 1.0, nullptr);
  EXPECT_EQ(s.hard.value(), Tensor::rows_of({{0, 1, 0}, {1, 0, 0}}));
}

TEST(GumbelSoftmax, TrainModeRowsAreDistributionsAndHardIsOneHot) {
  Tape t;
  Rng rng(42);
  const GumbelSample s = gumbel_softmax_st(t.constant(Tensor(8, 2, 0.5)), 1.0, rng, true);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(s.soft.value()(i, 0) + s.soft.value()(i, 1), 1.0, 1e-12);
    EXPECT_EQ(s.hard.value()(i, 0) + s.hard.value()(i, 1), 1.0);
    EXPECT_EQ(s.hard.value()(i, argmax_row(s.soft.value(), i)), 1.0);
  }
}

TEST(GumbelSoftmax, ZeroProbabilityIsFloored) {
  Tape t;
  Rng rng(5);
  const GumbelSample s = gumbel_softmax_st(t.constant(Tensor::rows_of({{1.0, 0.0}})), 0.5, rng, true);
  EXPECT_TRUE(s.soft.value().all_finite());
}

TEST(GumbelSoftmax, SameSeedSameSample) {
  auto draw = [](std::uint64_t seed) {
    Tape t;
    Rng rng(seed);
    return gumbel_softmax_st(t.constant(Tensor(5, 3, 1.0 / 3)), 0.7, rng, true).hard.value();
  };
  EXPECT_EQ(draw(9), draw(9));
}

TEST(GumbelSoftmax, StraightThroughPassesGradientUnchanged) {
  Rng rng(6);
  const Tensor noise = gumbel_noise(4, 3, rng);
  Tensor p = row_softmax(random_tensor(4, 3, rng));
  Tape t;
  Var pv = t.variable(p);
  const GumbelSample s = gumbel_softmax_st(pv, 0.8, &noise);
  Var loss = weighted_sum(t, s.hard, 17);
  t.backward(loss, true);
  EXPECT_EQ(t.grad(s.soft), t.grad(s.hard));
}

TEST(GumbelSoftmax, HardGradientEqualsSoftPathFiniteDifferences) {
  Rng rng(7);
  const Tensor noise = gumbel_noise(4, 3, rng);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor p = row_softmax(random_tensor(4, 3, rng));
    Tensor through_hard = p;
    through_hard.zero_grad();
    {
      Tape t;
      t.backward(weighted_sum(t, gumbel_softmax_st(t.parameter(through_hard), 0.8, &noise).hard, 17));
    }
    std::vector<Tensor> in{p};
    std::vector<double> numeric(p.size());
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto soft_loss = [&](double delta) {
        Tensor q = p;
        q[i] += delta;
        Tape t;
        return weighted_sum(t, gumbel_softmax_st(t.constant(q), 0.8, &noise).soft, 17).value()[0];
      };
      numeric[i] = (soft_loss(h) - soft_loss(-h)) / (2 * h);
      EXPECT_LT(relative_error(through_hard.grad[i], numeric[i]), kOpTolerance) << i;
    }
  }
}

TEST(Backward, LinearLossGivesOuterProduct) {
  Tensor w(1, 3, std::vector<double>{0.5, -1, 2});
  Tape t;
  Var x = t.constant(Tensor::column({1, 2, 3}));
  t.backward(sum_all(matmul(t.parameter(w), x)));
  EXPECT_EQ(w.grad, (std::vector<double>{1, 2, 3}));
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor w(2, 2, 1.0);
  Tape t;
  EXPECT_THROW(t.backward(t.parameter(w)), ContractError);
}

TEST(Backward, TapeIsClearedAfterwards) {
  Tensor w(1, 1, 2.0);
  Tape t;
  t.backward(sum_all(hadamard(t.parameter(w), t.parameter(w))));
  EXPECT_EQ(t.size(), 0u);
  EXPECT_DOUBLE_EQ(w.grad[0], 4.0);
}

TEST(Backward, AccumulatesOncePerUse) {
  Tensor w(1, 1, 3.0);
  Tape t;
  Var a = t.parameter(w);
  t.backward(sum_all(add(add(a, a), a)));
  EXPECT_DOUBLE_EQ(w.grad[0], 3.0);
}

TEST(Backward, FullModelMatchesFiniteDifferences) {
  const DatasetBundle b = testing::two_triangle_bundle();
  HyperParams hp;
  hp.hidden_dim = 8;
  Rng rng(3);
  ModelParams p = ModelParams::init(b.d(), b.num_classes, 2, hp, rng);
  const GradcheckReport r = model_gradcheck(b, p, hp, 3);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "]";
}

TEST(Backward, RepeatedRunsGiveIdenticalGradients) {
  const DatasetBundle b = testing::two_triangle_bundle();
  HyperParams hp;
  hp.hidden_dim = 8;
  auto grads = [&] {
    Rng rng(3);
    ModelParams p = ModelParams::init(b.d(), b.num_classes, 2, hp, rng);
    Rng grng = Rng(5).derive("gumbel"), drng = Rng(5).derive("dropout");
    const ForwardNoise noise = sample_noise(b.n(), 2, hp.hidden_dim, hp.layers, hp.dropout, grng, drng);
    Tape t;
    ForwardOptions opt;
    opt.train = true;
    opt.noise = &noise;
    const ForwardResult fr = forward(t, b.graph, b.features, p, hp.ablate, opt);
    t.backward(composite_loss(fr, b, b.mask(Role::train), hp.beta1, hp.beta2, hp.tau_calib).total);
    std::vector<std::vector<double>> g;
    for (auto& [name, tensor] : p.named()) g.push_back(tensor->grad);
    return g;
  };
  EXPECT_EQ(grads(), grads());
}

TEST(Adam, ZeroGradientWithoutDecayKeepsParams) {
  Tensor p(2, 2, std::vector<double>{1, -2, 3, 4});
  const Tensor before = p;
  p.zero_grad();
  AdamState s(1e-3, 0.0);
  for (int i = 0; i < 5; ++i) s.update({&p});
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p(1, 1, 0.0);
  p.grad = {1.0};
  AdamState s(1e-3, 0.0);
  s.update({&p});
  EXPECT_NEAR(p[0], -1e-3, 1e-10);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, ConvergesOnQuadratic) {
  Tensor p(1, 1, 0.0);
  AdamState s(0.1, 0.0);
  for (int i = 0; i < 200; ++i) {
    p.grad = {2 * (p[0] - 3)};
    s.update({&p});
  }
  EXPECT_LT(std::abs(p[0] - 3), 1e-2);
}

TEST(Adam, WeightDecayIsAddedToGradient) {
  Tensor a(1, 1, 2.0), b(1, 1, 2.0);
  a.grad = {0.0};
  b.grad = {0.5 * 2.0};
  AdamState sa(1e-2, 0.5), sb(1e-2, 0.0);
  sa.update({&a});
  sb.update({&b});
  EXPECT_DOUBLE_EQ(a[0], b[0]);
}

TEST(Adam, ShapeChangeIsContractError) {
  Tensor p(1, 2);
  p.zero_grad();
  AdamState s;
  s.update({&p});
  Tensor q(2, 1);
  q.zero_grad();
  EXPECT_THROW(s.update({&q}), ContractError);
}

TEST(ClipGradNorm, ScalesToMaximum) {
  Tensor a(1, 2);
  a.grad = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_grad_norm({&a}, 1.0), 5.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(a.grad[1], 0.8, 1e-15);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedStreamsIgnoreParentDraws) {
  Rng a(7), b(7);
  for (int i = 0; i < 10; ++i) b.next_u64();
  Rng ca = a.derive("init"), cb = b.derive("init");
  EXPECT_EQ(ca.next_u64(), cb.next_u64());
  EXPECT_NE(a.derive("init").next_u64(), a.derive("gumbel").next_u64());
}

TEST(Rng, UniformIntStaysInRange) {
  Rng r(9);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) ++counts[r.uniform_int(5)];
  for (int c : counts) EXPECT_GT(c, 850);
}

TEST(Checkpoint, RoundTripsTensorsBitExactly) {
  Rng rng(8);
  Tensor a = random_tensor(3, 4, rng), b = random_tensor(1, 7, rng);
  const auto dir = std::filesystem::temp_directory_path() / "hugnn_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, {{"a", &a}, {"b", &b}}, {{"seed", 8}});
  const Checkpoint c = load_checkpoint(dir);
  EXPECT_EQ(c.at("a"), a);
  EXPECT_EQ(c.at("b"), b);
  EXPECT_EQ(c.manifest.at("dtype"), "f64");
  EXPECT_EQ(c.manifest.at("byte_order"), "little-endian");
  EXPECT_EQ(c.manifest.at("seed"), 8);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace hugnn
