// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <sstream>

#include "nav/autodiff/checkpoint.hpp"
#include "nav/autodiff/grad_check.hpp"
#include "nav/autodiff/init.hpp"
#include "nav/autodiff/param_vector.hpp"
#include "nav/autodiff/rmsprop.hpp"
#include "nav/autodiff/tape.hpp"
#include "test_util.hpp"

using namespace nav;
using namespace nav::ad;

namespace {

constexpr double kTol = 1e-5;
constexpr int kTrials = 100;

// Scalar read-out of any node: a fixed random projection.
Var project(Tape<double>& t, Var y, std::mt19937_64& rng) {
  const std::size_t n = t.value(y).size();
  std::vector<double> r(n);
  navtest::fill_uniform<double>(r, rng);
  const double zero = 0;
  const Var w = t.constant(r, Shape{1, static_cast<int>(n)});
  return t.linear(y, w, t.constant(std::span<const double>(&zero, 1)));
}

// Runs `trials` grad checks, each with fresh random values and a fresh
// projection seed, and returns the worst relative error.
double worst_error(ParamVector<double>& p, int trials, std::uint64_t seed,
                   const std::function<Var(Tape<double>&, ParamVector<double>&)>& body) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int i = 0; i < trials; ++i) {
    navtest::randomize(p, rng);
    const std::uint64_t proj_seed = rng();
    auto r = grad_check(p, [&](Tape<double>& t, ParamVector<double>& params) {
      std::mt19937_64 prng(proj_seed);
      return project(t, body(t, params), prng);
    });
    worst = std::max(worst, r.max_rel_error);
  }
  return worst;
}

}  // namespace

TEST(Linear, IdentityAndZeroWeights) {
  Tape<double> t;
  const std::vector<double> x{1, 2, 3}, eye{1, 0, 0, 0, 1, 0, 0, 0, 1}, zero3{0, 0, 0};
  auto y = t.linear(t.constant(x), t.constant(eye, Shape{3, 3}), t.constant(zero3));
  EXPECT_EQ(std::vector<double>(t.value(y).begin(), t.value(y).end()), x);

  const std::vector<double> w0{0, 0, 0}, b{5};
  auto z = t.linear(t.constant(x), t.constant(w0, Shape{1, 3}), t.constant(b));
  EXPECT_EQ(t.scalar(z), 5.0);
}

TEST(Linear, SumGradientIsOuterProductWithOnes) {
  ParamVector<double> p;
  auto w = p.add("w", Shape{3, 4});
  auto b = p.add("b", Shape{3});
  std::mt19937_64 rng(3);
  navtest::randomize(p, rng);
  std::vector<double> x(4);
  navtest::fill_uniform<double>(x, rng);
  Tape<double> t;
  const std::vector<double> ones{1, 1, 1}, zero{0};
  auto y = t.linear(t.constant(x), t.parameter(p, w), t.parameter(p, b));
  auto s = t.linear(y, t.constant(ones, Shape{1, 3}), t.constant(zero));
  t.backward(s);
  auto gw = p.grads(w);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(gw[i * 4 + j], x[j]);
  for (double g : p.grads(b)) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Linear, GradCheckRandomized) {
  ParamVector<double> p;
  auto x = p.add("x", Shape{5});
  auto w = p.add("w", Shape{4, 5});
  auto b = p.add("b", Shape{4});
  EXPECT_LT(worst_error(p, kTrials, 11,
                        [&](Tape<double>& t, ParamVector<double>& q) {
                          return t.linear(t.parameter(q, x), t.parameter(q, w), t.parameter(q, b));
                        }),
            kTol);
}

TEST(Conv2d, OutputShapes) {
  Tape<double> t;
  std::vector<double> img(3 * 84 * 84, 0.5), k1(16 * 3 * 8 * 8, 0.01), b1(16, 0.0);
  auto y1 = t.conv2d(t.constant(img, Shape{3, 84, 84}), t.constant(k1, Shape{16, 3, 8, 8}),
                     t.constant(b1), 4);
  EXPECT_EQ(t.shape(y1), (Shape{16, 20, 20}));
  std::vector<double> k2(32 * 16 * 4 * 4, 0.01), b2(32, 0.0);
  auto y2 = t.conv2d(y1, t.constant(k2, Shape{32, 16, 4, 4}), t.constant(b2), 2);
  EXPECT_EQ(t.shape(y2), (Shape{32, 9, 9}));
}

TEST(Conv2d, OneByOneIdentityKernel) {
  Tape<double> t;
  std::mt19937_64 rng(5);
  std::vector<double> img(2 * 5 * 5);
  navtest::fill_uniform<double>(img, rng);
  // Selects channel 1.
  const std::vector<double> k{0, 1}, b{0};
  auto y = t.conv2d(t.constant(img, Shape{2, 5, 5}), t.constant(k, Shape{1, 2, 1, 1}),
                    t.constant(b), 1);
  ASSERT_EQ(t.shape(y), (Shape{1, 5, 5}));
  for (int i = 0; i < 25; ++i) EXPECT_EQ(t.value(y)[i], img[25 + i]);
}

TEST(Conv2d, GradCheckRandomized) {
  for (int stride : {1, 2}) {
    ParamVector<double> p;
    auto x = p.add("x", Shape{2, 6, 6});
    auto k = p.add("k", Shape{3, 2, 3, 3});
    auto b = p.add("b", Shape{3});
    EXPECT_LT(worst_error(p, kTrials, 17 + stride,
                          [&](Tape<double>& t, ParamVector<double>& q) {
                            return t.conv2d(t.parameter(q, x), t.parameter(q, k),
                                            t.parameter(q, b), stride);
                          }),
              kTol)
        << "stride " << stride;
  }
}

TEST(LstmCell, ZeroParamsGateValues) {
  Tape<double> t;
  const std::vector<double> x{0.3}, h{0.0}, w(4 * 2, 0.0), b(4, 0.0);
  {
    const std::vector<double> c{0.0};
    auto [h1, c1] = t.lstm_cell(t.constant(x), t.constant(h), t.constant(c),
                                t.constant(w, Shape{4, 2}), t.constant(b));
    EXPECT_EQ(t.scalar(h1), 0.0);
    EXPECT_EQ(t.scalar(c1), 0.0);
  }
  {
    const std::vector<double> c{1.0};
    auto [h1, c1] = t.lstm_cell(t.constant(x), t.constant(h), t.constant(c),
                                t.constant(w, Shape{4, 2}), t.constant(b));
    EXPECT_NEAR(t.scalar(c1), 0.5, 1e-15);
    EXPECT_NEAR(t.scalar(h1), 0.5 * std::tanh(0.5), 1e-15);
  }
}

TEST(LstmCell, GradCheckBothOutputs) {
  ParamVector<double> p;
  auto x = p.add("x", Shape{3});
  auto h = p.add("h", Shape{4});
  auto c = p.add("c", Shape{4});
  auto w = p.add("w", Shape{16, 7});
  auto b = p.add("b", Shape{16});
  EXPECT_LT(worst_error(p, kTrials, 23,
                        [&](Tape<double>& t, ParamVector<double>& q) {
                          auto [h1, c1] = t.lstm_cell(t.parameter(q, x), t.parameter(q, h),
                                                      t.parameter(q, c), t.parameter(q, w),
                                                      t.parameter(q, b));
                          return t.concat({h1, c1});
                        }),
            kTol);
}

TEST(Elementwise, KnownValues) {
  Tape<double> t;
  const std::vector<double> x{-1, 2};
  auto r = t.relu(t.constant(x));
  EXPECT_EQ(t.value(r)[0], 0.0);
  EXPECT_EQ(t.value(r)[1], 2.0);
  const double zero = 0;
  EXPECT_EQ(t.scalar(t.sigmoid(t.constant(std::span<const double>(&zero, 1)))), 0.5);
  const std::vector<double> eq(8, 0.37);
  auto s = t.softmax(t.constant(eq));
  for (double v : t.value(s)) EXPECT_NEAR(v, 0.125, 1e-15);
  auto ls = t.log_softmax(t.constant(eq));
  for (double v : t.value(ls)) EXPECT_NEAR(v, -std::log(8.0), 1e-15);
}

TEST(Elementwise, GradCheckRandomized) {
  ParamVector<double> p;
  auto x = p.add("x", Shape{3, 5});
  using Fn = Var (Tape<double>::*)(Var);
  const std::pair<const char*, Fn> ops[] = {
      {"relu", &Tape<double>::relu},       {"sigmoid", &Tape<double>::sigmoid},
      {"tanh", &Tape<double>::tanh},       {"softmax", &Tape<double>::softmax},
      {"log_softmax", &Tape<double>::log_softmax}};
  std::uint64_t seed = 31;
  for (auto [name, fn] : ops) {
    EXPECT_LT(worst_error(p, kTrials, ++seed,
                          [&](Tape<double>& t, ParamVector<double>& q) {
                            return (t.*fn)(t.parameter(q, x));
                          }),
              kTol)
        << name;
  }
}

TEST(Concat, GradCheckRandomized) {
  ParamVector<double> p;
  auto a = p.add("a", Shape{3});
  auto b = p.add("b", Shape{2, 2});
  auto c = p.add("c", Shape{1});
  EXPECT_LT(worst_error(p, kTrials, 41,
                        [&](Tape<double>& t, ParamVector<double>& q) {
                          return t.concat({t.parameter(q, a), t.parameter(q, b), t.parameter(q, c)});
                        }),
            kTol);
}

TEST(WeightedSum, GradCheckRandomized) {
  ParamVector<double> p;
  auto a = p.add("a", Shape{4});
  auto b = p.add("b", Shape{4});
  const double w[2] = {0.7, -1.3};
  EXPECT_LT(worst_error(p, kTrials, 43,
                        [&](Tape<double>& t, ParamVector<double>& q) {
                          const Var terms[2] = {t.parameter(q, a), t.parameter(q, b)};
                          return t.weighted_sum(terms, w);
                        }),
            kTol);
}

TEST(Losses, KnownValues) {
  Tape<double> t;
  const std::vector<double> uniform(8, 0.0);
  for (int cls = 0; cls < 8; ++cls)
    EXPECT_NEAR(t.scalar(t.categorical_nll(t.constant(uniform), cls)), std::log(8.0), 1e-12);
  const std::vector<double> pred{0.1, -2, 3};
  EXPECT_EQ(t.scalar(t.mse(t.constant(pred), pred)), 0.0);
  EXPECT_NEAR(t.scalar(t.policy_entropy(t.constant(uniform))), std::log(8.0), 1e-12);
  std::vector<double> peaked(8, -1e6);
  peaked[3] = 0;
  EXPECT_NEAR(t.scalar(t.policy_entropy(t.constant(peaked))), 0.0, 1e-12);
  const double zero = 0;
  EXPECT_NEAR(t.scalar(t.bernoulli_nll(t.constant(std::span<const double>(&zero, 1)), 1.0)),
              std::log(2.0), 1e-15);
}

TEST(Losses, GradCheckRandomized) {
  std::mt19937_64 rng(47);
  ParamVector<double> p;
  auto logits = p.add("logits", Shape{3, 8});
  auto logit = p.add("logit", Shape{1});
  auto pred = p.add("pred", Shape{6});
  std::vector<int> classes{1, 7, 0};
  std::vector<double> target(6);
  navtest::fill_uniform<double>(target, rng);

  auto check = [&](const char* name, auto build) {
    double worst = 0;
    for (int i = 0; i < kTrials; ++i) {
      navtest::randomize(p, rng, -2, 2);
      worst = std::max(worst, grad_check(p, build).max_rel_error);
    }
    EXPECT_LT(worst, kTol) << name;
  };
  check("categorical_nll", [&](Tape<double>& t, ParamVector<double>& q) {
    return t.categorical_nll(t.parameter(q, logits), classes);
  });
  check("bernoulli_nll", [&](Tape<double>& t, ParamVector<double>& q) {
    return t.bernoulli_nll(t.parameter(q, logit), 1.0);
  });
  check("bernoulli_nll_0", [&](Tape<double>& t, ParamVector<double>& q) {
    return t.bernoulli_nll(t.parameter(q, logit), 0.0);
  });
  check("mse", [&](Tape<double>& t, ParamVector<double>& q) {
    return t.mse(t.parameter(q, pred), target);
  });
  check("policy_entropy", [&](Tape<double>& t, ParamVector<double>& q) {
    return t.policy_entropy(t.parameter(q, logits), 8);
  });
}

TEST(Backward, ConstantLossLeavesGradsZero) {
  ParamVector<double> p;
  auto w = p.add("w", Shape{3});
  Tape<double> t;
  t.parameter(p, w);  // bound but not on the loss path
  const std::vector<double> c{1, 2, 3};
  t.backward(t.mse(t.constant(c), std::vector<double>{0, 0, 0}));
  for (double g : p.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, TwiceDoublesGradients) {
  ParamVector<double> p;
  auto w = p.add("w", Shape{2, 3});
  auto b = p.add("b", Shape{2});
  std::mt19937_64 rng(53);
  navtest::randomize(p, rng);
  const std::vector<double> x{0.5, -1, 2}, target{0.1, 0.2};
  Tape<double> t;
  auto loss = t.mse(t.tanh(t.linear(t.constant(x), t.parameter(p, w), t.parameter(p, b))), target);
  t.backward(loss);
  std::vector<double> once(p.grad().begin(), p.grad().end());
  t.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(p.grad()[i], 2 * once[i]);
}

TEST(GradCheck, TwoLayerLinearChain) {
  ParamVector<double> p;
  auto w1 = p.add("w1", Shape{6, 4});
  auto b1 = p.add("b1", Shape{6});
  auto w2 = p.add("w2", Shape{3, 6});
  auto b2 = p.add("b2", Shape{3});
  std::mt19937_64 rng(59);
  navtest::randomize(p, rng);
  std::vector<double> x(4), target(3);
  navtest::fill_uniform<double>(x, rng);
  navtest::fill_uniform<double>(target, rng);
  auto r = grad_check(p, [&](Tape<double>& t, ParamVector<double>& q) {
    auto h = t.linear(t.constant(x), t.parameter(q, w1), t.parameter(q, b1));
    return t.mse(t.linear(h, t.parameter(q, w2), t.parameter(q, b2)), target);
  });
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, LinearSoftmaxNll) {
  ParamVector<double> p;
  auto w = p.add("w", Shape{8, 5});
  auto b = p.add("b", Shape{8});
  std::mt19937_64 rng(61);
  navtest::randomize(p, rng);
  std::vector<double> x(5);
  navtest::fill_uniform<double>(x, rng);
  auto r = grad_check(p, [&](Tape<double>& t, ParamVector<double>& q) {
    return t.categorical_nll(t.linear(t.constant(x), t.parameter(q, w), t.parameter(q, b)), 3);
  });
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, DeadReluPath) {
  ParamVector<double> p;
  auto w1 = p.add("w1", Shape{4, 3});
  auto b1 = p.add("b1", Shape{4});
  auto w2 = p.add("w2", Shape{1, 4});
  auto b2 = p.add("b2", Shape{1});
  std::mt19937_64 rng(67);
  navtest::randomize(p, rng);
  // Unit 0 is always off: its weights only see positive inputs, bias -10.
  auto w1v = p.values(w1);
  for (int j = 0; j < 3; ++j) w1v[j] = std::abs(w1v[j]) * 0.1;
  p.values(b1)[0] = -10;
  const std::vector<double> x{0.2, 0.4, 0.6}, target{0.3};
  auto r = grad_check(p, [&](Tape<double>& t, ParamVector<double>& q) {
    auto h = t.relu(t.linear(t.constant(x), t.parameter(q, w1), t.parameter(q, b1)));
    return t.mse(t.linear(h, t.parameter(q, w2), t.parameter(q, b2)), target);
  });
  EXPECT_LT(r.max_rel_error, 1e-5);
  // The dead unit's incoming weights get exactly zero gradient.
  Tape<double> t;
  p.zero_grad();
  auto h = t.relu(t.linear(t.constant(x), t.parameter(p, w1), t.parameter(p, b1)));
  t.backward(t.mse(t.linear(h, t.parameter(p, w2), t.parameter(p, b2)), target));
  for (int j = 0; j < 3; ++j) EXPECT_EQ(p.grads(w1)[j], 0.0);
}

TEST(GradCheck, ShrinksStepAcrossKink) {
  // relu(w - 0.5 * 1e-3): the first stencil at eps 1e-3 straddles the kink.
  ParamVector<double> p;
  auto w = p.add("w", Shape{1});
  p.values(w)[0] = 2e-3;
  const std::vector<double> off{-1.5e-3};
  auto build = [&](Tape<double>& t, ParamVector<double>& q) {
    const Var parts[2] = {t.parameter(q, w), t.constant(off)};
    const double ones[2] = {1.0, 1.0};
    const Var y = t.relu(t.weighted_sum(parts, ones));
    const double h = 0.5;
    return t.weighted_sum(std::span<const Var>(&y, 1), std::span<const double>(&h, 1));
  };
  auto r = grad_check(p, build, 1e-3);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.on_kink, 0u);
  // Exactly on the kink no step is smooth on both sides.
  p.values(w)[0] = 1.5e-3;
  r = grad_check(p, build, 1e-3);
  EXPECT_EQ(r.on_kink, 1u);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, ConvLstmValueMicroNet) {
  ParamVector<double> p;
  auto ck = p.add("ck", Shape{2, 1, 3, 3});
  auto cb = p.add("cb", Shape{2});
  auto lw = p.add("lw", Shape{16, 8 + 4});
  auto lb = p.add("lb", Shape{16});
  auto vw = p.add("vw", Shape{1, 4});
  auto vb = p.add("vb", Shape{1});
  ASSERT_LE(p.size(), 2000u);
  std::mt19937_64 rng(71);
  navtest::randomize(p, rng, -0.5, 0.5);
  std::vector<std::vector<double>> frames(3, std::vector<double>(16));
  for (auto& f : frames) navtest::fill_uniform<double>(f, rng, 0, 1);
  const std::vector<double> h0(4, 0.0), target{0.7};
  auto r = grad_check(p, [&](Tape<double>& t, ParamVector<double>& q) {
    const Var k = t.parameter(q, ck), kb = t.parameter(q, cb), w = t.parameter(q, lw),
              b = t.parameter(q, lb), v = t.parameter(q, vw), vbv = t.parameter(q, vb);
    Var h = t.constant(h0), c = t.constant(h0);
    std::vector<Var> losses;
    for (const auto& f : frames) {
      auto feat = t.relu(t.conv2d(t.constant(f, Shape{1, 4, 4}), k, kb, 1));
      std::tie(h, c) = t.lstm_cell(feat, h, c, w, b);
      losses.push_back(t.mse(t.linear(h, v, vbv), target));
    }
    const std::vector<double> ones(losses.size(), 1.0);
    return t.weighted_sum(losses, ones);
  });
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(RmsProp, ZeroGradientLeavesParams) {
  std::vector<float> params{1, -2, 3}, grads(3, 0.0f);
  RmsPropState<float> st(3);
  st.ms = {0.5f, 0.5f, 0.5f};
  rmsprop_apply<float>(params, grads, st, 0.1f);
  EXPECT_EQ(params, (std::vector<float>{1, -2, 3}));
  for (float m : st.ms) EXPECT_FLOAT_EQ(m, 0.99f * 0.5f);
}

TEST(RmsProp, SingleStepArithmetic) {
  std::vector<double> params{0.0};
  const std::vector<double> g{1.0};
  RmsPropState<double> st(1, 0.99, 0.1);
  const double lr = 1e-3;
  rmsprop_apply<double>(params, g, st, lr);
  EXPECT_NEAR(st.ms[0], 0.01, 1e-15);
  EXPECT_NEAR(-params[0], lr / std::sqrt(0.01 + 0.1), 1e-15);
}

TEST(RmsProp, RepeatedStepsShrink) {
  std::vector<double> params{0.0};
  const std::vector<double> g{1.0};
  RmsPropState<double> st(1);
  double prev = params[0];
  double prev_delta = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 5; ++i) {
    rmsprop_apply<double>(params, g, st, 1e-3);
    const double delta = prev - params[0];
    EXPECT_LT(delta, prev_delta);
    prev_delta = delta;
    prev = params[0];
  }
}

TEST(Clip, GlobalNorm) {
  std::vector<double> g{3, 4};
  EXPECT_DOUBLE_EQ(clip_by_global_norm<double>(g, 1.0), 5.0);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  EXPECT_NEAR(g[1], 0.8, 1e-15);
  std::vector<double> small{0.3, 0.4};
  clip_by_global_norm<double>(small, 1.0);
  EXPECT_EQ(small, (std::vector<double>{0.3, 0.4}));
  std::vector<double> off{30, 40};
  clip_by_global_norm<double>(off, 0.0);
  EXPECT_EQ(off, (std::vector<double>{30, 40}));
}

TEST(ParamVector, SlicesPartitionAndRejectDuplicates) {
  ParamVector<float> p;
  p.add("a", Shape{2, 3});
  p.add("b", Shape{4});
  EXPECT_TRUE(p.is_partition());
  EXPECT_EQ(p.size(), 10u);
  EXPECT_THROW(p.add("a", Shape{1}), ConfigError);
  EXPECT_THROW(p.slice("zzz"), ConfigError);
}

TEST(Init, OrthogonalBlockIsOrthogonal) {
  std::mt19937_64 rng(73);
  const int n = 6;
  std::vector<double> m(n * n);
  init_orthogonal<double>(m.data(), n, n, n, rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dot = 0;
      for (int k = 0; k < n; ++k) dot += m[i * n + k] * m[j * n + k];
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Init, FanInUniformBounds) {
  std::mt19937_64 rng(79);
  std::vector<float> w(1000);
  init_fan_in_uniform<float>(w, 25, rng);
  for (float v : w) EXPECT_LE(std::abs(v), 0.2f);
}

TEST(Checkpoint, BitExactRoundTrip) {
  ParamVector<float> p;
  p.add("conv1.w", Shape{2, 1, 3, 3});
  p.add("fc.b", Shape{5});
  std::mt19937_64 rng(83);
  navtest::randomize(p, rng, -1e3, 1e3);
  p.flat()[0] = std::numeric_limits<float>::denorm_min();
  p.flat()[1] = -0.0f;
  std::stringstream buf;
  write_checkpoint(buf, to_records(p));
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.substr(0, 4), "NAVW");

  ParamVector<float> q;
  q.add("conv1.w", Shape{2, 1, 3, 3});
  q.add("fc.b", Shape{5});
  std::istringstream in(bytes);
  load_records(read_checkpoint(in), q);
  ASSERT_EQ(std::memcmp(p.flat().data(), q.flat().data(), p.size() * sizeof(float)), 0);

  std::stringstream again;
  write_checkpoint(again, to_records(q));
  EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, RejectsShapeMismatchAndTruncation) {
  ParamVector<float> p;
  p.add("w", Shape{4});
  std::stringstream buf;
  write_checkpoint(buf, to_records(p));
  ParamVector<float> q;
  q.add("w", Shape{2, 2});
  std::istringstream in(buf.str());
  EXPECT_THROW(load_records(read_checkpoint(in), q), DataError);
  const std::string cut = buf.str().substr(0, buf.str().size() - 3);
  std::istringstream in2(cut);
  EXPECT_THROW(read_checkpoint(in2), DataError);
  std::istringstream junk("NOPE");
  EXPECT_THROW(read_checkpoint(junk), DataError);
}

TEST(Tape, BackwardTraceCoversEveryRecord) {
  ParamVector<double> p;
  auto w = p.add("w", Shape{2, 2});
  auto b = p.add("b", Shape{2});
  Tape<double> t;
  const std::vector<double> x{1, 2};
  auto y = t.sigmoid(t.linear(t.constant(x), t.parameter(p, w), t.parameter(p, b)));
  auto loss = t.mse(y, std::vector<double>{0, 1});
  t.backward(loss);
  EXPECT_EQ(t.last_backward_trace().size(), t.num_records());
  EXPECT_EQ(t.op_log(), (std::vector<Op>{Op::kLinear, Op::kSigmoid, Op::kMse}));
}
