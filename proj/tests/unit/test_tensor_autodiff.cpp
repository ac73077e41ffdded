#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "wrecon/optim.hpp"

using namespace wrecon;
using wrecon::testing::check_grad;
using wrecon::testing::random_tensor;

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_FLOAT_EQ(t.sum(), 9.0);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Tensor, ElementAccessIsRowMajor) {
  Tensor t({1, 2, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  EXPECT_EQ(t.at(0, 1, 0, 2), 8.0f);
  EXPECT_EQ(t.at(0, 0, 1, 0), 3.0f);
}

TEST(Conv2d, IdentityKernel) {
  const Tensor x = random_tensor({1, 1, 4, 4}, 1);
  Tensor w({1, 1, 3, 3});
  w.at(0, 0, 1, 1) = 1.0f;
  Var y = conv2d(constant(x), constant(w), constant(Tensor::zeros({1})));
  EXPECT_EQ(max_abs_diff(y->value, x), 0.0f);
}

TEST(Conv2d, AllOnesKernelOn2x2) {
  Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  Var y = conv2d(constant(x), constant(Tensor::ones({1, 1, 3, 3})), constant(Tensor::zeros({1})));
  for (float v : y->value.data()) EXPECT_EQ(v, 10.0f);
}

TEST(Conv2d, ShapeErrors) {
  Var x = constant(Tensor({1, 2, 4, 4}));
  EXPECT_THROW(conv2d(x, constant(Tensor({1, 3, 3, 3})), nullptr), ShapeError);
  EXPECT_THROW(conv2d(x, constant(Tensor({1, 2, 5, 5})), nullptr), ShapeError);
  EXPECT_THROW(conv2d(x, constant(Tensor({4, 2, 3, 3})), constant(Tensor({3}))), ShapeError);
}

TEST(Conv2d, GradientOfSumWrtWeight) {
  const Tensor x = random_tensor({1, 2, 5, 5}, 2);
  const Tensor w = random_tensor({3, 2, 3, 3}, 3);
  const Tensor b = random_tensor({3}, 4);
  Var xv = constant(x), wv = variable(w), bv = constant(b);
  backward(sum(conv2d(xv, wv, bv)));
  auto f = [&](const Tensor& wt) {
    NoGradGuard g;
    return conv2d(constant(x), constant(wt), constant(b))->value.sum();
  };
  const auto cmp = compare_gradients(wv->grad, finite_difference_grad(f, w), 1e-2);
  EXPECT_EQ(cmp.fraction(), 1.0) << "max rel " << cmp.max_rel;
}

TEST(Conv2d, GradientsAllInputs) {
  const std::vector<Tensor> in = {random_tensor({2, 2, 5, 4}, 5), random_tensor({3, 2, 3, 3}, 6),
                                  random_tensor({3}, 7)};
  auto build = [](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2]); };
  for (std::size_t k = 0; k < 3; ++k) {
    const auto cmp = check_grad(build, in, k, 100 + k);
    EXPECT_GE(cmp.fraction(), 0.95) << "input " << k;
    EXPECT_LE(cmp.max_rel, 5e-2) << "input " << k;
  }
}

TEST(Conv2d, LinearInInput) {
  const Tensor x = random_tensor({1, 2, 6, 6}, 8), y = random_tensor({1, 2, 6, 6}, 9);
  const Var w = constant(random_tensor({2, 2, 3, 3}, 10));
  auto apply = [&](const Tensor& t) { return conv2d(constant(t), w, nullptr)->value; };
  EXPECT_LE(max_abs_diff(apply(x + y), apply(x) + apply(y)), 1e-5f);
  EXPECT_LE(max_abs_diff(apply(x * 2.5f), apply(x) * 2.5f), 1e-5f);
}

TEST(BatchNorm, AlreadyNormalizedPassesThrough) {
  // channel values +-1 in equal numbers: mean 0, biased variance 1
  Tensor x({2, 2, 2, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 == 0) ? 1.0f : -1.0f;
  BatchNormStats st(2);
  Var y = batchnorm2d(constant(x), constant(Tensor::ones({2})), constant(Tensor::zeros({2})), st, Mode::Train);
  EXPECT_LE(max_abs_diff(y->value, x), 1e-4f);
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
  BatchNormStats st(3);
  const Tensor x = random_tensor({2, 3, 4, 4}, 11, -5, 5);
  Var y = batchnorm2d(constant(x), constant(Tensor::zeros({3})), constant(Tensor({3}, 5.0f)), st, Mode::Train);
  for (float v : y->value.data()) EXPECT_EQ(v, 5.0f);
}

TEST(BatchNorm, EvalBeforeTrainUsesInitialStats) {
  BatchNormStats st(1);
  const Tensor x = random_tensor({1, 1, 3, 3}, 12);
  Var y = batchnorm2d(constant(x), constant(Tensor::ones({1})), constant(Tensor::zeros({1})), st, Mode::Eval);
  const float scale = 1.0f / std::sqrt(1.0f + kBatchNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y->value[i], x[i] * scale, 1e-6);
}

TEST(BatchNorm, RunningStatsUpdate) {
  Tensor x({2, 1, 1, 2}, std::vector<float>{1, 2, 3, 4});
  BatchNormStats st(1);
  batchnorm2d(constant(x), constant(Tensor::ones({1})), constant(Tensor::zeros({1})), st, Mode::Train);
  // mean 2.5, unbiased var 5/3
  EXPECT_NEAR(st.running_mean[0], 0.25, 1e-6);
  EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-6);
}

TEST(BatchNorm, TrainNeedsTwoValues) {
  BatchNormStats st(1);
  EXPECT_THROW(batchnorm2d(constant(Tensor({1, 1, 1, 1})), constant(Tensor::ones({1})),
                           constant(Tensor::zeros({1})), st, Mode::Train),
               ShapeError);
}

TEST(BatchNorm, Gradients) {
  const std::vector<Tensor> in = {random_tensor({2, 2, 3, 3}, 13), random_tensor({2}, 14, 0.5, 1.5),
                                  random_tensor({2}, 15)};
  auto build = [](const std::vector<Var>& v) {
    BatchNormStats st(2);
    return batchnorm2d(v[0], v[1], v[2], st, Mode::Train);
  };
  for (std::size_t k = 0; k < 3; ++k) {
    const auto cmp = check_grad(build, in, k, 200 + k);
    EXPECT_GE(cmp.fraction(), 0.95) << "input " << k << " max rel " << cmp.max_rel;
    EXPECT_LE(cmp.max_rel, 5e-2) << "input " << k;
  }
}

TEST(BatchNorm, EvalModeGradient) {
  BatchNormStats st(2);
  st.running_mean[0] = 0.3f;
  st.running_var[1] = 2.0f;
  const std::vector<Tensor> in = {random_tensor({1, 2, 3, 3}, 16), random_tensor({2}, 17), random_tensor({2}, 18)};
  auto build = [&](const std::vector<Var>& v) { return batchnorm2d(v[0], v[1], v[2], st, Mode::Eval); };
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(check_grad(build, in, k, 300 + k).fraction(), 1.0);
}

TEST(Relu, Values) {
  Var y = relu(constant(Tensor({3}, std::vector<float>{-1, 0, 2})));
  EXPECT_EQ(y->value.vec(), (std::vector<float>{0, 0, 2}));
  Var z = relu(constant(random_tensor({10}, 19, -3, -0.1)));
  for (float v : z->value.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Relu, Idempotent) {
  const Tensor x = random_tensor({50}, 20);
  EXPECT_EQ(relu(relu(constant(x)))->value.vec(), relu(constant(x))->value.vec());
}

TEST(Relu, GradientIsIndicator) {
  Tensor x = random_tensor({40}, 21);
  for (auto& v : x.data()) {
    if (std::fabs(v) < 0.01f) v = 0.5f;  // stay away from the kink
  }
  Var xv = variable(x);
  backward(sum(relu(xv)));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(xv->grad[i], x[i] > 0 ? 1.0f : 0.0f);
  auto build = [](const std::vector<Var>& v) { return relu(v[0]); };
  EXPECT_EQ(check_grad(build, {x}, 0, 22).fraction(), 1.0);
  Var zero = variable(Tensor({1}));
  backward(sum(relu(zero)));
  EXPECT_EQ(zero->grad[0], 0.0f);
}

TEST(Add, ValuesAndGradients) {
  Var a = variable(Tensor({2}, std::vector<float>{1, 2}));
  Var b = variable(Tensor({2}, std::vector<float>{3, 4}));
  Var c = add(a, b);
  EXPECT_EQ(c->value.vec(), (std::vector<float>{4, 6}));
  backward(sum(c));
  EXPECT_EQ(a->grad.vec(), (std::vector<float>{1, 1}));
  EXPECT_EQ(b->grad.vec(), (std::vector<float>{1, 1}));
  const Tensor x = random_tensor({3, 3}, 23);
  EXPECT_EQ(add(constant(x), constant(Tensor::zeros({3, 3})))->value.vec(), x.vec());
  EXPECT_THROW(add(a, constant(Tensor({3}))), ShapeError);
  auto build = [](const std::vector<Var>& v) { return add(v[0], v[1]); };
  const std::vector<Tensor> in = {random_tensor({2, 3}, 24), random_tensor({2, 3}, 25)};
  EXPECT_EQ(check_grad(build, in, 0, 26).fraction(), 1.0);
  EXPECT_EQ(check_grad(build, in, 1, 27).fraction(), 1.0);
}

TEST(MseLoss, Values) {
  const Tensor t = random_tensor({2, 1, 2, 2}, 28);
  EXPECT_EQ(mse_loss(constant(t), t)->value[0], 0.0f);
  Var p = constant(Tensor({1, 2}, std::vector<float>{3, 4}));
  EXPECT_FLOAT_EQ(mse_loss(p, Tensor({1, 2}))->value[0], 25.0f);
  EXPECT_THROW(mse_loss(p, Tensor({2, 1})), ShapeError);
}

TEST(MseLoss, GradientClosedFormAndFiniteDifference) {
  const Tensor pred = random_tensor({3, 1, 2, 2}, 29), target = random_tensor({3, 1, 2, 2}, 30);
  Var p = variable(pred);
  backward(mse_loss(p, target));
  for (std::size_t i = 0; i < pred.size(); ++i) EXPECT_NEAR(p->grad[i], 2.0f * (pred[i] - target[i]) / 3.0f, 1e-6);
  auto f = [&](const Tensor& x) {
    NoGradGuard g;
    return static_cast<double>(mse_loss(constant(x), target)->value[0]);
  };
  const auto cmp = compare_gradients(p->grad, finite_difference_grad(f, pred), 1e-2);
  EXPECT_EQ(cmp.fraction(), 1.0);
}

TEST(Backward, SumAndSquare) {
  const Tensor x = random_tensor({5}, 31);
  Var a = variable(x);
  backward(sum(a));
  for (float g : a->grad.data()) EXPECT_EQ(g, 1.0f);
  Var b = variable(x);
  backward(sum(square(b)));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(b->grad[i], 2.0f * x[i]);
}

TEST(Backward, AccumulatesAcrossCalls) {
  Var a = variable(Tensor({2}, 1.0f));
  backward(sum(a));
  backward(sum(a));
  EXPECT_EQ(a->grad.vec(), (std::vector<float>{2, 2}));
}

TEST(Backward, SharedSubexpressionGetsSummedGradient) {
  Var a = variable(Tensor({2}, std::vector<float>{1, -2}));
  Var s = add(a, a);
  backward(sum(add(s, a)));
  EXPECT_EQ(a->grad.vec(), (std::vector<float>{3, 3}));
}

TEST(Backward, RejectsNonScalar) {
  Var a = variable(Tensor({2}));
  EXPECT_THROW(backward(a), ShapeError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Var a = variable(Tensor({2}, 1.0f));
  NoGradGuard g;
  Var s = sum(a);
  EXPECT_FALSE(s->requires_grad);
  EXPECT_TRUE(s->parents.empty());
}

TEST(Adam, ZeroGradIsIdentity) {
  Parameter p("w", random_tensor({4}, 32));
  const Tensor before = p.value();
  Parameter* ps[] = {&p};
  for (int i = 0; i < 3; ++i) adam_step(ps, AdamConfig{});
  EXPECT_EQ(p.value().vec(), before.vec());
  EXPECT_EQ(p.step, 3);
}

TEST(Adam, FirstStepMovesByLr) {
  Parameter p("w", Tensor({3}, std::vector<float>{0.5f, -1.0f, 2.0f}));
  p.grad() = Tensor({3}, std::vector<float>{0.3f, -4.0f, 7.0f});
  Parameter* ps[] = {&p};
  AdamConfig cfg;
  adam_step(ps, cfg);
  EXPECT_NEAR(p.value()[0], 0.5f - cfg.lr, 1e-6);
  EXPECT_NEAR(p.value()[1], -1.0f + cfg.lr, 1e-6);
  EXPECT_NEAR(p.value()[2], 2.0f - cfg.lr, 1e-6);
  for (float g : p.grad().data()) EXPECT_EQ(g, 0.0f);
}

TEST(Adam, MatchesScalarRecurrenceOnQuadratic) {
  Parameter p("w", Tensor({1}, 1.0f));
  Parameter* ps[] = {&p};
  AdamConfig cfg;
  cfg.lr = 0.1f;
  // independent double-precision recurrence
  double w = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    p.grad()[0] = 2.0f * p.value()[0];
    adam_step(ps, cfg);
    const double g = 2.0 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_LT(std::fabs(p.value()[0]), 0.1f);
  EXPECT_NEAR(p.value()[0], w, 1e-4);
}

TEST(Parameter, CopyIsDeep) {
  Parameter a("w", Tensor({2}, 1.0f));
  Parameter b = a;
  b.value()[0] = 5.0f;
  EXPECT_EQ(a.value()[0], 1.0f);
  EXPECT_NE(a.node.get(), b.node.get());
  EXPECT_TRUE(b.node->requires_grad);
}

TEST(FiniteDifference, SumAndSquares) {
  const Tensor x = random_tensor({6}, 33);
  const Tensor g = finite_difference_grad([](const Tensor& t) { return t.sum(); }, x);
  for (float v : g.data()) EXPECT_NEAR(v, 1.0, 1e-6);
  const Tensor y({2}, std::vector<float>{1, 2});
  const Tensor g2 = finite_difference_grad([](const Tensor& t) { return t.squared_norm(); }, y, 1e-3);
  EXPECT_NEAR(g2[0], 2.0, 1e-3);
  EXPECT_NEAR(g2[1], 4.0, 1e-3);
}

TEST(CountOps, CountsReachableNodes) {
  Var a = variable(Tensor({2}, 1.0f));
  Var r = sum(add(relu(a), relu(a)));
  EXPECT_EQ(count_ops(r, "relu"), 2u);
  EXPECT_EQ(count_ops(r, "add"), 1u);
}
