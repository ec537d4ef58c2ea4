#include <gtest/gtest.h>

#include <cmath>

#include "negmtl/autodiff.hpp"
#include "negmtl/gradcheck.hpp"
#include "helpers.hpp"

#include <set>

using namespace negmtl;
using negmtl::testing::mat;

TEST(Autodiff, MatmulHandArithmetic) {
  Tape tape;
  Tensor a = mat({{1, 2}, {3, 4}});
  Tensor b = mat({{1}, {1}});
  Tensor c = matmul(tape, a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c[0], 3.0);
  EXPECT_EQ(c[1], 7.0);
}

TEST(Autodiff, MatmulIdentity) {
  Tape tape;
  Tensor x = mat({{0.5, -2}, {1.5, 3}});
  Tensor out = matmul(tape, mat({{1, 0}, {0, 1}}), x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[i], x[i]);
}

TEST(Autodiff, MatmulShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(matmul(tape, Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(Autodiff, MatmulGradientAgainstFiniteDifferences) {
  Tensor a = mat({{0.3, -1.2, 0.7}, {2.0, 0.1, -0.4}}, true);
  Tensor b = mat({{1.1, -0.5}, {0.2, 0.9}, {-1.3, 0.4}});
  const auto report = grad_check([&](Tape& t) { return sum(t, matmul(t, a, b)); }, a, 1e-5, 1e-6);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Autodiff, ElementwiseAnalyticValues) {
  Tape tape;
  Tensor z = Tensor::vector({0.0});
  EXPECT_EQ(tanh(tape, z)[0], 0.0);
  EXPECT_EQ(sigmoid(tape, z)[0], 0.5);
  Tensor x = Tensor::vector({1.5, -2.0});
  Tensor y = add(tape, x, Tensor::vector({0.0, 0.0}));
  EXPECT_EQ(y[0], 1.5);
  EXPECT_EQ(y[1], -2.0);
}

TEST(Autodiff, TanhDerivativeAtZero) {
  Tensor x = Tensor::vector({0.0}, true);
  Tape tape;
  tape.backward(sum(tape, tanh(tape, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(Autodiff, Concat) {
  Tape tape;
  Tensor a = Tensor::vector({1, 2}, true), b = Tensor::vector({3}, true);
  Tensor c = concat(tape, a, b, 0);
  ASSERT_EQ(c.shape(), (Shape{3}));
  EXPECT_EQ(c[2], 3.0);
  tape.backward(sum(tape, c));
  EXPECT_EQ(a.grad()[0], 1.0);
  EXPECT_EQ(a.grad()[1], 1.0);
  EXPECT_EQ(b.grad()[0], 1.0);
  EXPECT_EQ(concat(tape, Tensor({2, 3}), Tensor({2, 5}), 1).shape(), (Shape{2, 8}));
}

TEST(Autodiff, MaxOverTime) {
  Tape tape;
  Tensor m = max_over_time(tape, mat({{1, 5}, {3, 2}}));
  EXPECT_EQ(m[0], 3.0);
  EXPECT_EQ(m[1], 5.0);
  Tensor row = mat({{4, -1, 2}});
  Tensor same = max_over_time(tape, row);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(same[i], row[i]);
}

TEST(Autodiff, SoftmaxCrossEntropy) {
  Tape tape;
  EXPECT_NEAR(softmax_cross_entropy(tape, Tensor::vector({0, 0}), 0).item(), 0.693147, 1e-6);
  const double big = softmax_cross_entropy(tape, Tensor::vector({1000, 0}), 0).item();
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_NEAR(big, 0.0, 1e-12);
}

TEST(Autodiff, SoftmaxGradientIsSoftmaxMinusOneHot) {
  Tensor logits = Tensor::vector({0.5, -1.0, 2.0}, true);
  Tape tape;
  tape.backward(softmax_cross_entropy(tape, logits, 1));
  const double z = std::exp(0.5) + std::exp(-1.0) + std::exp(2.0);
  EXPECT_NEAR(logits.grad()[0], std::exp(0.5) / z, 1e-12);
  EXPECT_NEAR(logits.grad()[1], std::exp(-1.0) / z - 1.0, 1e-12);
  EXPECT_NEAR(logits.grad()[2], std::exp(2.0) / z, 1e-12);
}

TEST(Autodiff, BackwardOfSumAndZeroScale) {
  Tensor x = Tensor::vector({1, 2, 3}, true);
  {
    Tape tape;
    tape.backward(sum(tape, x));
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  }
  x.zero_grad();
  {
    Tape tape;
    tape.backward(sum(tape, scale(tape, x, 0.0)));
    for (double g : x.grad()) EXPECT_EQ(g, 0.0);
  }
}

TEST(Autodiff, BackwardRejectsNonScalar) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tape tape;
  EXPECT_THROW(tape.backward(tanh(tape, x)), ShapeError);
}

TEST(Autodiff, TwoLayerCompositeAgainstFiniteDifferences) {
  Tensor w1 = mat({{0.2, -0.4}, {0.7, 0.1}, {-0.3, 0.5}}, true);
  Tensor w2 = mat({{0.6, -0.2, 0.9}}, true);
  Tensor x = Tensor::vector({1.0, -0.5}, true);
  const auto report = grad_check(
      [&](Tape& t) { return sum_of_squares(t, matvec(t, w2, tanh(t, matvec(t, w1, x)))); },
      {{"w1", w1}, {"w2", w2}, {"x", x}});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradCheck, SumOfSquaresPassesTightTolerance) {
  Tensor x = Tensor::vector({0.3, -1.7, 2.2, 0.0}, true);
  const auto report = grad_check([&](Tape& t) { return sum_of_squares(t, x); }, x, 1e-5, 1e-5);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradCheck, WrongBackwardFails) {
  Tensor x = Tensor::vector({0.3, -1.7, 2.2}, true);
  auto wrong = [&](Tape& t) {
    const bool track = t.recording();
    Tensor out = Tensor::scalar(0.0, track);
    for (double v : x.values()) out[0] += v * v;
    if (track) {
      t.record(out, [x, out]() {
        auto g = x.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad()[0] * x[i];  // missing factor 2
      });
    }
    return out;
  };
  EXPECT_FALSE(grad_check(wrong, x).passed);
}

TEST(GradCheck, NondeterministicLossIsRejected) {
  Tensor x = Tensor::vector({1.0}, true);
  int calls = 0;
  auto flaky = [&](Tape& t) { return scale(t, sum(t, x), 1.0 + 1e-3 * ++calls); };
  EXPECT_THROW(grad_check(flaky, x), NondeterministicLoss);
}

TEST(GradCheck, SuiteDefaultPassesAndReportsEveryComponent) {
  const auto checks = run_gradcheck_suite("all", 1);
  std::set<std::string> components;
  for (const auto& c : checks) {
    EXPECT_TRUE(c.report.passed) << c.component << "/" << c.name << " " << c.report.max_rel_error;
    EXPECT_GT(c.report.coordinates, 0u);
    components.insert(c.component);
  }
  EXPECT_EQ(components, (std::set<std::string>{"layers", "crf", "negation", "sentiment"}));
}

TEST(GradCheck, InjectedBugIsCaught) {
  const auto checks = run_gradcheck_suite("layers", 1, 1e-4, GradCheckBug::kWrongTanhDerivative);
  bool any_failed = false;
  for (const auto& c : checks) any_failed = any_failed || !c.report.passed;
  EXPECT_TRUE(any_failed);
}

TEST(GradCheck, UnknownComponentThrows) {
  EXPECT_THROW(run_gradcheck_suite("decoder", 1), std::invalid_argument);
}
