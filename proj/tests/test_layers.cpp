#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"
#include "negmtl/gradcheck.hpp"
#include "negmtl/layers.hpp"

using namespace negmtl;
using negmtl::testing::mat;

namespace {

LstmParams zero_lstm(std::size_t in, std::size_t d) {
  return {Tensor({4 * d, in}, true), Tensor({4 * d, d}, true), Tensor({4 * d}, true)};
}

}  // namespace

TEST(Embedding, PaddingRowIsZeroAndRepeatsAreIdentical) {
  Rng rng(3);
  EmbeddingTable table = EmbeddingTable::init(6, 4, rng);
  Tape tape;
  Tensor pad = embed(tape, table, std::vector<std::size_t>{0});
  for (double v : pad.values()) EXPECT_EQ(v, 0.0);
  Tensor twice = embed(tape, table, std::vector<std::size_t>{2, 2});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(twice.at(0, c), twice.at(1, c));
}

TEST(Embedding, GradientScattersOntoTouchedRows) {
  Rng rng(3);
  EmbeddingTable table = EmbeddingTable::init(6, 3, rng);
  Tape tape;
  tape.backward(sum(tape, embed(tape, table, std::vector<std::size_t>{2, 4, 2})));
  for (std::size_t r = 0; r < 6; ++r) {
    const double expected = r == 2 ? 2.0 : r == 4 ? 1.0 : 0.0;
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(table.weights.grad()[r * 3 + c], expected);
  }
}

TEST(Embedding, PaddingRowNeverReceivesGradient) {
  Rng rng(3);
  EmbeddingTable table = EmbeddingTable::init(4, 2, rng);
  Tape tape;
  tape.backward(sum(tape, embed(tape, table, std::vector<std::size_t>{0, 1})));
  EXPECT_EQ(table.weights.grad()[0], 0.0);
  EXPECT_EQ(table.weights.grad()[1], 0.0);
}

TEST(Lstm, ZeroParametersGiveZeroState) {
  LstmParams p = zero_lstm(3, 2);
  Tape tape;
  LstmState s = lstm_step(tape, p, Tensor::vector({0.4, -1, 2}), lstm_zero_state(2));
  for (double v : s.h.values()) EXPECT_EQ(v, 0.0);
  for (double v : s.c.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, SaturatedForgetAndClosedInputCarryMemory) {
  const std::size_t d = 2;
  LstmParams p = zero_lstm(1, d);
  for (std::size_t k = 0; k < d; ++k) {
    p.b[k] = -1e3;      // input gate
    p.b[d + k] = 1e3;   // forget gate
  }
  LstmState prev{Tensor::vector({0.1, 0.2}), Tensor::vector({0.7, -0.3})};
  Tape tape;
  LstmState s = lstm_step(tape, p, Tensor::vector({5.0}), prev);
  EXPECT_DOUBLE_EQ(s.c[0], 0.7);
  EXPECT_DOUBLE_EQ(s.c[1], -0.3);
}

TEST(Lstm, ThreeStepGradientCheck) {
  Rng rng(11);
  LstmParams p = LstmParams::init(3, 2, rng);
  std::vector<Tensor> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(uniform_tensor({3}, -1, 1, rng));
  const auto report = grad_check(
      [&](Tape& t) {
        LstmState s = lstm_zero_state(2);
        for (const auto& x : xs) s = lstm_step(t, p, x, s);
        return sum(t, s.h);
      },
      {{"W", p.w}, {"U", p.u}, {"b", p.b}});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(BiLstm, SingleStepIsConcatOfBothDirections) {
  Rng rng(5);
  LstmParams f = LstmParams::init(3, 2, rng), b = LstmParams::init(3, 2, rng);
  Tensor x = uniform_tensor({3}, -1, 1, rng);
  Tape tape;
  Tensor out = bilstm(tape, f, b, Tensor({1, 3}, std::vector<double>(x.values().begin(), x.values().end())));
  ASSERT_EQ(out.shape(), (Shape{1, 4}));
  LstmState hf = lstm_step(tape, f, x, lstm_zero_state(2));
  LstmState hb = lstm_step(tape, b, x, lstm_zero_state(2));
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(out.at(0, k), hf.h[k], 1e-15);
    EXPECT_NEAR(out.at(0, 2 + k), hb.h[k], 1e-15);
  }
}

TEST(BiLstm, ReversalSymmetry) {
  Rng rng(8);
  LstmParams f = LstmParams::init(2, 3, rng), b = LstmParams::init(2, 3, rng);
  Tensor xs = uniform_tensor({4, 2}, -1, 1, rng);
  Tensor rev({4, 2});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 2; ++c) rev.at(t, c) = xs.at(3 - t, c);
  Tape tape;
  Tensor a = bilstm(tape, f, b, xs);
  Tensor r = bilstm(tape, b, f, rev);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(a.at(t, k), r.at(3 - t, 3 + k), 1e-14);
      EXPECT_NEAR(a.at(t, 3 + k), r.at(3 - t, k), 1e-14);
    }
  }
}

TEST(BiLstm, GradientCheck) {
  Rng rng(13);
  LstmParams f = LstmParams::init(3, 2, rng), b = LstmParams::init(3, 2, rng);
  Tensor xs = uniform_tensor({3, 3}, -1, 1, rng);
  Tensor w = uniform_tensor({3, 4}, -1, 1, rng);
  w.set_requires_grad(false);
  const auto report = grad_check([&](Tape& t) { return sum(t, mul(t, bilstm(t, f, b, xs), w)); },
                                 {{"fwd.W", f.w}, {"fwd.U", f.u}, {"bwd.b", b.b}, {"xs", xs}});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Linear, IdentityAndZeroWeights) {
  LinearParams p{mat({{1, 0}, {0, 1}}), Tensor::vector({0, 0})};
  Tape tape;
  Tensor x = Tensor::vector({2.5, -1});
  Tensor y = linear(tape, p, x);
  EXPECT_EQ(y[0], 2.5);
  EXPECT_EQ(y[1], -1.0);
  LinearParams z{Tensor({2, 2}), Tensor::vector({0.3, -0.7})};
  Tensor yb = linear(tape, z, x);
  EXPECT_EQ(yb[0], 0.3);
  EXPECT_EQ(yb[1], -0.7);
}

TEST(Linear, GradientCheck) {
  Rng rng(2);
  LinearParams p = LinearParams::init(4, 3, rng);
  Tensor x = uniform_tensor({4}, -1, 1, rng);
  const auto report = grad_check([&](Tape& t) { return sum_of_squares(t, linear(t, p, x)); },
                                 {{"W", p.w}, {"b", p.b}, {"x", x}});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Dropout, IdentityWhenDisabled) {
  Rng rng(1);
  Tape tape;
  Tensor x = Tensor::vector({1, 2, 3});
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    Tensor y = dropout(tape, x, 0.0, mode, rng);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y[i], x[i]);
  }
  Tensor e = dropout(tape, x, 0.3, Mode::kEval, rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(e[i], x[i]);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  Rng rng(42);
  Tape tape(false);
  const std::size_t n = 100000;
  Tensor x(Shape{n}, std::vector<double>(n, 2.0));
  Tensor y = dropout(tape, x, 0.3, Mode::kTrain, rng);
  double mean = 0.0;
  for (double v : y.values()) mean += v;
  mean /= n;
  EXPECT_NEAR(mean, 2.0, 0.02 * 2.0);
}

TEST(Dropout, RejectsProbabilityOne) {
  Rng rng(1);
  Tape tape;
  EXPECT_THROW(dropout(tape, Tensor::vector({1}), 1.0, Mode::kTrain, rng), std::invalid_argument);
}
