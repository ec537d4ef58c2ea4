#include "negmtl/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace negmtl {

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape), true);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_tensor({rows, cols}, -limit, limit, rng);
}

EmbeddingTable EmbeddingTable::init(std::size_t vocab_size, std::size_t dim, Rng& rng) {
  EmbeddingTable table{uniform_tensor({vocab_size, dim}, -0.1, 0.1, rng)};
  for (std::size_t j = 0; j < dim; ++j) table.weights.at(0, j) = 0.0;
  return table;
}

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p;
  p.w = xavier_uniform(4 * hidden_dim, input_dim, rng);
  p.u = xavier_uniform(4 * hidden_dim, hidden_dim, rng);
  p.b = Tensor({4 * hidden_dim}, true);
  for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) p.b[j] = 1.0;
  return p;
}

LinearParams LinearParams::init(std::size_t input_dim, std::size_t output_dim, Rng& rng) {
  return {xavier_uniform(output_dim, input_dim, rng), Tensor({output_dim}, true)};
}

Tensor embed(Tape& tape, const EmbeddingTable& table, std::span<const std::size_t> ids) {
  static constexpr std::size_t kFrozen[] = {0};
  return gather_rows(tape, table.weights, ids, kFrozen);
}

LstmState lstm_zero_state(std::size_t hidden_dim) {
  return {Tensor({hidden_dim}), Tensor({hidden_dim})};
}

LstmState lstm_step_projected(Tape& tape, const LstmParams& p, const Tensor& projected,
                              const LstmState& prev) {
  const std::size_t d = p.hidden_dim();
  if (projected.rank() != 1 || projected.dim(0) != 4 * d || prev.h.size() != d ||
      prev.c.size() != d) {
    throw ShapeError("lstm_step: projected input " + shape_to_string(projected.shape()) +
                     " / state " + shape_to_string(prev.h.shape()) +
                     " inconsistent with hidden size " + std::to_string(d));
  }
  Tensor z = add(tape, projected, matvec(tape, p.u, prev.h));
  Tensor i = sigmoid(tape, slice(tape, z, 0, d));
  Tensor f = sigmoid(tape, slice(tape, z, d, d));
  Tensor g = tanh(tape, slice(tape, z, 2 * d, d));
  Tensor o = sigmoid(tape, slice(tape, z, 3 * d, d));
  Tensor c = add(tape, mul(tape, f, prev.c), mul(tape, i, g));
  Tensor h = mul(tape, o, tanh(tape, c));
  return {h, c};
}

LstmState lstm_step(Tape& tape, const LstmParams& p, const Tensor& x, const LstmState& prev) {
  if (x.rank() != 1 || x.dim(0) != p.input_dim()) {
    throw ShapeError("lstm_step: input " + shape_to_string(x.shape()) + " expected (" +
                     std::to_string(p.input_dim()) + ")");
  }
  return lstm_step_projected(tape, p, linear(tape, p.w, p.b, x), prev);
}

Tensor bilstm(Tape& tape, const LstmParams& fwd, const LstmParams& bwd, const Tensor& xs) {
  if (xs.rank() != 2 || xs.dim(0) == 0) {
    throw ShapeError("bilstm: need a non-empty [T x in] sequence, got " +
                     shape_to_string(xs.shape()));
  }
  const std::size_t steps = xs.dim(0);
  // Input projections for all steps at once; only the recurrence is serial.
  Tensor proj_f = linear(tape, fwd.w, fwd.b, xs);
  Tensor proj_b = linear(tape, bwd.w, bwd.b, xs);

  std::vector<Tensor> hf(steps), hb(steps);
  LstmState state = lstm_zero_state(fwd.hidden_dim());
  for (std::size_t t = 0; t < steps; ++t) {
    state = lstm_step_projected(tape, fwd, row(tape, proj_f, t), state);
    hf[t] = state.h;
  }
  state = lstm_zero_state(bwd.hidden_dim());
  for (std::size_t t = steps; t-- > 0;) {
    state = lstm_step_projected(tape, bwd, row(tape, proj_b, t), state);
    hb[t] = state.h;
  }
  return concat(tape, stack_rows(tape, hf), stack_rows(tape, hb), 1);
}

Tensor linear(Tape& tape, const LinearParams& p, const Tensor& x) {
  return linear(tape, p.w, p.b, x);
}

Tensor dropout(Tape& tape, const Tensor& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout: probability must lie in [0, 1), got " +
                                std::to_string(p));
  }
  if (mode == Mode::kEval || p == 0.0) return x;
  Tensor mask(x.shape());
  const double keep_scale = 1.0 / (1.0 - p);
  std::bernoulli_distribution drop(p);
  for (double& m : mask.values()) m = drop(rng) ? 0.0 : keep_scale;
  return mul(tape, x, mask);
}

}  // namespace negmtl
