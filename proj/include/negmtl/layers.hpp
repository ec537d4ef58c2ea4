#pragma once

// Trainable building blocks: embedding lookup, LSTM cell, bidirectional
// runner, affine projection and inverted dropout.

#include <cstddef>
#include <span>
#include <utility>

#include "negmtl/autodiff.hpp"
#include "negmtl/rng.hpp"

namespace negmtl {

enum class Mode { kTrain, kEval };

// Uniform(-limit, limit) with limit = sqrt(6 / (rows + cols)).
Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);
Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng);

struct EmbeddingTable {
  Tensor weights;  // [V x e]; row 0 is padding, held at zero.

  static EmbeddingTable init(std::size_t vocab_size, std::size_t dim, Rng& rng);
  std::size_t vocab_size() const { return weights.dim(0); }
  std::size_t dim() const { return weights.dim(1); }
};

// Gate blocks are stacked in the order input, forget, candidate, output.
struct LstmParams {
  Tensor w;  // [4d x in]
  Tensor u;  // [4d x d]
  Tensor b;  // [4d]

  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  std::size_t input_dim() const { return w.dim(1); }
  std::size_t hidden_dim() const { return u.dim(1); }
};

struct LstmState {
  Tensor h;
  Tensor c;
};

struct LinearParams {
  Tensor w;  // [out x in]
  Tensor b;  // [out]

  static LinearParams init(std::size_t input_dim, std::size_t output_dim, Rng& rng);
};

// [T x e] rows of the table; the padding row never receives gradient.
Tensor embed(Tape& tape, const EmbeddingTable& table, std::span<const std::size_t> ids);

LstmState lstm_zero_state(std::size_t hidden_dim);

LstmState lstm_step(Tape& tape, const LstmParams& p, const Tensor& x, const LstmState& prev);

// Recurrence given a precomputed input projection W x + b for this step.
LstmState lstm_step_projected(Tape& tape, const LstmParams& p, const Tensor& projected,
                              const LstmState& prev);

// [T x in] -> [T x 2d]; row t is [forward h_t, backward h_t], both
// directions starting from a zero state.
Tensor bilstm(Tape& tape, const LstmParams& fwd, const LstmParams& bwd, const Tensor& xs);

Tensor linear(Tape& tape, const LinearParams& p, const Tensor& x);

// Inverted dropout: in training mode each element is zeroed with
// probability p and survivors are scaled by 1 / (1 - p). Identity in
// evaluation mode.
Tensor dropout(Tape& tape, const Tensor& x, double p, Mode mode, Rng& rng);

}  // namespace negmtl
