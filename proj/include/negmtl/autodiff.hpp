#pragma once

// Dense 64-bit tensors with a recording tape for reverse-mode gradients.
//
// A Tensor is a cheap, shared handle onto its storage: copying a Tensor
// aliases the same values and gradient buffer. Operations are free
// functions that take the Tape they record onto. Backward rules run in
// exact reverse recording order and accumulate into `grad()` of every
// input that requires a gradient.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace negmtl {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return state_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<double> values();
  std::span<const double> values() const;
  double item() const;
  double& operator[](std::size_t i) { return values()[i]; }
  double operator[](std::size_t i) const { return values()[i]; }
  // Row-major 2-D access.
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  // The gradient buffer is allocated on first accumulation.
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  std::span<double> ensure_grad() const;
  void zero_grad();
  void drop_grad();

  // Deep copy of values; the result never requires a gradient.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return state_ == other.state_; }

 private:
  struct State {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<State> state_;
};

class Tape {
 public:
  // A non-recording tape produces constant outputs and stores nothing.
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  // Registers `output` as produced by an operation whose backward rule
  // reads output.grad() and accumulates into the inputs it captured.
  void record(Tensor output, std::function<void()> backward);

  // Resets intermediate gradients, seeds d loss / d loss = 1 and runs every
  // backward rule in reverse. Leaf gradients accumulate across calls.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  bool recording_;
};

// 2-D product [m x k] . [k x n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// [out x in] . [in] -> [out].
Tensor matvec(Tape& tape, const Tensor& w, const Tensor& x);
// W x + b for x of shape [in], or X W^T + b row-wise for X of shape [T x in].
Tensor linear(Tape& tape, const Tensor& w, const Tensor& b, const Tensor& x);

// Elementwise ops accept equal shapes or a single-element operand.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor tanh(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);

enum class ElementwiseOp { kAdd, kMul, kTanh, kSigmoid };
Tensor elementwise(Tape& tape, ElementwiseOp op, std::span<const Tensor> args);

Tensor sum(Tape& tape, const Tensor& a);
Tensor sum_of_squares(Tape& tape, const Tensor& a);

// Rank-1 or rank-2 concatenation along `axis`.
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, std::size_t axis);
// Contiguous sub-range [begin, begin + length) of a rank-1 tensor.
Tensor slice(Tape& tape, const Tensor& a, std::size_t begin, std::size_t length);
// Row `r` of a rank-2 tensor as a rank-1 tensor.
Tensor row(Tape& tape, const Tensor& a, std::size_t r);
// Equal-length rank-1 tensors stacked into [n x d].
Tensor stack_rows(Tape& tape, std::span<const Tensor> rows);
// Rows of `table` selected by `ids`, as [ids.size() x cols]. Gradient
// scatters back; rows listed in `frozen_rows` never receive gradient.
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> ids,
                   std::span<const std::size_t> frozen_rows = {});

// Per-column max over rows of [T x d]; ties resolve to the first row.
Tensor max_over_time(Tape& tape, const Tensor& h);

// -log softmax(logits)[gold], stabilised by max subtraction.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::size_t gold);

// Numerically stable log(sum(exp(xs))); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> xs);

}  // namespace negmtl
