#include "negmtl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace negmtl {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, bool requires_grad) : state_(std::make_shared<State>()) {
  state_->values.assign(shape_size(shape), 0.0);
  state_->shape = std::move(shape);
  state_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : state_(std::make_shared<State>()) {
  if (values.size() != shape_size(shape)) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  state_->shape = std::move(shape);
  state_->values = std::move(values);
  state_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return state_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= state_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(state_->shape));
  }
  return state_->shape[axis];
}

std::size_t Tensor::size() const { return state_->values.size(); }

std::span<double> Tensor::values() { return state_->values; }
std::span<const double> Tensor::values() const { return state_->values; }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on non-scalar tensor of shape " + shape_to_string(shape()));
  }
  return state_->values[0];
}

double& Tensor::at(std::size_t r, std::size_t c) { return state_->values[r * state_->shape[1] + c]; }
double Tensor::at(std::size_t r, std::size_t c) const {
  return state_->values[r * state_->shape[1] + c];
}

bool Tensor::requires_grad() const { return state_ && state_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { state_->requires_grad = flag; }

bool Tensor::has_grad() const { return !state_->grad.empty(); }
std::span<double> Tensor::grad() { return state_->grad; }
std::span<const double> Tensor::grad() const { return state_->grad; }

std::span<double> Tensor::ensure_grad() const {
  if (state_->grad.size() != state_->values.size()) state_->grad.assign(state_->values.size(), 0.0);
  return state_->grad;
}

void Tensor::zero_grad() {
  std::fill(state_->grad.begin(), state_->grad.end(), 0.0);
}

void Tensor::drop_grad() {
  state_->grad.clear();
  state_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const {
  return Tensor(state_->shape, state_->values, false);
}

// ---------------------------------------------------------------------------
// Tape

void Tape::record(Tensor output, std::function<void()> backward) {
  if (!recording_) return;
  nodes_.push_back({std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? shape_to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward(): loss is not on the tape");
  }
  for (auto& node : nodes_) node.output.drop_grad();
  Tensor seed = loss;
  seed.ensure_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.grad().empty()) it->backward();
  }
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

bool tracks(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.recording()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_to_string(t.shape()));
  }
}

enum class Broadcast { kSame, kLeftScalar, kRightScalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kRightScalar;
  if (a.size() == 1) return Broadcast::kLeftScalar;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) +
                   " and " + shape_to_string(b.shape()));
}

// Result shape of a broadcast binary op.
const Shape& broadcast_shape(const Tensor& a, const Tensor& b, Broadcast kind) {
  return kind == Broadcast::kLeftScalar ? b.shape() : a.shape();
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(Tape& tape, const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da,
              DB db) {
  const Broadcast kind = broadcast_kind(a, b, name);
  const bool track = tracks(tape, {&a, &b});
  Tensor out(broadcast_shape(a, b, kind), track);
  const std::size_t n = out.size();
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  auto ai = [kind](std::size_t i) { return kind == Broadcast::kLeftScalar ? 0 : i; };
  auto bi = [kind](std::size_t i) { return kind == Broadcast::kRightScalar ? 0 : i; };
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[ai(i)], bv[bi(i)]);
  if (track) {
    tape.record(out, [a, b, out, kind, da, db, n]() mutable {
      auto g = out.grad();
      auto av = a.values();
      auto bv = b.values();
      auto ai = [kind](std::size_t i) { return kind == Broadcast::kLeftScalar ? 0 : i; };
      auto bi = [kind](std::size_t i) { return kind == Broadcast::kRightScalar ? 0 : i; };
      if (a.requires_grad()) {
        auto ga = a.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) ga[ai(i)] += g[i] * da(av[ai(i)], bv[bi(i)]);
      }
      if (b.requires_grad()) {
        auto gb = b.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) gb[bi(i)] += g[i] * db(av[ai(i)], bv[bi(i)]);
      }
    });
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Products

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  const bool track = tracks(tape, {&a, &b});
  Tensor out({m, n}, track);
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
    }
  }
  if (track) {
    tape.record(out, [a, b, out, m, k, n]() mutable {
      auto g = out.grad();
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        // dA = G . B^T
        auto ga = a.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (b.requires_grad()) {
        // dB = A^T . G
        auto gb = b.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    });
  }
  return out;
}

Tensor matvec(Tape& tape, const Tensor& w, const Tensor& x) {
  require_rank(w, 2, "matvec");
  require_rank(x, 1, "matvec");
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  if (x.dim(0) != cols) {
    throw ShapeError("matvec: shapes " + shape_to_string(w.shape()) + " and " +
                     shape_to_string(x.shape()) + " disagree");
  }
  const bool track = tracks(tape, {&w, &x});
  Tensor out({rows}, track);
  auto wv = w.values();
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* wr = wv.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xv[c];
    ov[r] = acc;
  }
  if (track) {
    tape.record(out, [w, x, out, rows, cols]() mutable {
      auto g = out.grad();
      auto wv = w.values();
      auto xv = x.values();
      if (w.requires_grad()) {
        auto gw = w.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* gwr = gw.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) gwr[c] += gr * xv[c];
        }
      }
      if (x.requires_grad()) {
        auto gx = x.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          const double* wr = wv.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) gx[c] += gr * wr[c];
        }
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& w, const Tensor& b, const Tensor& x) {
  require_rank(w, 2, "linear");
  require_rank(b, 1, "linear");
  const std::size_t out_dim = w.dim(0), in_dim = w.dim(1);
  if (b.dim(0) != out_dim) {
    throw ShapeError("linear: bias " + shape_to_string(b.shape()) + " does not match weight " +
                     shape_to_string(w.shape()));
  }
  if (x.rank() == 1) return add(tape, matvec(tape, w, x), b);
  require_rank(x, 2, "linear");
  if (x.dim(1) != in_dim) {
    throw ShapeError("linear: input " + shape_to_string(x.shape()) + " does not match weight " +
                     shape_to_string(w.shape()));
  }
  const std::size_t steps = x.dim(0);
  const bool track = tracks(tape, {&w, &b, &x});
  Tensor out({steps, out_dim}, track);
  auto wv = w.values();
  auto bv = b.values();
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t t = 0; t < steps; ++t) {
    const double* xt = xv.data() + t * in_dim;
    for (std::size_t r = 0; r < out_dim; ++r) {
      const double* wr = wv.data() + r * in_dim;
      double acc = bv[r];
      for (std::size_t c = 0; c < in_dim; ++c) acc += wr[c] * xt[c];
      ov[t * out_dim + r] = acc;
    }
  }
  if (track) {
    tape.record(out, [w, b, x, out, steps, out_dim, in_dim]() mutable {
      auto g = out.grad();
      auto wv = w.values();
      auto xv = x.values();
      std::span<double> gw, gb, gx;
      if (w.requires_grad()) gw = w.ensure_grad();
      if (b.requires_grad()) gb = b.ensure_grad();
      if (x.requires_grad()) gx = x.ensure_grad();
      for (std::size_t t = 0; t < steps; ++t) {
        const double* xt = xv.data() + t * in_dim;
        for (std::size_t r = 0; r < out_dim; ++r) {
          const double gr = g[t * out_dim + r];
          if (gr == 0.0) continue;
          if (!gb.empty()) gb[r] += gr;
          if (!gw.empty()) {
            double* gwr = gw.data() + r * in_dim;
            for (std::size_t c = 0; c < in_dim; ++c) gwr[c] += gr * xt[c];
          }
          if (!gx.empty()) {
            const double* wr = wv.data() + r * in_dim;
            double* gxt = gx.data() + t * in_dim;
            for (std::size_t c = 0; c < in_dim; ++c) gxt[c] += gr * wr[c];
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  const bool track = tracks(tape, {&a});
  Tensor out(a.shape(), track);
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * factor;
  if (track) {
    tape.record(out, [a, out, factor]() mutable {
      auto g = out.grad();
      auto ga = a.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return out;
}

namespace {

// Unary op whose derivative is expressed through its output value.
template <typename Fwd, typename DOut>
Tensor unary_by_output(Tape& tape, const Tensor& a, Fwd fwd, DOut dout) {
  const bool track = tracks(tape, {&a});
  Tensor out(a.shape(), track);
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i]);
  if (track) {
    tape.record(out, [a, out, dout]() mutable {
      auto g = out.grad();
      auto ov = out.values();
      auto ga = a.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dout(ov[i]);
    });
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor tanh(Tape& tape, const Tensor& a) {
  return unary_by_output(
      tape, a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary_by_output(tape, a, stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

Tensor elementwise(Tape& tape, ElementwiseOp op, std::span<const Tensor> args) {
  const bool binary_op = op == ElementwiseOp::kAdd || op == ElementwiseOp::kMul;
  if (args.size() != (binary_op ? 2u : 1u)) {
    throw std::invalid_argument("elementwise: wrong number of arguments");
  }
  switch (op) {
    case ElementwiseOp::kAdd: return add(tape, args[0], args[1]);
    case ElementwiseOp::kMul: return mul(tape, args[0], args[1]);
    case ElementwiseOp::kTanh: return tanh(tape, args[0]);
    case ElementwiseOp::kSigmoid: return sigmoid(tape, args[0]);
  }
  throw std::invalid_argument("elementwise: unknown op");
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(Tape& tape, const Tensor& a) {
  const bool track = tracks(tape, {&a});
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor out({1}, {total}, track);
  if (track) {
    tape.record(out, [a, out]() mutable {
      const double g = out.grad()[0];
      for (double& ga : a.ensure_grad()) ga += g;
    });
  }
  return out;
}

Tensor sum_of_squares(Tape& tape, const Tensor& a) {
  const bool track = tracks(tape, {&a});
  double total = 0.0;
  for (double v : a.values()) total += v * v;
  Tensor out({1}, {total}, track);
  if (track) {
    tape.record(out, [a, out]() mutable {
      const double g = out.grad()[0];
      auto av = a.values();
      auto ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * av[i] * g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structural

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, std::size_t axis) {
  if (a.rank() != b.rank() || a.rank() < 1 || a.rank() > 2 || axis >= a.rank()) {
    throw ShapeError("concat: cannot join " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " on axis " + std::to_string(axis));
  }
  const bool track = tracks(tape, {&a, &b});
  if (a.rank() == 1 || axis == 0) {
    // Row-major layout makes axis-0 concatenation a plain append.
    if (a.rank() == 2 && a.dim(1) != b.dim(1)) {
      throw ShapeError("concat: column counts differ for " + shape_to_string(a.shape()) +
                       " and " + shape_to_string(b.shape()));
    }
    Shape s = a.shape();
    s[0] += b.dim(0);
    Tensor out(s, track);
    auto ov = out.values();
    std::copy(a.values().begin(), a.values().end(), ov.begin());
    std::copy(b.values().begin(), b.values().end(), ov.begin() + a.size());
    if (track) {
      tape.record(out, [a, b, out]() mutable {
        auto g = out.grad();
        if (a.requires_grad()) {
          auto ga = a.ensure_grad();
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
          auto gb = b.ensure_grad();
          const std::size_t off = a.size();
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[off + i];
        }
      });
    }
    return out;
  }
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("concat: row counts differ for " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1), c = ca + cb;
  Tensor out({rows, c}, track);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ca; ++j) out.at(r, j) = a.at(r, j);
    for (std::size_t j = 0; j < cb; ++j) out.at(r, ca + j) = b.at(r, j);
  }
  if (track) {
    tape.record(out, [a, b, out, rows, ca, cb, c]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * c + j];
      }
      if (b.requires_grad()) {
        auto gb = b.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * c + ca + j];
      }
    });
  }
  return out;
}

Tensor slice(Tape& tape, const Tensor& a, std::size_t begin, std::size_t length) {
  require_rank(a, 1, "slice");
  if (begin + length > a.dim(0)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + length) + ") exceeds " + shape_to_string(a.shape()));
  }
  const bool track = tracks(tape, {&a});
  Tensor out({length}, track);
  auto av = a.values();
  std::copy(av.begin() + begin, av.begin() + begin + length, out.values().begin());
  if (track) {
    tape.record(out, [a, out, begin]() mutable {
      auto g = out.grad();
      auto ga = a.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[begin + i] += g[i];
    });
  }
  return out;
}

Tensor row(Tape& tape, const Tensor& a, std::size_t r) {
  require_rank(a, 2, "row");
  if (r >= a.dim(0)) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " +
                     shape_to_string(a.shape()));
  }
  const std::size_t cols = a.dim(1);
  const bool track = tracks(tape, {&a});
  Tensor out({cols}, track);
  auto av = a.values();
  std::copy(av.begin() + r * cols, av.begin() + (r + 1) * cols, out.values().begin());
  if (track) {
    tape.record(out, [a, out, r, cols]() mutable {
      auto g = out.grad();
      auto ga = a.ensure_grad();
      for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += g[j];
    });
  }
  return out;
}

Tensor stack_rows(Tape& tape, std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t d = rows[0].size();
  bool track = false;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != d) {
      throw ShapeError("stack_rows: row shape " + shape_to_string(r.shape()) +
                       " differs from (" + std::to_string(d) + ")");
    }
    track = track || (tape.recording() && r.requires_grad());
  }
  Tensor out({rows.size(), d}, track);
  auto ov = out.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto rv = rows[i].values();
    std::copy(rv.begin(), rv.end(), ov.begin() + i * d);
  }
  if (track) {
    std::vector<Tensor> inputs(rows.begin(), rows.end());
    tape.record(out, [inputs = std::move(inputs), out, d]() mutable {
      auto g = out.grad();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].requires_grad()) continue;
        auto gi = inputs[i].ensure_grad();
        for (std::size_t j = 0; j < d; ++j) gi[j] += g[i * d + j];
      }
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> ids,
                   std::span<const std::size_t> frozen_rows) {
  require_rank(table, 2, "gather_rows");
  const std::size_t rows = table.dim(0), cols = table.dim(1);
  for (auto id : ids) {
    if (id >= rows) {
      throw std::out_of_range("gather_rows: id " + std::to_string(id) + " >= table size " +
                              std::to_string(rows));
    }
  }
  const bool track = tracks(tape, {&table});
  Tensor out({ids.size(), cols}, track);
  auto tv = table.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy(tv.begin() + ids[i] * cols, tv.begin() + (ids[i] + 1) * cols, ov.begin() + i * cols);
  }
  if (track) {
    std::vector<std::size_t> idv(ids.begin(), ids.end());
    std::vector<std::size_t> frozen(frozen_rows.begin(), frozen_rows.end());
    tape.record(out, [table, out, idv = std::move(idv), frozen = std::move(frozen), cols]() mutable {
      auto g = out.grad();
      auto gt = table.ensure_grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        if (std::find(frozen.begin(), frozen.end(), idv[i]) != frozen.end()) continue;
        for (std::size_t j = 0; j < cols; ++j) gt[idv[i] * cols + j] += g[i * cols + j];
      }
    });
  }
  return out;
}

Tensor max_over_time(Tape& tape, const Tensor& h) {
  require_rank(h, 2, "max_over_time");
  const std::size_t steps = h.dim(0), d = h.dim(1);
  if (steps == 0) throw ShapeError("max_over_time: empty time axis");
  const bool track = tracks(tape, {&h});
  Tensor out({d}, track);
  std::vector<std::size_t> argmax(d, 0);
  auto ov = out.values();
  for (std::size_t j = 0; j < d; ++j) {
    double best = h.at(0, j);
    for (std::size_t t = 1; t < steps; ++t) {
      if (h.at(t, j) > best) {
        best = h.at(t, j);
        argmax[j] = t;
      }
    }
    ov[j] = best;
  }
  if (track) {
    tape.record(out, [h, out, argmax = std::move(argmax), d]() mutable {
      auto g = out.grad();
      auto gh = h.ensure_grad();
      for (std::size_t j = 0; j < d; ++j) gh[argmax[j] * d + j] += g[j];
    });
  }
  return out;
}

double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::size_t gold) {
  require_rank(logits, 1, "softmax_cross_entropy");
  const std::size_t c = logits.dim(0);
  if (c < 2) throw ShapeError("softmax_cross_entropy: need at least 2 classes");
  if (gold >= c) {
    throw std::out_of_range("softmax_cross_entropy: gold class " + std::to_string(gold) +
                            " out of range for " + std::to_string(c) + " classes");
  }
  auto lv = logits.values();
  const double lse = log_sum_exp(lv);
  const bool track = tracks(tape, {&logits});
  Tensor out({1}, {lse - lv[gold]}, track);
  if (track) {
    tape.record(out, [logits, out, gold, lse]() mutable {
      const double g = out.grad()[0];
      auto lv = logits.values();
      auto gl = logits.ensure_grad();
      for (std::size_t k = 0; k < gl.size(); ++k) {
        const double p = std::exp(lv[k] - lse);
        gl[k] += g * (p - (k == gold ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

}  // namespace negmtl
