#pragma once

// Central-difference verification of tape gradients.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "negmtl/autodiff.hpp"
#include "negmtl/models.hpp"

namespace negmtl {

// Builds a scalar loss on the given tape from the current parameter values.
using LossFn = std::function<Tensor(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  bool passed = false;
};

class NondeterministicLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per coordinate: |g_ad - g_fd| / max(1, |g_ad|, |g_fd|), with
// g_fd = (f(x + h) - f(x - h)) / 2h. Passes iff the maximum is below `tol`.
// Throws NondeterministicLoss when two evaluations at the same point differ.
GradCheckReport grad_check(const LossFn& f, const NamedTensors& params, double h = 1e-5,
                           double tol = 1e-4);
GradCheckReport grad_check(const LossFn& f, Tensor x, double h = 1e-5, double tol = 1e-4);

// Toy-sized checks over each layer, the CRF loss and both full model losses.
struct ComponentCheck {
  std::string component;
  std::string name;
  GradCheckReport report;
};

enum class GradCheckBug { kNone, kWrongTanhDerivative };

// `component` is one of all | layers | crf | negation | sentiment.
std::vector<ComponentCheck> run_gradcheck_suite(const std::string& component, std::uint64_t seed,
                                                double tol = 1e-4,
                                                GradCheckBug bug = GradCheckBug::kNone);

}  // namespace negmtl
