#include "negmtl/crf_oracle.hpp"

#include <stdexcept>
#include <string>

namespace negmtl {

CrfOracleResult brute_force_oracle(const Tensor& emissions, const CrfParams& params) {
  const std::size_t k = params.num_tags();
  const std::size_t steps = emissions.dim(0);
  std::size_t paths = 1;
  for (std::size_t t = 0; t < steps; ++t) {
    if (paths > kMaxOraclePaths / k) {
      throw std::length_error("brute_force_oracle: " + std::to_string(k) + "^" +
                              std::to_string(steps) + " paths exceeds the enumeration limit");
    }
    paths *= k;
  }

  std::vector<double> scores;
  scores.reserve(paths);
  std::vector<std::size_t> path(steps, 0);
  CrfOracleResult result;
  bool first = true;
  for (std::size_t n = 0; n < paths; ++n) {
    const double s = score_sequence(emissions, path, params);
    scores.push_back(s);
    if (first || s > result.best_score) {
      result.best_score = s;
      result.best_path = path;
      first = false;
    }
    // Odometer increment, last position fastest.
    for (std::size_t t = steps; t-- > 0;) {
      if (++path[t] < k) break;
      path[t] = 0;
    }
  }
  result.log_partition = log_sum_exp(scores);
  return result;
}

}  // namespace negmtl
