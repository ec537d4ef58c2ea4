#pragma once

// Exhaustive path enumeration for small CRF instances. Test oracle for the
// dynamic programs in crf.hpp; shares only score_sequence with them.

#include <cstddef>
#include <vector>

#include "negmtl/crf.hpp"

namespace negmtl {

struct CrfOracleResult {
  double log_partition = 0.0;
  std::vector<std::size_t> best_path;
  double best_score = 0.0;
};

inline constexpr std::size_t kMaxOraclePaths = 1'000'000;

// Enumerates paths in lexicographic order; the first path reaching the
// maximum score is reported. Throws std::length_error when K^T exceeds
// kMaxOraclePaths.
CrfOracleResult brute_force_oracle(const Tensor& emissions, const CrfParams& params);

}  // namespace negmtl
