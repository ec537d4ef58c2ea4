#pragma once

// Linear-chain CRF over K tags plus synthetic START and STOP states.
//
// transitions[i][j] scores moving from state i to state j. START (= K) is
// only ever a source and STOP (= K + 1) only ever a target; the remaining
// entries of the START column and STOP row are never read.

#include <cstddef>
#include <span>
#include <vector>

#include "negmtl/autodiff.hpp"

namespace negmtl {

struct CrfParams {
  Tensor transitions;  // [(K + 2) x (K + 2)]

  static CrfParams init(std::size_t num_tags);
  std::size_t num_tags() const { return transitions.dim(0) - 2; }
  std::size_t start() const { return num_tags(); }
  std::size_t stop() const { return num_tags() + 1; }
};

// Emission scores for step t and tag k live at emissions[t][k].
double score_sequence(const Tensor& emissions, std::span<const std::size_t> tags,
                      const CrfParams& params);

// log sum over all K^T paths of exp(path score), by the forward algorithm.
double log_partition(const Tensor& emissions, const CrfParams& params);

// log_partition - score_sequence(gold), differentiable with respect to the
// emissions and the transitions.
Tensor crf_nll(Tape& tape, const Tensor& emissions, std::span<const std::size_t> gold,
               const CrfParams& params);

struct ViterbiResult {
  std::vector<std::size_t> tags;
  double score = 0.0;
};

// Highest-scoring path; equal scores resolve toward the lower tag id.
ViterbiResult viterbi(const Tensor& emissions, const CrfParams& params);

}  // namespace negmtl
