#include "negmtl/crf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace negmtl {

namespace {

void check_emissions(const Tensor& emissions, const CrfParams& params) {
  const auto& ts = params.transitions.shape();
  if (ts.size() != 2 || ts[0] != ts[1] || ts[0] < 3) {
    throw ShapeError("crf: transitions must be square with K + 2 >= 3 states, got " +
                     shape_to_string(ts));
  }
  if (emissions.rank() != 2 || emissions.dim(1) != params.num_tags() || emissions.dim(0) == 0) {
    throw ShapeError("crf: emissions " + shape_to_string(emissions.shape()) +
                     " do not match " + std::to_string(params.num_tags()) + " tags");
  }
}

void check_tags(std::span<const std::size_t> tags, std::size_t steps, std::size_t num_tags) {
  if (tags.size() != steps) {
    throw std::invalid_argument("crf: " + std::to_string(tags.size()) + " tags for " +
                                std::to_string(steps) + " steps");
  }
  for (auto t : tags) {
    if (t >= num_tags) throw std::out_of_range("crf: tag " + std::to_string(t) + " out of range");
  }
}

// alpha[t * K + j]: log-sum of scores of all prefixes ending in tag j at t.
std::vector<double> forward_scores(const Tensor& em, const Tensor& tr, std::size_t k,
                                   std::size_t start) {
  const std::size_t steps = em.dim(0);
  std::vector<double> alpha(steps * k);
  for (std::size_t j = 0; j < k; ++j) alpha[j] = tr.at(start, j) + em.at(0, j);
  std::vector<double> terms(k);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) terms[i] = alpha[(t - 1) * k + i] + tr.at(i, j);
      alpha[t * k + j] = log_sum_exp(terms) + em.at(t, j);
    }
  }
  return alpha;
}

double final_log_sum(const std::vector<double>& alpha, const Tensor& tr, std::size_t steps,
                     std::size_t k, std::size_t stop) {
  std::vector<double> terms(k);
  for (std::size_t j = 0; j < k; ++j) terms[j] = alpha[(steps - 1) * k + j] + tr.at(j, stop);
  return log_sum_exp(terms);
}

}  // namespace

CrfParams CrfParams::init(std::size_t num_tags) {
  return {Tensor({num_tags + 2, num_tags + 2}, true)};
}

double score_sequence(const Tensor& emissions, std::span<const std::size_t> tags,
                      const CrfParams& params) {
  check_emissions(emissions, params);
  check_tags(tags, emissions.dim(0), params.num_tags());
  const Tensor& tr = params.transitions;
  // Same association order as the Viterbi recursion, so equal paths give
  // bit-identical scores.
  double s = tr.at(params.start(), tags[0]) + emissions.at(0, tags[0]);
  for (std::size_t t = 1; t < tags.size(); ++t) {
    s = s + tr.at(tags[t - 1], tags[t]) + emissions.at(t, tags[t]);
  }
  return s + tr.at(tags.back(), params.stop());
}

double log_partition(const Tensor& emissions, const CrfParams& params) {
  check_emissions(emissions, params);
  const std::size_t k = params.num_tags();
  auto alpha = forward_scores(emissions, params.transitions, k, params.start());
  return final_log_sum(alpha, params.transitions, emissions.dim(0), k, params.stop());
}

Tensor crf_nll(Tape& tape, const Tensor& emissions, std::span<const std::size_t> gold,
               const CrfParams& params) {
  check_emissions(emissions, params);
  check_tags(gold, emissions.dim(0), params.num_tags());
  const std::size_t k = params.num_tags();
  const std::size_t steps = emissions.dim(0);
  Tensor tr = params.transitions;

  auto alpha = forward_scores(emissions, tr, k, params.start());
  const double log_z = final_log_sum(alpha, tr, steps, k, params.stop());
  const double gold_score = score_sequence(emissions, gold, params);

  const bool track = tape.recording() && (emissions.requires_grad() || tr.requires_grad());
  Tensor out({1}, {log_z - gold_score}, track);
  if (!track) return out;

  std::vector<std::size_t> gold_tags(gold.begin(), gold.end());
  const std::size_t start = params.start(), stop = params.stop();
  tape.record(out, [emissions, tr, out, alpha = std::move(alpha), gold_tags = std::move(gold_tags),
                    log_z, k, steps, start, stop]() mutable {
    const double g = out.grad()[0];
    // beta[t * K + i]: log-sum of scores of all suffixes after tag i at t.
    std::vector<double> beta(steps * k);
    for (std::size_t i = 0; i < k; ++i) beta[(steps - 1) * k + i] = tr.at(i, stop);
    std::vector<double> terms(k);
    for (std::size_t t = steps - 1; t-- > 0;) {
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          terms[j] = tr.at(i, j) + emissions.at(t + 1, j) + beta[(t + 1) * k + j];
        }
        beta[t * k + i] = log_sum_exp(terms);
      }
    }
    auto unary = [&](std::size_t t, std::size_t j) {
      return std::exp(alpha[t * k + j] + beta[t * k + j] - log_z);
    };

    if (emissions.requires_grad()) {
      auto ge = emissions.ensure_grad();
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
          ge[t * k + j] += g * (unary(t, j) - (gold_tags[t] == j ? 1.0 : 0.0));
        }
      }
    }
    if (tr.requires_grad()) {
      auto gt = tr.ensure_grad();
      const std::size_t n = k + 2;
      for (std::size_t j = 0; j < k; ++j) {
        gt[start * n + j] += g * unary(0, j);
        gt[j * n + stop] += g * unary(steps - 1, j);
      }
      gt[start * n + gold_tags.front()] -= g;
      gt[gold_tags.back() * n + stop] -= g;
      for (std::size_t t = 0; t + 1 < steps; ++t) {
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const double pair = std::exp(alpha[t * k + i] + tr.at(i, j) + emissions.at(t + 1, j) +
                                         beta[(t + 1) * k + j] - log_z);
            gt[i * n + j] += g * pair;
          }
        }
        gt[gold_tags[t] * n + gold_tags[t + 1]] -= g;
      }
    }
  });
  return out;
}

ViterbiResult viterbi(const Tensor& emissions, const CrfParams& params) {
  check_emissions(emissions, params);
  const std::size_t k = params.num_tags();
  const std::size_t steps = emissions.dim(0);
  const Tensor& tr = params.transitions;

  std::vector<double> delta(k), next(k);
  std::vector<std::size_t> back(steps * k, 0);
  for (std::size_t j = 0; j < k; ++j) delta[j] = tr.at(params.start(), j) + emissions.at(0, j);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t best_i = 0;
      double best = delta[0] + tr.at(0, j);
      for (std::size_t i = 1; i < k; ++i) {
        const double cand = delta[i] + tr.at(i, j);
        if (cand > best) {
          best = cand;
          best_i = i;
        }
      }
      next[j] = best + emissions.at(t, j);
      back[t * k + j] = best_i;
    }
    delta.swap(next);
  }
  std::size_t last = 0;
  double best = delta[0] + tr.at(0, params.stop());
  for (std::size_t j = 1; j < k; ++j) {
    const double cand = delta[j] + tr.at(j, params.stop());
    if (cand > best) {
      best = cand;
      last = j;
    }
  }
  ViterbiResult result;
  result.score = best;
  result.tags.assign(steps, 0);
  result.tags[steps - 1] = last;
  for (std::size_t t = steps - 1; t > 0; --t) result.tags[t - 1] = back[t * k + result.tags[t]];
  return result;
}

}  // namespace negmtl
