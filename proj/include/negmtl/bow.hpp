#pragma once

// Bag-of-words baseline: L2-regularised binary logistic regression over
// token counts, with C chosen on development accuracy.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "negmtl/corpus.hpp"
#include "negmtl/training.hpp"

namespace negmtl {

// Sparse count rows; column j counts vocabulary id j.
struct BowData {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> targets;  // 1 = positive
  std::size_t dim = 0;
};

BowData bow_features(const Vocabulary& vocab, const std::vector<Document>& docs);

// mean cross-entropy + (1 / C) * 0.5 * |w|^2; the bias is not penalised.
// Gradients are written when the output spans are non-empty.
double logistic_objective(const BowData& data, std::span<const double> weights, double bias,
                          double c, std::span<double> grad_weights = {},
                          double* grad_bias = nullptr);

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
};

// Full-batch gradient descent with backtracking (Armijo) step sizes, until
// the gradient norm falls below `tolerance` or `max_iterations` is reached.
LogisticFit fit_logistic(const BowData& data, double c, std::vector<double> init_weights,
                         double init_bias, std::size_t max_iterations = 10'000,
                         double tolerance = 1e-6);

struct BowModel {
  Vocabulary vocab;
  std::vector<double> weights;
  double bias = 0.0;
  double c = 1.0;

  double score(const Document& doc) const;
  // score >= 0 is positive, matching the neural tie rule.
  Label predict(const Document& doc) const;
};

struct BowResult {
  BowModel model;
  double chosen_c = 0.0;
  double dev_accuracy = 0.0;
  double train_accuracy = 0.0;
  // (C, dev accuracy) for every grid value in order.
  std::vector<std::pair<double, double>> grid;
};

// Ties in dev accuracy go to the smaller C.
BowResult train_bow(const TrainConfig& config, const std::vector<Document>& train,
                    const std::vector<Document>& dev);

}  // namespace negmtl
