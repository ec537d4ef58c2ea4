#include "negmtl/bow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace negmtl {

BowData bow_features(const Vocabulary& vocab, const std::vector<Document>& docs) {
  BowData data;
  data.dim = vocab.size();
  for (const auto& doc : docs) {
    std::map<std::size_t, double> counts;
    for (const auto& s : doc.sentences) {
      for (const auto& tok : s.tokens) {
        const std::size_t id = vocab.lookup(tok);
        if (id >= 2) counts[id] += 1.0;
      }
    }
    data.rows.emplace_back(counts.begin(), counts.end());
    data.targets.push_back(doc.label == Label::kPositive ? 1.0 : 0.0);
  }
  return data;
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double margin(const std::vector<std::pair<std::size_t, double>>& row,
              std::span<const double> weights, double bias) {
  double z = bias;
  for (const auto& [j, x] : row) z += weights[j] * x;
  return z;
}

}  // namespace

double logistic_objective(const BowData& data, std::span<const double> weights, double bias,
                          double c, std::span<double> grad_weights, double* grad_bias) {
  const std::size_t n = data.rows.size();
  if (n == 0) throw std::invalid_argument("logistic_objective: no examples");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda = 1.0 / c;
  const bool want_grad = !grad_weights.empty();
  if (want_grad) std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
  double gb = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = margin(data.rows[i], weights, bias);
    const double y = data.targets[i];
    // -[y log s(z) + (1 - y) log(1 - s(z))] = softplus(z) - y z
    loss += softplus(z) - y * z;
    if (want_grad) {
      const double r = (sigmoid(z) - y) * inv_n;
      for (const auto& [j, x] : data.rows[i]) grad_weights[j] += r * x;
      gb += r;
    }
  }
  loss *= inv_n;
  double sq = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    sq += weights[j] * weights[j];
    if (want_grad) grad_weights[j] += lambda * weights[j];
  }
  if (grad_bias) *grad_bias = gb;
  return loss + 0.5 * lambda * sq;
}

LogisticFit fit_logistic(const BowData& data, double c, std::vector<double> init_weights,
                         double init_bias, std::size_t max_iterations, double tolerance) {
  if (data.dim == 0) throw std::invalid_argument("fit_logistic: empty vocabulary");
  if (init_weights.size() != data.dim) {
    throw std::invalid_argument("fit_logistic: initial weights have the wrong dimension");
  }
  LogisticFit fit;
  fit.weights = std::move(init_weights);
  fit.bias = init_bias;
  std::vector<double> grad(data.dim), trial(data.dim);
  double grad_b = 0.0;
  double step = 1.0;
  fit.loss = logistic_objective(data, fit.weights, fit.bias, c, grad, &grad_b);
  for (; fit.iterations < max_iterations; ++fit.iterations) {
    double sq = grad_b * grad_b;
    for (double g : grad) sq += g * g;
    fit.grad_norm = std::sqrt(sq);
    if (fit.grad_norm < tolerance) break;
    // Backtrack until the Armijo condition holds.
    for (;;) {
      for (std::size_t j = 0; j < data.dim; ++j) trial[j] = fit.weights[j] - step * grad[j];
      const double trial_b = fit.bias - step * grad_b;
      const double f = logistic_objective(data, trial, trial_b, c);
      if (f <= fit.loss - 0.5 * step * sq || step < 1e-20) {
        fit.weights.swap(trial);
        fit.bias = trial_b;
        break;
      }
      step *= 0.5;
    }
    fit.loss = logistic_objective(data, fit.weights, fit.bias, c, grad, &grad_b);
    step = std::min(step * 2.0, 1e6);
  }
  return fit;
}

double BowModel::score(const Document& doc) const {
  double z = bias;
  for (const auto& s : doc.sentences) {
    for (const auto& tok : s.tokens) {
      const std::size_t id = vocab.lookup(tok);
      if (id >= 2 && id < weights.size()) z += weights[id];
    }
  }
  return z;
}

Label BowModel::predict(const Document& doc) const {
  return score(doc) >= 0.0 ? Label::kPositive : Label::kNegative;
}

namespace {

double bow_accuracy(const BowModel& model, const std::vector<Document>& docs) {
  if (docs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& d : docs) correct += model.predict(d) == d.label;
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

}  // namespace

BowResult train_bow(const TrainConfig& config, const std::vector<Document>& train,
                    const std::vector<Document>& dev) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("training corpus is empty");
  if (dev.empty()) throw std::invalid_argument("development corpus is empty");
  Vocabulary vocab = build_vocab(train, config.min_count, config.lowercase);
  if (vocab.size() <= 2) throw std::invalid_argument("train_bow: empty vocabulary");
  const BowData data = bow_features(vocab, train);

  std::vector<double> grid = config.bow_c_grid;
  std::sort(grid.begin(), grid.end());
  BowResult result;
  bool have_best = false;
  for (double c : grid) {
    LogisticFit fit = fit_logistic(data, c, std::vector<double>(data.dim, 0.0), 0.0);
    BowModel model{vocab, std::move(fit.weights), fit.bias, c};
    const double acc = bow_accuracy(model, dev);
    result.grid.emplace_back(c, acc);
    if (!have_best || acc > result.dev_accuracy) {
      have_best = true;
      result.dev_accuracy = acc;
      result.chosen_c = c;
      result.model = std::move(model);
    }
  }
  result.train_accuracy = bow_accuracy(result.model, train);
  return result;
}

}  // namespace negmtl
