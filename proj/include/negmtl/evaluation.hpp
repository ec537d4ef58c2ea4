#pragma once

// Scoring and reporting. Prediction files are the source of truth: every
// figure in a report can be recomputed from them.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "negmtl/corpus.hpp"

namespace negmtl {

double accuracy(const std::vector<Label>& gold, const std::vector<Label>& pred);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by n)
};

MeanStd mean_std(const std::vector<double>& values);

// "72.5 (1.8)": accuracies given as fractions, printed as percentages.
std::string format_mean_std(const MeanStd& ms);
std::string format_percent(double fraction);

// counts[gold][pred]; index 0 negative, 1 positive.
struct ConfusionMatrix {
  std::array<std::array<long long, kNumLabels>, kNumLabels> counts{};

  long long total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(const std::vector<Label>& gold, const std::vector<Label>& pred);
ConfusionMatrix& operator+=(ConfusionMatrix& a, const ConfusionMatrix& b);

// Cellwise a - b. Both must cover the same number of documents.
ConfusionMatrix relative_confusion(const ConfusionMatrix& a, const ConfusionMatrix& b);

std::string confusion_to_csv(const ConfusionMatrix& cm);
nlohmann::json confusion_to_json(const ConfusionMatrix& cm);

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

struct NegationScores {
  PrfScores cue;
  PrfScores scope;
  PrfScores micro;
};

// Token-level scores where B-X and I-X both count as class X.
NegationScores negation_token_f1(const std::vector<std::vector<BioTag>>& gold,
                                 const std::vector<std::vector<BioTag>>& pred);

// Table of document and negation-structure counts per split and class.
std::string stats_report(const CorpusStats& stats);
nlohmann::json stats_to_json(const CorpusStats& stats);

// ---------------------------------------------------------------------------
// Prediction files: one {"id", "gold", "pred"} object per line; gold may be
// null. Optional "tags" holds per-sentence BIO tag lists.

struct PredictionRecord {
  std::string id;
  std::optional<Label> gold;
  Label pred = Label::kPositive;
  std::optional<std::vector<std::vector<BioTag>>> tags;
};

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

std::vector<PredictionRecord> make_predictions(const std::vector<Document>& docs,
                                               const std::vector<Label>& pred);

// Accuracy over records that carry a gold label.
double accuracy(const std::vector<PredictionRecord>& records);
ConfusionMatrix confusion_matrix(const std::vector<PredictionRecord>& records);

struct RunReport {
  std::string model;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_accuracies;
  MeanStd summary;
  std::optional<double> ensemble_accuracy;
  std::vector<ConfusionMatrix> seed_confusions;
  std::optional<ConfusionMatrix> ensemble_confusion;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Builds a report from per-seed prediction records and an optional vote.
RunReport make_run_report(const std::string& model, const std::vector<std::uint64_t>& seeds,
                          const std::vector<std::vector<PredictionRecord>>& per_seed,
                          const std::vector<PredictionRecord>* ensemble);

// Reads preds/seed-<n>.jsonl (and preds/ensemble.jsonl when present).
RunReport report_from_directory(const std::filesystem::path& run_dir, const std::string& model);

enum class ConfusionAggregate { kEnsemble, kSumOverSeeds };

// kEnsemble uses the majority-vote predictions, or the only seed of a single run.
ConfusionMatrix aggregate_confusion(const RunReport& report, ConfusionAggregate how);

}  // namespace negmtl
