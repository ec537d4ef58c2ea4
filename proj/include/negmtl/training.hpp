#pragma once

// Optimisation and the experiment protocol: Adam, single-task and
// multi-task training loops, seeded multi-run ensembles.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "negmtl/corpus.hpp"
#include "negmtl/models.hpp"

namespace negmtl {

enum class TrainMode { kStl, kMtl, kBow };
// alternating: a negation epoch precedes every sentiment epoch.
// warmup_once: only the first outer epoch runs the negation pass.
enum class MtlSchedule { kAlternating, kWarmupOnce };

std::string_view to_string(TrainMode mode);
TrainMode train_mode_from_string(std::string_view name);
std::string_view to_string(MtlSchedule schedule);
MtlSchedule mtl_schedule_from_string(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::kMtl;
  std::uint64_t seed = 1;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  std::size_t embedding_dim = 100;
  std::size_t hidden_dim = 100;
  double dropout_p = 0.3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::vector<double> bow_c_grid = {0.001, 0.01, 0.1, 1, 10, 100};
  std::size_t patience = 10;
  std::size_t min_count = 1;
  bool lowercase = false;
  MtlSchedule mtl_schedule = MtlSchedule::kAlternating;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  // `key=value` override with the value parsed per the field's type.
  void apply_override(std::string_view assignment);
};

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamHyper from(const TrainConfig& config);
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// Moments are keyed by parameter name, so each parameter group keeps its own
// step count when groups are updated on different schedules.
struct AdamState {
  std::map<std::string, AdamMoments> moments;
};

// One bias-corrected Adam update of every listed parameter from its current
// gradient. Throws std::logic_error naming a parameter without a gradient.
void adam_step(const NamedTensors& params, AdamState& state, const AdamHyper& hyper);

void zero_grads(const NamedTensors& params);

// ---------------------------------------------------------------------------
// Training loops

struct EpochMetrics {
  std::size_t epoch = 0;
  std::optional<double> negation_loss;   // mean per sentence
  std::optional<double> sentiment_loss;  // mean per document
  std::optional<double> dev_accuracy;

  nlohmann::json to_json() const;
};

struct EncodedDocument {
  DocumentIds ids;
  Label label = Label::kNegative;
};

struct EncodedSentence {
  SentenceIds ids;
  std::vector<BioTag> tags;
};

std::vector<EncodedDocument> encode_documents(const Vocabulary& vocab,
                                              const std::vector<Document>& docs);
// Every sentence of every document with its flattened BIO tags.
std::vector<EncodedSentence> encode_negation(const Vocabulary& vocab,
                                             const std::vector<Document>& docs);

// Mutable state of one training run.
struct TrainingRun {
  TrainConfig config;
  ModelParams model;
  AdamState adam;
  Rng dropout_rng;
  Rng negation_shuffle_rng;
  Rng sentiment_shuffle_rng;

  TrainingRun(const TrainConfig& config, ModelKind kind, std::size_t vocab_size);
};

// One pass over `sentences` in seeded shuffled order, one Adam step per
// sentence on the CRF loss, updating shared and negation parameters.
// Returns the mean loss.
double negation_epoch(TrainingRun& run, const std::vector<EncodedSentence>& sentences);

// One pass over `docs`, one Adam step per document on cross-entropy,
// updating shared and sentiment parameters. Returns the mean loss.
double sentiment_epoch(TrainingRun& run, const std::vector<EncodedDocument>& docs);

std::vector<Label> predict_labels(const ModelParams& model, const std::vector<EncodedDocument>& docs);
double labelled_accuracy(const ModelParams& model, const std::vector<EncodedDocument>& docs);

struct TrainResult {
  TrainConfig config;
  Vocabulary vocab;
  ModelParams best_model;  // snapshot at the best dev epoch
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
  std::vector<EpochMetrics> curve;
};

// Called after every epoch; lets callers stream the metrics log.
using EpochCallback = std::function<void(const EpochMetrics&)>;

// Sentiment-only training with best-dev model selection and patience.
TrainResult train_stl(const TrainConfig& config, const std::vector<Document>& train,
                      const std::vector<Document>& dev, const EpochCallback& on_epoch = {});

// Alternates a full negation epoch over all training sentences with a full
// sentiment epoch over all training documents. Throws when a training
// sentence carries no negation annotation.
TrainResult train_mtl(const TrainConfig& config, const std::vector<Document>& train,
                      const std::vector<Document>& dev, const EpochCallback& on_epoch = {});

// Negation tagger alone (no sentiment head), trained for config.epochs.
struct TaggerResult {
  Vocabulary vocab;
  ModelParams model;
  std::vector<double> losses;
};
TaggerResult train_tagger(const TrainConfig& config, const std::vector<Document>& train);

// ---------------------------------------------------------------------------
// Ensembles

// Majority label per document over an odd number of runs.
std::vector<Label> majority_vote(const std::vector<std::vector<Label>>& per_run);

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult result;
  std::vector<Label> dev_predictions;
  std::vector<Label> test_predictions;
};

struct EnsembleResult {
  std::vector<SeedRun> runs;
  std::vector<Label> dev_vote;
  std::vector<Label> test_vote;
};

// Trains one STL or MTL model per seed (seed overrides config.seed) and
// votes. An even number of seeds is rejected.
EnsembleResult run_ensemble(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                            const std::vector<Document>& train, const std::vector<Document>& dev,
                            const std::vector<Document>& test = {},
                            const std::function<void(std::uint64_t, const EpochMetrics&)>&
                                on_epoch = {});

}  // namespace negmtl
