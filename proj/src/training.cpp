#include "negmtl/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace negmtl {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kStl: return "stl";
    case TrainMode::kMtl: return "mtl";
    case TrainMode::kBow: return "bow";
  }
  return "?";
}

TrainMode train_mode_from_string(std::string_view name) {
  if (name == "stl") return TrainMode::kStl;
  if (name == "mtl") return TrainMode::kMtl;
  if (name == "bow") return TrainMode::kBow;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "' (expected stl|mtl|bow)");
}

std::string_view to_string(MtlSchedule schedule) {
  return schedule == MtlSchedule::kAlternating ? "alternating" : "warmup_once";
}

MtlSchedule mtl_schedule_from_string(std::string_view name) {
  if (name == "alternating") return MtlSchedule::kAlternating;
  if (name == "warmup_once") return MtlSchedule::kWarmupOnce;
  throw std::invalid_argument("unknown mtl_schedule '" + std::string(name) +
                              "' (expected alternating|warmup_once)");
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (embedding_dim == 0) fail("embedding_dim must be >= 1");
  if (hidden_dim == 0) fail("hidden_dim must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
  if (bow_c_grid.empty()) fail("bow_c_grid must not be empty");
  for (double c : bow_c_grid) {
    if (!(c > 0.0)) fail("bow_c_grid values must be > 0");
  }
  if (min_count < 1) fail("min_count must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"mode", std::string(to_string(mode))},
          {"seed", seed},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"embedding_dim", embedding_dim},
          {"hidden_dim", hidden_dim},
          {"dropout_p", dropout_p},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_epsilon", adam_epsilon},
          {"bow_c_grid", bow_c_grid},
          {"patience", patience},
          {"min_count", min_count},
          {"lowercase", lowercase},
          {"mtl_schedule", std::string(to_string(mtl_schedule))}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  TrainConfig c;
  const nlohmann::json known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("mode")) c.mode = train_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("embedding_dim")) c.embedding_dim = j["embedding_dim"].get<std::size_t>();
    if (j.contains("hidden_dim")) c.hidden_dim = j["hidden_dim"].get<std::size_t>();
    if (j.contains("dropout_p")) c.dropout_p = j["dropout_p"].get<double>();
    if (j.contains("adam_beta1")) c.adam_beta1 = j["adam_beta1"].get<double>();
    if (j.contains("adam_beta2")) c.adam_beta2 = j["adam_beta2"].get<double>();
    if (j.contains("adam_epsilon")) c.adam_epsilon = j["adam_epsilon"].get<double>();
    if (j.contains("bow_c_grid")) c.bow_c_grid = j["bow_c_grid"].get<std::vector<double>>();
    if (j.contains("patience")) c.patience = j["patience"].get<std::size_t>();
    if (j.contains("min_count")) c.min_count = j["min_count"].get<std::size_t>();
    if (j.contains("lowercase")) c.lowercase = j["lowercase"].get<bool>();
    if (j.contains("mtl_schedule")) {
      c.mtl_schedule = mtl_schedule_from_string(j["mtl_schedule"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

void TrainConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw std::invalid_argument("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json current = to_json();
  if (!current.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  nlohmann::json value;
  if (current[key].is_string()) {
    value = raw;
  } else if (key == "bow_c_grid" && !raw.starts_with("[")) {
    value = nlohmann::json::array();
    std::size_t pos = 0;
    while (pos <= raw.size()) {
      const auto comma = std::min(raw.find(',', pos), raw.size());
      value.push_back(std::stod(raw.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  } else {
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument("config: cannot parse value '" + raw + "' for '" + key + "'");
    }
  }
  current[key] = value;
  *this = from_json(current);
}

// ---------------------------------------------------------------------------
// Adam

AdamHyper AdamHyper::from(const TrainConfig& config) {
  return {config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon};
}

void adam_step(const NamedTensors& params, AdamState& state, const AdamHyper& hyper) {
  for (const auto& [name, tensor] : params) {
    if (!tensor.has_grad()) throw std::logic_error("adam_step: parameter '" + name + "' has no gradient");
  }
  for (const auto& [name, tensor] : params) {
    Tensor p = tensor;
    AdamMoments& mom = state.moments[name];
    if (mom.m.size() != p.size()) {
      mom.m.assign(p.size(), 0.0);
      mom.v.assign(p.size(), 0.0);
      mom.step = 0;
    }
    ++mom.step;
    const double t = static_cast<double>(mom.step);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    auto values = p.values();
    auto grad = p.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      mom.m[i] = hyper.beta1 * mom.m[i] + (1.0 - hyper.beta1) * g;
      mom.v[i] = hyper.beta2 * mom.v[i] + (1.0 - hyper.beta2) * g * g;
      const double m_hat = mom.m[i] / c1;
      const double v_hat = mom.v[i] / c2;
      values[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
}

void zero_grads(const NamedTensors& params) {
  for (const auto& [name, tensor] : params) {
    Tensor t = tensor;
    t.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Encoding

nlohmann::json EpochMetrics::to_json() const {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"epoch", epoch},
          {"negation_loss", opt(negation_loss)},
          {"sentiment_loss", opt(sentiment_loss)},
          {"dev_accuracy", opt(dev_accuracy)}};
}

std::vector<EncodedDocument> encode_documents(const Vocabulary& vocab,
                                              const std::vector<Document>& docs) {
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({vocab.encode(d), d.label});
  return out;
}

std::vector<EncodedSentence> encode_negation(const Vocabulary& vocab,
                                             const std::vector<Document>& docs) {
  std::vector<EncodedSentence> out;
  for (const auto& d : docs) {
    for (const auto& s : d.sentences) out.push_back({vocab.encode(s.tokens), to_bio(s)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loops

TrainingRun::TrainingRun(const TrainConfig& cfg, ModelKind kind, std::size_t vocab_size)
    : config(cfg),
      model(ModelParams::init(kind, {vocab_size, cfg.embedding_dim, cfg.hidden_dim},
                              RngStreams(cfg.seed))),
      dropout_rng(RngStreams(cfg.seed).stream("dropout")),
      negation_shuffle_rng(RngStreams(cfg.seed).stream("shuffle.negation")),
      sentiment_shuffle_rng(RngStreams(cfg.seed).stream("shuffle.sentiment")) {}

namespace {

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

NamedTensors concat_groups(NamedTensors a, const NamedTensors& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

double negation_epoch(TrainingRun& run, const std::vector<EncodedSentence>& sentences) {
  if (sentences.empty()) throw std::invalid_argument("negation_epoch: no training sentences");
  const NamedTensors params =
      concat_groups(run.model.shared_parameters(), run.model.negation_parameters());
  const AdamHyper hyper = AdamHyper::from(run.config);
  double total = 0.0;
  for (std::size_t idx : shuffled_order(sentences.size(), run.negation_shuffle_rng)) {
    const auto& s = sentences[idx];
    Tape tape;
    Tensor loss = negation_loss(tape, run.model, s.ids, s.tags, Mode::kTrain, run.dropout_rng,
                                run.config.dropout_p);
    total += loss.item();
    tape.backward(loss);
    adam_step(params, run.adam, hyper);
    zero_grads(params);
  }
  return total / static_cast<double>(sentences.size());
}

double sentiment_epoch(TrainingRun& run, const std::vector<EncodedDocument>& docs) {
  if (docs.empty()) throw std::invalid_argument("sentiment_epoch: no training documents");
  const NamedTensors params =
      concat_groups(run.model.shared_parameters(), run.model.sentiment_parameters());
  const AdamHyper hyper = AdamHyper::from(run.config);
  double total = 0.0;
  for (std::size_t idx : shuffled_order(docs.size(), run.sentiment_shuffle_rng)) {
    const auto& d = docs[idx];
    Tape tape;
    Tensor loss = sentiment_loss(tape, run.model, d.ids, d.label, Mode::kTrain, run.dropout_rng,
                                 run.config.dropout_p);
    total += loss.item();
    tape.backward(loss);
    adam_step(params, run.adam, hyper);
    zero_grads(params);
  }
  return total / static_cast<double>(docs.size());
}

std::vector<Label> predict_labels(const ModelParams& model,
                                  const std::vector<EncodedDocument>& docs) {
  std::vector<Label> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(predict_document(model, d.ids).label);
  return out;
}

double labelled_accuracy(const ModelParams& model, const std::vector<EncodedDocument>& docs) {
  if (docs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& d : docs) correct += predict_document(model, d.ids).label == d.label;
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

namespace {

TrainResult train_sentiment_model(const TrainConfig& config, const std::vector<Document>& train,
                                   const std::vector<Document>& dev, bool multitask,
                                   const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("training corpus is empty");
  if (dev.empty()) throw std::invalid_argument("development corpus is empty");
  if (multitask) {
    for (const auto& d : train) {
      for (const auto& s : d.sentences) {
        if (!s.negation_annotated) {
          throw std::invalid_argument("mtl training needs negation annotations; document '" +
                                      d.id + "' has an unannotated sentence");
        }
      }
    }
  }

  TrainResult result;
  result.config = config;
  result.vocab = build_vocab(train, config.min_count, config.lowercase);
  const auto train_docs = encode_documents(result.vocab, train);
  const auto dev_docs = encode_documents(result.vocab, dev);
  const auto train_sents =
      multitask ? encode_negation(result.vocab, train) : std::vector<EncodedSentence>{};

  TrainingRun run(config, multitask ? ModelKind::kMtl : ModelKind::kStl, result.vocab.size());
  result.best_model = run.model.clone();
  bool have_best = false;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    if (multitask &&
        (config.mtl_schedule == MtlSchedule::kAlternating || epoch == 1)) {
      m.negation_loss = negation_epoch(run, train_sents);
    }
    m.sentiment_loss = sentiment_epoch(run, train_docs);
    m.dev_accuracy = labelled_accuracy(run.model, dev_docs);
    result.curve.push_back(m);
    if (on_epoch) on_epoch(m);

    if (!have_best || *m.dev_accuracy > result.best_dev_accuracy) {
      have_best = true;
      result.best_dev_accuracy = *m.dev_accuracy;
      result.best_epoch = epoch;
      result.best_model = run.model.clone();
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience > 0) {
      break;
    }
  }
  return result;
}

}  // namespace

TrainResult train_stl(const TrainConfig& config, const std::vector<Document>& train,
                      const std::vector<Document>& dev, const EpochCallback& on_epoch) {
  return train_sentiment_model(config, train, dev, false, on_epoch);
}

TrainResult train_mtl(const TrainConfig& config, const std::vector<Document>& train,
                      const std::vector<Document>& dev, const EpochCallback& on_epoch) {
  return train_sentiment_model(config, train, dev, true, on_epoch);
}

TaggerResult train_tagger(const TrainConfig& config, const std::vector<Document>& train) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("training corpus is empty");
  TaggerResult result;
  result.vocab = build_vocab(train, config.min_count, config.lowercase);
  const auto sentences = encode_negation(result.vocab, train);
  TrainingRun run(config, ModelKind::kNegationTagger, result.vocab.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    result.losses.push_back(negation_epoch(run, sentences));
  }
  result.model = std::move(run.model);
  return result;
}

// ---------------------------------------------------------------------------
// Ensembles

std::vector<Label> majority_vote(const std::vector<std::vector<Label>>& per_run) {
  if (per_run.empty()) throw std::invalid_argument("majority_vote: no runs");
  if (per_run.size() % 2 == 0) {
    throw std::invalid_argument("majority_vote: an even number of runs (" +
                                std::to_string(per_run.size()) + ") can tie");
  }
  const std::size_t n = per_run.front().size();
  for (const auto& r : per_run) {
    if (r.size() != n) throw std::invalid_argument("majority_vote: runs disagree in length");
  }
  std::vector<Label> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positive = 0;
    for (const auto& r : per_run) positive += r[i] == Label::kPositive;
    out[i] = 2 * positive > per_run.size() ? Label::kPositive : Label::kNegative;
  }
  return out;
}

EnsembleResult run_ensemble(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                            const std::vector<Document>& train, const std::vector<Document>& dev,
                            const std::vector<Document>& test,
                            const std::function<void(std::uint64_t, const EpochMetrics&)>& on_epoch) {
  if (seeds.empty() || seeds.size() % 2 == 0) {
    throw std::invalid_argument("ensemble needs an odd number of seeds, got " +
                                std::to_string(seeds.size()));
  }
  if (config.mode == TrainMode::kBow) {
    throw std::invalid_argument("ensemble runs neural models only (mode stl or mtl)");
  }
  EnsembleResult out;
  std::vector<std::vector<Label>> dev_votes, test_votes;
  for (std::uint64_t seed : seeds) {
    TrainConfig c = config;
    c.seed = seed;
    EpochCallback cb;
    if (on_epoch) cb = [&on_epoch, seed](const EpochMetrics& m) { on_epoch(seed, m); };
    SeedRun run;
    run.seed = seed;
    run.result = c.mode == TrainMode::kMtl ? train_mtl(c, train, dev, cb) : train_stl(c, train, dev, cb);
    run.dev_predictions =
        predict_labels(run.result.best_model, encode_documents(run.result.vocab, dev));
    if (!test.empty()) {
      run.test_predictions =
          predict_labels(run.result.best_model, encode_documents(run.result.vocab, test));
    }
    dev_votes.push_back(run.dev_predictions);
    test_votes.push_back(run.test_predictions);
    out.runs.push_back(std::move(run));
  }
  out.dev_vote = majority_vote(dev_votes);
  if (!test.empty()) out.test_vote = majority_vote(test_votes);
  return out;
}

}  // namespace negmtl
