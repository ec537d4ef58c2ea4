#include "negmtl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace negmtl {

double accuracy(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("accuracy: " + std::to_string(gold.size()) + " gold vs " +
                                std::to_string(pred.size()) + " predicted labels");
  }
  if (gold.empty()) throw std::invalid_argument("accuracy: no labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no values");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

std::string format_mean_std(const MeanStd& ms) {
  return format_percent(ms.mean) + " (" + format_percent(ms.stddev) + ")";
}

// ---------------------------------------------------------------------------
// Confusion matrices

long long ConfusionMatrix::total() const {
  long long n = 0;
  for (const auto& r : counts)
    for (auto c : r) n += c;
  return n;
}

ConfusionMatrix confusion_matrix(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  if (gold.size() != pred.size()) throw std::invalid_argument("confusion_matrix: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++cm.counts[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

ConfusionMatrix& operator+=(ConfusionMatrix& a, const ConfusionMatrix& b) {
  for (std::size_t g = 0; g < kNumLabels; ++g)
    for (std::size_t p = 0; p < kNumLabels; ++p) a.counts[g][p] += b.counts[g][p];
  return a;
}

ConfusionMatrix relative_confusion(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  if (a.total() != b.total()) {
    throw std::invalid_argument("relative_confusion: matrices cover " + std::to_string(a.total()) +
                                " and " + std::to_string(b.total()) + " documents");
  }
  ConfusionMatrix out;
  for (std::size_t g = 0; g < kNumLabels; ++g)
    for (std::size_t p = 0; p < kNumLabels; ++p) out.counts[g][p] = a.counts[g][p] - b.counts[g][p];
  return out;
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "gold,pred_negative,pred_positive\n";
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    os << to_string(static_cast<Label>(g)) << ',' << cm.counts[g][0] << ',' << cm.counts[g][1]
       << '\n';
  }
  return os.str();
}

nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
  return {{"labels", {"negative", "positive"}},
          {"counts", {{cm.counts[0][0], cm.counts[0][1]}, {cm.counts[1][0], cm.counts[1][1]}}}};
}

// ---------------------------------------------------------------------------
// Negation tagging

namespace {

enum class SpanClass { kNone, kCue, kScope };

SpanClass span_class(BioTag t) {
  switch (t) {
    case BioTag::kBCue:
    case BioTag::kICue: return SpanClass::kCue;
    case BioTag::kBScope:
    case BioTag::kIScope: return SpanClass::kScope;
    case BioTag::kO: return SpanClass::kNone;
  }
  return SpanClass::kNone;
}

void finish(PrfScores& s) {
  const double tp = static_cast<double>(s.true_positive);
  const double pp = tp + static_cast<double>(s.false_positive);
  const double ap = tp + static_cast<double>(s.false_negative);
  s.precision = pp > 0 ? tp / pp : 0.0;
  s.recall = ap > 0 ? tp / ap : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
}

}  // namespace

NegationScores negation_token_f1(const std::vector<std::vector<BioTag>>& gold,
                                 const std::vector<std::vector<BioTag>>& pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("negation_token_f1: sentence counts differ");
  }
  NegationScores out;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      throw std::invalid_argument("negation_token_f1: sentence " + std::to_string(s) +
                                  " has misaligned tag sequences");
    }
    for (std::size_t i = 0; i < gold[s].size(); ++i) {
      const SpanClass g = span_class(gold[s][i]);
      const SpanClass p = span_class(pred[s][i]);
      for (auto [cls, scores] : {std::pair{SpanClass::kCue, &out.cue},
                                 std::pair{SpanClass::kScope, &out.scope}}) {
        if (g == cls && p == cls) ++scores->true_positive;
        if (g != cls && p == cls) ++scores->false_positive;
        if (g == cls && p != cls) ++scores->false_negative;
      }
    }
  }
  out.micro.true_positive = out.cue.true_positive + out.scope.true_positive;
  out.micro.false_positive = out.cue.false_positive + out.scope.false_positive;
  out.micro.false_negative = out.cue.false_negative + out.scope.false_negative;
  finish(out.cue);
  finish(out.scope);
  finish(out.micro);
  return out;
}

// ---------------------------------------------------------------------------
// Corpus statistics

std::string stats_report(const CorpusStats& stats) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %10s %12s %12s %12s\n", "split",
                "documents", "positive", "negative", "sentences", "structures", "struct_pos",
                "struct_neg");
  os << line;
  for (const auto& [name, st] : stats.splits) {
    std::snprintf(line, sizeof line, "%-8s %10zu %10zu %10zu %10zu %12zu %12zu %12zu\n",
                  name.c_str(), st.documents, st.documents_per_class[1],
                  st.documents_per_class[0], st.sentences, st.structures,
                  st.structures_per_class[1], st.structures_per_class[0]);
    os << line;
  }
  return os.str();
}

nlohmann::json stats_to_json(const CorpusStats& stats) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, st] : stats.splits) {
    out[name] = {{"documents", st.documents},
                 {"sentences", st.sentences},
                 {"structures", st.structures},
                 {"documents_positive", st.documents_per_class[1]},
                 {"documents_negative", st.documents_per_class[0]},
                 {"structures_positive", st.structures_per_class[1]},
                 {"structures_negative", st.structures_per_class[0]}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction files

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions to " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["gold"] = r.gold ? nlohmann::ordered_json(std::string(to_string(*r.gold))) : nlohmann::ordered_json(nullptr);
    j["pred"] = std::string(to_string(r.pred));
    if (r.tags) {
      nlohmann::ordered_json tags = nlohmann::ordered_json::array();
      for (const auto& sent : *r.tags) {
        nlohmann::ordered_json st = nlohmann::ordered_json::array();
        for (auto t : sent) st.push_back(std::string(to_string(t)));
        tags.push_back(std::move(st));
      }
      j["tags"] = std::move(tags);
    }
    out << j.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.id = j.at("id").get<std::string>();
      if (!j.at("gold").is_null()) r.gold = label_from_string(j["gold"].get<std::string>());
      r.pred = label_from_string(j.at("pred").get<std::string>());
      if (j.contains("tags")) {
        std::vector<std::vector<BioTag>> tags;
        for (const auto& st : j["tags"]) {
          std::vector<BioTag> sent;
          for (const auto& t : st) sent.push_back(bio_tag_from_string(t.get<std::string>()));
          tags.push_back(std::move(sent));
        }
        r.tags = std::move(tags);
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> make_predictions(const std::vector<Document>& docs,
                                               const std::vector<Label>& pred) {
  if (docs.size() != pred.size()) throw std::invalid_argument("make_predictions: length mismatch");
  std::vector<PredictionRecord> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) out.push_back({docs[i].id, docs[i].label, pred[i], {}});
  return out;
}

namespace {

void labelled(const std::vector<PredictionRecord>& records, std::vector<Label>& gold,
              std::vector<Label>& pred) {
  for (const auto& r : records) {
    if (!r.gold) continue;
    gold.push_back(*r.gold);
    pred.push_back(r.pred);
  }
}

}  // namespace

double accuracy(const std::vector<PredictionRecord>& records) {
  std::vector<Label> gold, pred;
  labelled(records, gold, pred);
  return accuracy(gold, pred);
}

ConfusionMatrix confusion_matrix(const std::vector<PredictionRecord>& records) {
  std::vector<Label> gold, pred;
  labelled(records, gold, pred);
  return confusion_matrix(gold, pred);
}

// ---------------------------------------------------------------------------
// Reports

RunReport make_run_report(const std::string& model, const std::vector<std::uint64_t>& seeds,
                          const std::vector<std::vector<PredictionRecord>>& per_seed,
                          const std::vector<PredictionRecord>* ensemble) {
  if (seeds.size() != per_seed.size()) throw std::invalid_argument("make_run_report: seed count mismatch");
  RunReport r;
  r.model = model;
  r.seeds = seeds;
  for (const auto& preds : per_seed) {
    r.seed_accuracies.push_back(accuracy(preds));
    r.seed_confusions.push_back(confusion_matrix(preds));
  }
  r.summary = mean_std(r.seed_accuracies);
  if (ensemble) {
    r.ensemble_accuracy = accuracy(*ensemble);
    r.ensemble_confusion = confusion_matrix(*ensemble);
  }
  return r;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["seeds"] = seeds;
  j["seed_accuracies"] = seed_accuracies;
  j["mean_accuracy"] = summary.mean;
  j["std_accuracy"] = summary.stddev;
  j["std_kind"] = "population";
  j["formatted"] = format_mean_std(summary);
  j["ensemble_accuracy"] = ensemble_accuracy ? nlohmann::json(*ensemble_accuracy) : nlohmann::json(nullptr);
  nlohmann::json cms = nlohmann::json::array();
  for (const auto& cm : seed_confusions) cms.push_back(confusion_to_json(cm));
  j["seed_confusions"] = cms;
  j["ensemble_confusion"] =
      ensemble_confusion ? confusion_to_json(*ensemble_confusion) : nlohmann::json(nullptr);
  return j;
}

std::string RunReport::to_text() const {
  std::ostringstream os;
  os << "model: " << model << '\n';
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    os << "  seed " << seeds[i] << ": " << format_percent(seed_accuracies[i]) << '\n';
  }
  os << "  mean (population std): " << format_mean_std(summary) << '\n';
  if (ensemble_accuracy) os << "  majority vote: " << format_percent(*ensemble_accuracy) << '\n';
  return os.str();
}

RunReport report_from_directory(const std::filesystem::path& run_dir, const std::string& model) {
  const auto preds_dir = run_dir / "preds";
  if (!std::filesystem::is_directory(preds_dir)) {
    throw std::runtime_error("no prediction directory at " + preds_dir.string());
  }
  static const std::regex kSeedFile(R"(seed-(\d+)\.jsonl)");
  std::vector<std::pair<std::uint64_t, std::filesystem::path>> files;
  for (const auto& entry : std::filesystem::directory_iterator(preds_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kSeedFile)) files.emplace_back(std::stoull(m[1]), entry.path());
  }
  if (files.empty()) throw std::runtime_error("no seed-<n>.jsonl files in " + preds_dir.string());
  std::sort(files.begin(), files.end());
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<PredictionRecord>> per_seed;
  for (const auto& [seed, path] : files) {
    seeds.push_back(seed);
    per_seed.push_back(read_predictions(path));
  }
  std::vector<PredictionRecord> ensemble;
  const auto ens_path = preds_dir / "ensemble.jsonl";
  const bool have_ensemble = std::filesystem::exists(ens_path);
  if (have_ensemble) ensemble = read_predictions(ens_path);
  return make_run_report(model, seeds, per_seed, have_ensemble ? &ensemble : nullptr);
}

ConfusionMatrix aggregate_confusion(const RunReport& report, ConfusionAggregate how) {
  if (how == ConfusionAggregate::kEnsemble) {
    // A single-seed run is its own ensemble.
    if (!report.ensemble_confusion && report.seed_confusions.size() == 1) return report.seed_confusions[0];
    if (!report.ensemble_confusion) {
      throw std::invalid_argument("report for '" + report.model + "' has no ensemble predictions");
    }
    return *report.ensemble_confusion;
  }
  ConfusionMatrix total;
  for (const auto& cm : report.seed_confusions) total += cm;
  return total;
}

}  // namespace negmtl
