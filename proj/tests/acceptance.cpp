// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. Criterion 7 needs the converted review corpus
// (train/dev/test .jsonl) in $NEGMTL_SFU_DIR and reports SKIP otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "negmtl/bow.hpp"
#include "negmtl/checkpoint.hpp"
#include "negmtl/crf.hpp"
#include "negmtl/crf_oracle.hpp"
#include "negmtl/evaluation.hpp"
#include "negmtl/gradcheck.hpp"
#include "negmtl/layers.hpp"
#include "negmtl/pipeline.hpp"
#include "synthetic.hpp"

using namespace negmtl;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kPartitionTolerance = 1e-8;
constexpr double kBowLossTolerance = 1e-6;
constexpr double kTrainAccuracyTarget = 0.95;

struct Outcome {
  enum Status { kPass, kFail, kSkip } status = kFail;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Outcome within_budget(bool ok, std::string detail, double elapsed, double budget) {
  detail += "; " + fmt(elapsed) + "s (budget " + fmt(budget) + "s)";
  return {ok && elapsed < budget ? Outcome::kPass : Outcome::kFail, detail};
}

Outcome gradients() {
  const auto t0 = Clock::now();
  const auto checks = run_gradcheck_suite("all", 1, kGradTolerance);
  double worst = 0.0;
  std::string worst_name;
  bool ok = !checks.empty();
  for (const auto& c : checks) {
    ok = ok && c.report.passed;
    if (c.report.max_rel_error >= worst) {
      worst = c.report.max_rel_error;
      worst_name = c.component + "/" + c.name;
    }
  }
  // The harness must also reject a wrong derivative.
  bool caught = false;
  for (const auto& c : run_gradcheck_suite("layers", 1, kGradTolerance, GradCheckBug::kWrongTanhDerivative))
    caught = caught || !c.report.passed;
  return within_budget(ok && caught,
                       std::to_string(checks.size()) + " checks, max rel err " + fmt(worst) + " (" + worst_name +
                           "), injected bug " + (caught ? "caught" : "missed"),
                       seconds_since(t0), 60);
}

Outcome crf_oracle() {
  const auto t0 = Clock::now();
  Rng rng = RngStreams(2024).stream("acceptance.crf");
  std::size_t partition_ok = 0, path_ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    CrfParams p = CrfParams::init(kNumBioTags);
    for (double& v : p.transitions.values()) v = std::uniform_real_distribution<double>(-3, 3)(rng);
    Tensor e = uniform_tensor({t, kNumBioTags}, -3, 3, rng);
    const auto oracle = brute_force_oracle(e, p);
    const double err = std::abs(log_partition(e, p) - oracle.log_partition);
    worst = std::max(worst, err);
    partition_ok += err < kPartitionTolerance;
    const auto v = viterbi(e, p);
    path_ok += v.tags == oracle.best_path && v.score == oracle.best_score;
  }
  return within_budget(partition_ok == 100 && path_ok == 100,
                       "log Z " + std::to_string(partition_ok) + "/100 (max err " + fmt(worst) + "), Viterbi " +
                           std::to_string(path_ok) + "/100 exact",
                       seconds_since(t0), 60);
}

Outcome bio_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 shuffler(5);
  std::size_t round_trip = 0, invariant = 0, with_pre_cue = 0, with_overlap = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Sentence s = negmtl::testing::random_annotated_sentence(1'000'000 + seed);
    const FlatNegation flat = flatten(s);
    round_trip += from_bio(to_bio(s)) == flat;
    bool pre = false, overlap = false;
    for (std::size_t a = 0; a < s.negations.size(); ++a) {
      const auto& n = s.negations[a];
      pre = pre || (!n.scope.empty() && *n.scope.begin() < *n.cue.begin());
      for (std::size_t b = a + 1; b < s.negations.size(); ++b)
        for (std::size_t i : n.scope) overlap = overlap || s.negations[b].scope.count(i);
    }
    with_pre_cue += pre;
    with_overlap += overlap;
    std::shuffle(s.negations.begin(), s.negations.end(), shuffler);
    invariant += flatten(s) == flat && to_bio(s) == to_bio(flat, s.tokens.size());
  }
  return within_budget(round_trip == 1000 && invariant == 1000 && with_pre_cue > 0 && with_overlap > 0,
                       "round-trip " + std::to_string(round_trip) + "/1000, permutation-invariant " +
                           std::to_string(invariant) + "/1000 (" + std::to_string(with_pre_cue) +
                           " with pre-cue scope, " + std::to_string(with_overlap) + " with overlapping scopes)",
                       seconds_since(t0), 10);
}

Outcome trainability() {
  const auto t0 = Clock::now();
  const auto docs = negmtl::testing::separable_corpus(20, 11);
  TrainConfig c;  // default hyperparameters
  c.mode = TrainMode::kStl;
  c.epochs = 50;
  std::size_t reached = 0;
  double best = 0.0;
  train_stl(c, docs, docs, [&](const EpochMetrics& m) {
    const double acc = m.dev_accuracy.value_or(0.0);
    best = std::max(best, acc);
    if (reached == 0 && acc >= kTrainAccuracyTarget) reached = m.epoch;
  });

  Document d;
  d.id = "single";
  d.domain = "computers";
  Sentence s;
  s.tokens = {"la", "pantalla", "no", "es", "muy", "brillante", "pero", "funciona", "."};
  s.negations.push_back({{2}, {3, 4, 5}});
  d.sentences.push_back(s);
  TrainConfig tc;
  tc.mode = TrainMode::kMtl;
  tc.epochs = 100;
  tc.dropout_p = 0.0;
  tc.learning_rate = 1e-2;
  const auto tagger = train_tagger(tc, {d});
  const bool exact = negation_tag(tagger.model, tagger.vocab.encode(s.tokens)) == to_bio(s);

  return within_budget(reached > 0 && exact,
                       "STL train accuracy " + fmt(best) + (reached ? " (>= 0.95 at epoch " + std::to_string(reached) + ")" : "") +
                           "; tagger " + (exact ? "reproduces" : "misses") + " gold tags of one sentence",
                       seconds_since(t0), 300);
}

// Best dev accuracy the training loop would have kept had it stopped after
// `patience` epochs without improvement. Stopping only truncates the run, so
// this is exact given the full curve.
double best_with_patience(const std::vector<EpochMetrics>& curve, std::size_t patience) {
  double best = -1.0;
  std::size_t since = 0;
  for (const auto& m : curve) {
    if (*m.dev_accuracy > best) {
      best = *m.dev_accuracy;
      since = 0;
    } else if (++since >= patience) {
      break;
    }
  }
  return best;
}

Outcome mtl_benefit() {
  const auto t0 = Clock::now();
  const auto train = negmtl::testing::negation_flip_corpus(200, 101, "train");
  const auto dev = negmtl::testing::negation_flip_corpus(50, 202, "dev");
  TrainConfig c;
  // Layer widths reduced so ten runs fit the single-core budget. Selection is
  // the best dev epoch over the full 30-epoch budget; the default patience
  // of 10 is reported alongside.
  c.embedding_dim = 32;
  c.hidden_dim = 32;
  c.patience = 0;
  const std::size_t default_patience = TrainConfig{}.patience;
  std::vector<double> stl, mtl, stl_early, mtl_early;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    c.seed = seed;
    c.mode = TrainMode::kStl;
    const auto s = train_stl(c, train, dev);
    stl.push_back(s.best_dev_accuracy);
    stl_early.push_back(best_with_patience(s.curve, default_patience));
    c.mode = TrainMode::kMtl;
    const auto m = train_mtl(c, train, dev);
    mtl.push_back(m.best_dev_accuracy);
    mtl_early.push_back(best_with_patience(m.curve, default_patience));
  }
  const MeanStd s = mean_std(stl), m = mean_std(mtl);
  return within_budget(m.mean >= s.mean,
                       "mean dev accuracy MTL " + format_mean_std(m) + " vs STL " + format_mean_std(s) +
                           " (with patience " + std::to_string(default_patience) + ": MTL " +
                           format_mean_std(mean_std(mtl_early)) + " vs STL " +
                           format_mean_std(mean_std(stl_early)) + ")",
                       seconds_since(t0), 900);
}

Outcome protocol() {
  negmtl::testing::TempDir dir;
  write_corpus(dir / "train.jsonl", negmtl::testing::negation_flip_corpus(30, 7, "tr"));
  write_corpus(dir / "dev.jsonl", negmtl::testing::negation_flip_corpus(15, 8, "dv"));
  std::ostringstream log;
  auto ensemble = [&](const std::string& name) {
    RunOptions o;
    o.mode = "mtl";
    o.seeds = {1, 2, 3, 4, 5};
    o.overrides = {"epochs=3", "embedding_dim=8", "hidden_dim=6"};
    o.train = dir / "train.jsonl";
    o.dev = dir / "dev.jsonl";
    o.out = dir / name;
    cmd_ensemble(o, log);
    return o.out;
  };
  const fs::path a = ensemble("a"), b = ensemble("b");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };

  bool deterministic = slurp(a / "preds/ensemble.jsonl") == slurp(b / "preds/ensemble.jsonl") &&
                       slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl");
  std::vector<std::vector<Label>> per_seed;
  std::vector<double> accs;
  for (int s = 1; s <= 5; ++s) {
    const auto name = "preds/seed-" + std::to_string(s) + ".jsonl";
    deterministic = deterministic && slurp(a / name) == slurp(b / name);
    const auto recs = read_predictions(a / name);
    std::vector<Label> labels;
    std::size_t hits = 0;
    for (const auto& r : recs) {
      labels.push_back(r.pred);
      hits += r.gold && *r.gold == r.pred;
    }
    per_seed.push_back(labels);
    accs.push_back(static_cast<double>(hits) / recs.size());
  }

  std::vector<Label> voted;
  for (const auto& r : read_predictions(a / "preds/ensemble.jsonl")) voted.push_back(r.pred);
  bool invariant = majority_vote(per_seed) == voted;
  std::vector<std::size_t> order = {0, 1, 2, 3, 4};
  while (std::next_permutation(order.begin(), order.end())) {
    std::vector<std::vector<Label>> permuted;
    for (std::size_t i : order) permuted.push_back(per_seed[i]);
    invariant = invariant && majority_vote(permuted) == voted;
  }

  double mean = 0.0;
  for (double x : accs) mean += x;
  mean /= accs.size();
  double var = 0.0;
  for (double x : accs) var += (x - mean) * (x - mean);
  const double stddev = std::sqrt(var / accs.size());
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  const bool recomputes = std::abs(report["mean_accuracy"].get<double>() - mean) < 1e-15 &&
                          std::abs(report["std_accuracy"].get<double>() - stddev) < 1e-15;

  bool reload = true;
  for (int s = 1; s <= 5; ++s) {
    PredictOptions p;
    p.checkpoint = a / ("checkpoints/seed-" + std::to_string(s) + ".bin");
    p.data = dir / "dev.jsonl";
    p.out = dir / ("reload-" + std::to_string(s) + ".jsonl");
    cmd_predict(p, log);
    reload = reload && slurp(p.out) == slurp(a / ("preds/seed-" + std::to_string(s) + ".jsonl"));
  }
  return {deterministic && invariant && recomputes && reload ? Outcome::kPass : Outcome::kFail,
          std::string("deterministic ") + (deterministic ? "yes" : "no") + ", vote permutation-invariant " +
              (invariant ? "yes" : "no") + ", mean/std recomputed " + (recomputes ? "exactly" : "with mismatch") +
              ", reloaded checkpoints " + (reload ? "match" : "differ") + " label-for-label"};
}

Outcome corpus_reproduction() {
  const char* root = std::getenv("NEGMTL_SFU_DIR");
  if (!root) return {Outcome::kSkip, "set NEGMTL_SFU_DIR to a directory with train/dev/test .jsonl"};
  const fs::path dir(root);
  const auto train = parse_corpus(dir / "train.jsonl");
  const auto dev = parse_corpus(dir / "dev.jsonl");
  const auto test = parse_corpus(dir / "test.jsonl");
  const SplitStats tr = split_stats(train), dv = split_stats(dev), te = split_stats(test);
  const bool docs = tr.documents == 264 && dv.documents == 56 && te.documents == 80;
  const bool structures = tr.structures == 2733 && dv.structures == 645 && te.structures == 949;
  const bool per_class = dv.structures_per_class[1] == 303 && dv.structures_per_class[0] == 342;
  std::string detail = "documents " + std::to_string(tr.documents) + "/" + std::to_string(dv.documents) + "/" +
                       std::to_string(te.documents) + ", structures " + std::to_string(tr.structures) + "/" +
                       std::to_string(dv.structures) + "/" + std::to_string(te.structures) + ", dev per class " +
                       std::to_string(dv.structures_per_class[1]) + "/" + std::to_string(dv.structures_per_class[0]);

  // Accuracy comparison is advisory and slow on one core; opt in separately.
  if (std::getenv("NEGMTL_SFU_TRAIN")) {
    TrainConfig c;
    c.mode = TrainMode::kMtl;
    const auto result = run_ensemble(c, {1, 2, 3, 4, 5}, train, dev, test);
    std::vector<double> accs;
    for (const auto& run : result.runs) accs.push_back(accuracy(
        [&] { std::vector<Label> g; for (const auto& d : dev) g.push_back(d.label); return g; }(),
        run.dev_predictions));
    std::vector<Label> test_gold;
    for (const auto& d : test) test_gold.push_back(d.label);
    const double mean = mean_std(accs).mean * 100, ens = accuracy(test_gold, result.test_vote) * 100;
    detail += "; advisory: MTL dev mean " + fmt(mean) + " (expected 72.5 +/- 5" +
              (std::abs(mean - 72.5) <= 5 ? ", within" : ", outside") + "), ensemble test " + fmt(ens) +
              " (expected 66.2 +/- 5" + (std::abs(ens - 66.2) <= 5 ? ", within" : ", outside") + ")";
  }
  return {docs && structures && per_class ? Outcome::kPass : Outcome::kFail, detail};
}

Outcome bow_baseline() {
  const auto docs = negmtl::testing::negation_flip_corpus(40, 3, "bow");
  const BowData data = bow_features(build_vocab(docs), docs);
  std::vector<double> alt(data.dim);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = std::sin(7.0 * i + 1.0);
  const LogisticFit a = fit_logistic(data, 1.0, std::vector<double>(data.dim, 0.0), 0.0);
  const LogisticFit b = fit_logistic(data, 1.0, alt, 1.5);
  const double gap = std::abs(a.loss - b.loss);

  const auto sep = negmtl::testing::separable_corpus(10, 4, "sep");
  TrainConfig c;
  c.mode = TrainMode::kBow;
  c.bow_c_grid = {10, 0.01, 100, 1};
  const BowResult r = train_bow(c, sep, sep);
  std::size_t correct = 0;
  for (const auto& d : sep) correct += r.model.predict(d) == d.label;

  // Independent re-derivation of the selection rule: grid ascending, first maximum wins.
  std::vector<double> sorted = c.bow_c_grid;
  std::sort(sorted.begin(), sorted.end());
  bool grid_ok = r.grid.size() == sorted.size();
  double best_acc = -1, expected_c = 0;
  for (std::size_t i = 0; grid_ok && i < sorted.size(); ++i) {
    grid_ok = r.grid[i].first == sorted[i];
    if (r.grid[i].second > best_acc) {
      best_acc = r.grid[i].second;
      expected_c = r.grid[i].first;
    }
  }
  const bool ok = gap < kBowLossTolerance && correct == sep.size() && grid_ok && r.chosen_c == expected_c;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "loss gap between inits " + fmt(gap) + ", separable toy " + std::to_string(correct) + "/" +
              std::to_string(sep.size()) + ", chosen C " + fmt(r.chosen_c) + " (expected " + fmt(expected_c) + ")"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
      {"1 gradient correctness", gradients},
      {"2 CRF oracle equivalence", crf_oracle},
      {"3 BIO round-trip", bio_round_trip},
      {"4 trainability", trainability},
      {"5 MTL benefit property", mtl_benefit},
      {"6 protocol fidelity", protocol},
      {"7 conditional corpus reproduction", corpus_reproduction},
      {"8 BOW baseline", bow_baseline},
  };
  bool all_ok = true;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* status = o.status == Outcome::kPass ? "PASS" : o.status == Outcome::kSkip ? "SKIP" : "FAIL";
    std::cout << status << " criterion " << name << ": " << o.detail << std::endl;
    all_ok = all_ok && o.status != Outcome::kFail;
  }
  return all_ok ? 0 : 1;
}
