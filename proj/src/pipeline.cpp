#include "negmtl/pipeline.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "negmtl/bow.hpp"
#include "negmtl/checkpoint.hpp"
#include "negmtl/evaluation.hpp"
#include "negmtl/gradcheck.hpp"

namespace fs = std::filesystem;

namespace negmtl {

TrainConfig resolve_config(const RunOptions& opts) {
  TrainConfig config;
  if (opts.config_path) {
    std::ifstream in(*opts.config_path);
    if (!in) throw std::runtime_error("cannot open config " + opts.config_path->string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config " + opts.config_path->string() + ": " + e.what());
    }
    config = TrainConfig::from_json(j);
  }
  if (opts.mode) config.mode = train_mode_from_string(*opts.mode);
  if (!opts.seeds.empty()) config.seed = opts.seeds.front();
  for (const auto& o : opts.overrides) config.apply_override(o);
  config.validate();
  return config;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

namespace {

nlohmann::json input_entry(const fs::path& p) {
  return {{"path", p.string()}, {"sha256", sha256_file(p)}};
}

nlohmann::json base_manifest(const std::string& command) {
  return {{"tool", "negmtl"}, {"version", kToolVersion}, {"command", command}};
}

void save_manifest(const fs::path& path, const nlohmann::json& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

void write_manifest(const RunOptions& opts, const std::string& command, const TrainConfig& config,
                    const std::vector<std::uint64_t>& seeds) {
  nlohmann::json inputs = {{"train", input_entry(opts.train)}, {"dev", input_entry(opts.dev)}};
  if (opts.test) inputs["test"] = input_entry(*opts.test);
  nlohmann::json manifest = base_manifest(command);
  manifest["config"] = config.to_json();
  manifest["seeds"] = seeds;
  manifest["inputs"] = inputs;
  manifest["std_kind"] = "population";
  save_manifest(opts.out / "manifest.json", manifest);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct Splits {
  std::vector<Document> train, dev, test;
};

Splits load_splits(const RunOptions& opts) {
  Splits s;
  s.train = parse_corpus(opts.train);
  s.dev = parse_corpus(opts.dev);
  if (opts.test) s.test = parse_corpus(*opts.test);
  if (s.train.empty()) throw std::invalid_argument("training corpus " + opts.train.string() + " is empty");
  if (s.dev.empty()) throw std::invalid_argument("development corpus " + opts.dev.string() + " is empty");
  return s;
}

void check_mtl_annotations(const TrainConfig& config, const std::vector<Document>& train) {
  if (config.mode != TrainMode::kMtl) return;
  for (const auto& d : train)
    for (const auto& s : d.sentences)
      if (!s.negation_annotated) {
        throw std::invalid_argument("mode mtl needs negation annotations; document '" + d.id +
                                    "' has a sentence without a \"negations\" field");
      }
}

void write_report(const fs::path& out, const RunReport& report) {
  write_text(out / "report.json", report.to_json().dump(2) + "\n");
  write_text(out / "report.txt", report.to_text());
}

}  // namespace

void cmd_stats(const std::vector<std::pair<std::string, fs::path>>& splits, std::ostream& out,
               bool as_json) {
  std::vector<std::vector<Document>> loaded;
  loaded.reserve(splits.size());
  for (const auto& [name, path] : splits) loaded.push_back(parse_corpus(path));
  std::vector<std::pair<std::string, const std::vector<Document>*>> named;
  for (std::size_t i = 0; i < splits.size(); ++i) named.emplace_back(splits[i].first, &loaded[i]);
  const CorpusStats stats = corpus_stats(named);
  if (as_json) {
    out << stats_to_json(stats).dump(2) << '\n';
  } else {
    out << stats_report(stats);
  }
}

void cmd_train(const RunOptions& opts, std::ostream& log) {
  const TrainConfig config = resolve_config(opts);
  const Splits data = load_splits(opts);
  check_mtl_annotations(config, data.train);
  fs::create_directories(opts.out / "preds");
  write_manifest(opts, "train", config, {config.seed});

  std::ofstream metrics(opts.out / "metrics.jsonl");
  const std::string seed_name = "seed-" + std::to_string(config.seed);
  std::vector<Label> dev_pred, test_pred;

  if (config.mode == TrainMode::kBow) {
    const BowResult bow = train_bow(config, data.train, data.dev);
    for (const auto& [c, acc] : bow.grid) {
      metrics << nlohmann::json{{"c", c}, {"dev_accuracy", acc}}.dump() << '\n';
    }
    log << "bow: chosen C = " << bow.chosen_c << ", dev accuracy "
        << format_percent(bow.dev_accuracy) << '\n';
    save_checkpoint(make_checkpoint(bow, config), opts.out / "checkpoint.bin");
    for (const auto& d : data.dev) dev_pred.push_back(bow.model.predict(d));
    for (const auto& d : data.test) test_pred.push_back(bow.model.predict(d));
  } else {
    auto on_epoch = [&](const EpochMetrics& m) {
      metrics << m.to_json().dump() << '\n';
      metrics.flush();
      log << to_string(config.mode) << " epoch " << m.epoch << ": dev "
          << format_percent(m.dev_accuracy.value_or(0.0)) << '\n';
    };
    const TrainResult result = config.mode == TrainMode::kMtl
                                   ? train_mtl(config, data.train, data.dev, on_epoch)
                                   : train_stl(config, data.train, data.dev, on_epoch);
    log << "best epoch " << result.best_epoch << ", dev accuracy "
        << format_percent(result.best_dev_accuracy) << '\n';
    Checkpoint ckpt = make_checkpoint(result);
    save_checkpoint(ckpt, opts.out / "checkpoint.bin");
    // Predictions come from the saved (32-bit) parameters so that `predict`
    // on the checkpoint reproduces them exactly.
    const ModelParams saved = model_from_checkpoint(load_checkpoint(opts.out / "checkpoint.bin"));
    dev_pred = predict_labels(saved, encode_documents(result.vocab, data.dev));
    if (!data.test.empty()) test_pred = predict_labels(saved, encode_documents(result.vocab, data.test));
  }

  const auto dev_records = make_predictions(data.dev, dev_pred);
  write_predictions(opts.out / "preds" / (seed_name + ".jsonl"), dev_records);
  if (!data.test.empty()) {
    write_predictions(opts.out / "preds" / ("test-" + seed_name + ".jsonl"),
                      make_predictions(data.test, test_pred));
  }
  write_report(opts.out, make_run_report(std::string(to_string(config.mode)), {config.seed},
                                         {dev_records}, nullptr));
}

void cmd_ensemble(const RunOptions& opts, std::ostream& log) {
  const TrainConfig config = resolve_config(opts);
  std::vector<std::uint64_t> seeds = opts.seeds;
  if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
  if (seeds.size() % 2 == 0) {
    throw std::invalid_argument("ensemble needs an odd number of seeds, got " +
                                std::to_string(seeds.size()));
  }
  if (config.mode == TrainMode::kBow) throw std::invalid_argument("ensemble supports modes stl and mtl");
  const Splits data = load_splits(opts);
  check_mtl_annotations(config, data.train);
  fs::create_directories(opts.out / "preds");
  fs::create_directories(opts.out / "checkpoints");
  write_manifest(opts, "ensemble", config, seeds);

  std::ofstream metrics(opts.out / "metrics.jsonl");
  std::vector<std::vector<PredictionRecord>> per_seed;
  std::vector<std::vector<Label>> dev_labels, test_labels;
  for (std::uint64_t seed : seeds) {
    TrainConfig c = config;
    c.seed = seed;
    auto on_epoch = [&](const EpochMetrics& m) {
      nlohmann::json j = m.to_json();
      j["seed"] = seed;
      metrics << j.dump() << '\n';
      metrics.flush();
    };
    const TrainResult result = c.mode == TrainMode::kMtl ? train_mtl(c, data.train, data.dev, on_epoch)
                                                         : train_stl(c, data.train, data.dev, on_epoch);
    const std::string name = "seed-" + std::to_string(seed);
    const fs::path ckpt_path = opts.out / "checkpoints" / (name + ".bin");
    save_checkpoint(make_checkpoint(result), ckpt_path);
    const ModelParams saved = model_from_checkpoint(load_checkpoint(ckpt_path));
    dev_labels.push_back(predict_labels(saved, encode_documents(result.vocab, data.dev)));
    per_seed.push_back(make_predictions(data.dev, dev_labels.back()));
    write_predictions(opts.out / "preds" / (name + ".jsonl"), per_seed.back());
    if (!data.test.empty()) {
      test_labels.push_back(predict_labels(saved, encode_documents(result.vocab, data.test)));
      write_predictions(opts.out / "preds" / ("test-" + name + ".jsonl"),
                        make_predictions(data.test, test_labels.back()));
    }
    log << to_string(c.mode) << " " << name << ": best epoch " << result.best_epoch << ", dev "
        << format_percent(accuracy(per_seed.back())) << '\n';
  }
  const auto vote = make_predictions(data.dev, majority_vote(dev_labels));
  write_predictions(opts.out / "preds" / "ensemble.jsonl", vote);
  if (!data.test.empty()) {
    write_predictions(opts.out / "preds" / "test-ensemble.jsonl",
                      make_predictions(data.test, majority_vote(test_labels)));
  }
  const RunReport report =
      make_run_report(std::string(to_string(config.mode)), seeds, per_seed, &vote);
  write_report(opts.out, report);
  log << report.to_text();
}

void cmd_predict(const PredictOptions& opts, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const auto docs = parse_corpus(opts.data);
  std::vector<PredictionRecord> records;
  if (ckpt.model_kind == "bow") {
    if (opts.tags) throw std::invalid_argument("checkpoint has no negation head (bow model)");
    const BowModel bow = bow_from_checkpoint(ckpt);
    for (const auto& d : docs) records.push_back({d.id, d.label, bow.predict(d), {}});
  } else {
    if (opts.tags && !has_negation_head(ckpt)) {
      throw std::invalid_argument("checkpoint has no negation head (" + ckpt.model_kind +
                                  " model); cannot emit tags");
    }
    const ModelParams model = model_from_checkpoint(ckpt);
    if (!model.sentiment) throw std::invalid_argument("checkpoint has no sentiment head");
    for (const auto& d : docs) {
      const DocumentIds ids = ckpt.vocab.encode(d);
      PredictionRecord r{d.id, d.label, predict_document(model, ids).label, {}};
      if (opts.tags) {
        std::vector<std::vector<BioTag>> tags;
        for (const auto& s : ids) tags.push_back(negation_tag(model, s));
        r.tags = std::move(tags);
      }
      records.push_back(std::move(r));
    }
  }
  write_predictions(opts.out, records);
  nlohmann::json manifest = base_manifest("predict");
  manifest["inputs"] = {{"checkpoint", input_entry(opts.checkpoint)}, {"data", input_entry(opts.data)}};
  manifest["tags"] = opts.tags;
  save_manifest(fs::path(opts.out.string() + ".manifest.json"), manifest);
  log << "wrote " << records.size() << " predictions to " << opts.out.string() << '\n';
}

void cmd_eval(const EvalOptions& opts, std::ostream& out) {
  if (opts.aggregate != "ensemble" && opts.aggregate != "sum") {
    throw std::invalid_argument("--aggregate must be ensemble or sum");
  }
  const auto how = opts.aggregate == "sum" ? ConfusionAggregate::kSumOverSeeds
                                           : ConfusionAggregate::kEnsemble;
  nlohmann::json j;
  const RunReport report = report_from_directory(opts.run, opts.run.filename().string());
  out << report.to_text();
  j["run"] = report.to_json();
  const ConfusionMatrix cm = aggregate_confusion(report, how);
  j["confusion"] = confusion_to_json(cm);
  j["aggregate"] = opts.aggregate;

  std::optional<ConfusionMatrix> relative;
  if (opts.baseline) {
    const RunReport base = report_from_directory(*opts.baseline, opts.baseline->filename().string());
    out << base.to_text();
    relative = relative_confusion(cm, aggregate_confusion(base, how));
    j["baseline"] = base.to_json();
    j["relative_confusion"] = confusion_to_json(*relative);
    out << "relative confusion (run - baseline), rows gold, cols pred:\n"
        << confusion_to_csv(*relative);
  }

  if (opts.gold && opts.tagged_predictions) {
    const auto docs = parse_corpus(*opts.gold);
    const auto preds = read_predictions(*opts.tagged_predictions);
    std::vector<std::vector<BioTag>> gold_tags, pred_tags;
    for (std::size_t i = 0; i < docs.size() && i < preds.size(); ++i) {
      if (preds[i].id != docs[i].id || !preds[i].tags) {
        throw std::invalid_argument("tagged predictions do not align with the gold corpus at '" +
                                    docs[i].id + "'");
      }
      for (std::size_t s = 0; s < docs[i].sentences.size(); ++s) {
        gold_tags.push_back(to_bio(docs[i].sentences[s]));
        pred_tags.push_back(preds[i].tags->at(s));
      }
    }
    const NegationScores ns = negation_token_f1(gold_tags, pred_tags);
    auto prf = [](const PrfScores& s) {
      return nlohmann::json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    };
    j["negation"] = {{"cue", prf(ns.cue)}, {"scope", prf(ns.scope)}, {"micro", prf(ns.micro)}};
    out << "negation token F1: cue " << format_percent(ns.cue.f1) << ", scope "
        << format_percent(ns.scope.f1) << ", micro " << format_percent(ns.micro.f1) << '\n';
  }

  if (opts.out) {
    fs::create_directories(*opts.out);
    nlohmann::json manifest = base_manifest("eval");
    manifest["inputs"] = {{"run", opts.run.string()}};
    if (opts.baseline) manifest["inputs"]["baseline"] = opts.baseline->string();
    if (opts.gold) manifest["inputs"]["gold"] = input_entry(*opts.gold);
    if (opts.tagged_predictions) manifest["inputs"]["tagged"] = input_entry(*opts.tagged_predictions);
    manifest["aggregate"] = opts.aggregate;
    save_manifest(*opts.out / "manifest.json", manifest);
    write_text(*opts.out / "eval.json", j.dump(2) + "\n");
    write_text(*opts.out / "confusion.csv", confusion_to_csv(cm));
    if (relative) write_text(*opts.out / "relative_confusion.csv", confusion_to_csv(*relative));
  }
}

bool cmd_gradcheck(const std::string& component, std::uint64_t seed, bool inject_bug,
                   std::ostream& out) {
  const auto checks = run_gradcheck_suite(
      component, seed, 1e-4, inject_bug ? GradCheckBug::kWrongTanhDerivative : GradCheckBug::kNone);
  bool ok = true;
  for (const auto& c : checks) {
    out << (c.report.passed ? "PASS " : "FAIL ") << c.component << " / " << c.name
        << "  max_rel_error=" << std::scientific << std::setprecision(3) << c.report.max_rel_error
        << std::defaultfloat << "  coords=" << c.report.coordinates;
    if (!c.report.passed) out << "  worst=" << c.report.worst_parameter << "[" << c.report.worst_index << "]";
    out << '\n';
    ok = ok && c.report.passed;
  }
  return ok;
}

}  // namespace negmtl
