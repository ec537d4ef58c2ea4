#include <iostream>

#include "CLI11.hpp"
#include "negmtl/pipeline.hpp"

using namespace negmtl;

namespace {

void add_run_options(CLI::App* cmd, RunOptions& opts, std::string& seeds) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--train", opts.train, "training corpus (JSONL)")->required();
  cmd->add_option("--dev", opts.dev, "development corpus (JSONL)")->required();
  cmd->add_option("--test", opts.test, "optional test corpus (JSONL)");
  cmd->add_option("--out", opts.out, "output directory")->required();
  cmd->add_option("--mode", opts.mode, "bow | stl | mtl");
  cmd->add_option("--seeds", seeds, "comma-separated seeds");
  cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentiment classification with negation-aware multi-task learning"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::vector<std::string> stats_inputs;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "corpus statistics per split");
  stats->add_option("splits", stats_inputs, "name=path pairs, or plain paths")->required();
  stats->add_flag("--json", stats_json, "emit JSON instead of a table");

  RunOptions train_opts;
  std::string train_seeds;
  auto* train = app.add_subcommand("train", "train one model");
  add_run_options(train, train_opts, train_seeds);

  RunOptions ens_opts;
  std::string ens_seeds;
  auto* ensemble = app.add_subcommand("ensemble", "train one model per seed and majority-vote");
  add_run_options(ensemble, ens_opts, ens_seeds);

  PredictOptions pred_opts;
  auto* predict = app.add_subcommand("predict", "label a corpus with a checkpoint");
  predict->add_option("--checkpoint", pred_opts.checkpoint)->required()->check(CLI::ExistingFile);
  predict->add_option("--data", pred_opts.data)->required();
  predict->add_option("--out", pred_opts.out, "predictions file (JSONL)")->required();
  predict->add_flag("--tags", pred_opts.tags, "also emit per-token BIO tags");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "score a run directory");
  eval->add_option("--run", eval_opts.run)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--baseline", eval_opts.baseline, "run directory to compare against")
      ->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_opts.out, "directory for eval.json and confusion CSVs");
  eval->add_option("--aggregate", eval_opts.aggregate, "ensemble | sum")
      ->check(CLI::IsMember({"ensemble", "sum"}));
  eval->add_option("--gold", eval_opts.gold, "gold corpus for negation tag scoring");
  eval->add_option("--tagged", eval_opts.tagged_predictions, "predictions file with tags");

  std::string gc_component = "all";
  std::uint64_t gc_seed = 1;
  bool gc_bug = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--component", gc_component, "all | layers | crf | negation | sentiment");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_flag("--inject-bug", gc_bug, "use a broken tanh derivative (should fail)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats) {
      std::vector<std::pair<std::string, std::filesystem::path>> splits;
      for (const auto& s : stats_inputs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
          splits.emplace_back(std::filesystem::path(s).stem().string(), s);
        } else {
          splits.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
      }
      cmd_stats(splits, std::cout, stats_json);
    } else if (*train) {
      if (!train_seeds.empty()) train_opts.seeds = parse_seed_list(train_seeds);
      cmd_train(train_opts, std::cerr);
    } else if (*ensemble) {
      if (!ens_seeds.empty()) ens_opts.seeds = parse_seed_list(ens_seeds);
      cmd_ensemble(ens_opts, std::cerr);
    } else if (*predict) {
      cmd_predict(pred_opts, std::cerr);
    } else if (*eval) {
      cmd_eval(eval_opts, std::cout);
    } else if (*gradcheck) {
      return cmd_gradcheck(gc_component, gc_seed, gc_bug, std::cout) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
