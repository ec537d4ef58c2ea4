#pragma once

// Subcommand implementations behind the negmtl tool. Each writes its
// artifacts into an output directory with a fixed layout:
//
//   manifest.json   effective config, seeds, input digests, tool version
//   metrics.jsonl   one object per epoch (or per C value for bow)
//   checkpoint.bin  (train) or checkpoints/seed-<n>.bin (ensemble)
//   preds/seed-<n>.jsonl, preds/ensemble.jsonl   dev predictions
//   preds/test-seed-<n>.jsonl, preds/test-ensemble.jsonl   when a test split is given
//   report.json, report.txt
//
// `predict` writes <out>.manifest.json beside its prediction file and `eval`
// writes manifest.json into its --out directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "negmtl/training.hpp"

namespace negmtl {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunOptions {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::string> mode;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
  std::filesystem::path train;
  std::filesystem::path dev;
  std::optional<std::filesystem::path> test;
  std::filesystem::path out;
};

// Config file, then --mode and the first of --seeds, then --set overrides.
TrainConfig resolve_config(const RunOptions& opts);

std::string sha256_file(const std::filesystem::path& path);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Prints the statistics table. Throws on unreadable or invalid corpora.
void cmd_stats(const std::vector<std::pair<std::string, std::filesystem::path>>& splits,
               std::ostream& out, bool as_json = false);

void cmd_train(const RunOptions& opts, std::ostream& log);

void cmd_ensemble(const RunOptions& opts, std::ostream& log);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
  bool tags = false;
};

void cmd_predict(const PredictOptions& opts, std::ostream& log);

struct EvalOptions {
  std::filesystem::path run;
  std::optional<std::filesystem::path> baseline;
  std::optional<std::filesystem::path> out;
  std::string aggregate = "ensemble";  // ensemble | sum
  // Gold corpus for scoring per-token tags found in prediction files.
  std::optional<std::filesystem::path> gold;
  std::optional<std::filesystem::path> tagged_predictions;
};

void cmd_eval(const EvalOptions& opts, std::ostream& out);

// Returns true when every check passes.
bool cmd_gradcheck(const std::string& component, std::uint64_t seed, bool inject_bug,
                   std::ostream& out);

}  // namespace negmtl
