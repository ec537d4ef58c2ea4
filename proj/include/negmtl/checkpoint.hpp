#pragma once

// Checkpoint file layout:
//
//   bytes 0..7   magic "NEGMTL01"
//   u64 LE       header length N
//   N bytes      UTF-8 JSON header: format_version, model_kind, config,
//                vocabulary, extra, parameters (name -> shape, byte offset,
//                in blob order)
//   rest         little-endian float32 blobs in manifest order
//
// Values are stored at 32-bit precision; loading widens them back to
// double exactly.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "negmtl/bow.hpp"
#include "negmtl/corpus.hpp"
#include "negmtl/models.hpp"
#include "negmtl/training.hpp"

namespace negmtl {

inline constexpr char kCheckpointMagic[9] = "NEGMTL01";
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string model_kind;  // tagger | stl | mtl | bow
  TrainConfig config;
  Vocabulary vocab;
  NamedTensors parameters;
  nlohmann::json extra = nlohmann::json::object();
};

Checkpoint make_checkpoint(const TrainConfig& config, const Vocabulary& vocab,
                           const ModelParams& model);
Checkpoint make_checkpoint(const TrainResult& result);
Checkpoint make_checkpoint(const BowResult& result, const TrainConfig& config);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

bool has_negation_head(const Checkpoint& ckpt);
ModelParams model_from_checkpoint(const Checkpoint& ckpt);
BowModel bow_from_checkpoint(const Checkpoint& ckpt);

// Rounds every value through float32, as saving does.
void round_to_float32(const NamedTensors& params);

}  // namespace negmtl
