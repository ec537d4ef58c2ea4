#include "negmtl/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <tuple>
#include <vector>

namespace negmtl {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

ModelKind kind_from_string(const std::string& name) {
  if (name == "tagger") return ModelKind::kNegationTagger;
  if (name == "stl") return ModelKind::kStl;
  if (name == "mtl") return ModelKind::kMtl;
  throw CheckpointError("checkpoint holds a '" + name + "' model, not a neural model");
}

}  // namespace

Checkpoint make_checkpoint(const TrainConfig& config, const Vocabulary& vocab,
                           const ModelParams& model) {
  Checkpoint ckpt;
  ckpt.model_kind = std::string(to_string(model.kind()));
  ckpt.config = config;
  ckpt.vocab = vocab;
  for (const auto& [name, t] : model.named_parameters()) ckpt.parameters.emplace_back(name, t.detach());
  return ckpt;
}

Checkpoint make_checkpoint(const TrainResult& result) {
  Checkpoint ckpt = make_checkpoint(result.config, result.vocab, result.best_model);
  ckpt.extra = {{"best_epoch", result.best_epoch}, {"best_dev_accuracy", result.best_dev_accuracy}};
  return ckpt;
}

Checkpoint make_checkpoint(const BowResult& result, const TrainConfig& config) {
  Checkpoint ckpt;
  ckpt.model_kind = "bow";
  ckpt.config = config;
  ckpt.vocab = result.model.vocab;
  ckpt.parameters.emplace_back("bow.weights", Tensor::vector(result.model.weights));
  ckpt.parameters.emplace_back("bow.bias", Tensor::scalar(result.model.bias));
  ckpt.extra = {{"chosen_c", result.chosen_c}, {"dev_accuracy", result.dev_accuracy}};
  return ckpt;
}

namespace {

nlohmann::ordered_json ordered(const nlohmann::json& j) {
  return nlohmann::ordered_json::parse(j.dump());
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.parameters) {
    if (manifest.contains(name)) throw CheckpointError("duplicate parameter name '" + name + "'");
    manifest[name] = {{"shape", t.shape()}, {"offset", offset}};
    offset += 4 * t.size();
  }
  nlohmann::ordered_json header = {{"format_version", ckpt.version},
                                   {"model_kind", ckpt.model_kind},
                                   {"config", ordered(ckpt.config.to_json())},
                                   {"vocabulary", ordered(ckpt.vocab.to_json())},
                                   {"extra", ordered(ckpt.extra)},
                                   {"parameters", manifest}};
  const std::string header_text = header.dump();

  std::string bytes(kCheckpointMagic, 8);
  put_u64(bytes, header_text.size());
  bytes += header_text;
  bytes.reserve(bytes.size() + offset);
  for (const auto& [name, t] : ckpt.parameters) {
    for (double v : t.values()) put_f32(bytes, static_cast<float>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw CheckpointError("checkpoint " + path.string() + " is truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw CheckpointError("checkpoint " + path.string() + " has a bad magic number");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - 16) {
    throw CheckpointError("checkpoint " + path.string() + " is truncated (header)");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  try {
    ckpt.version = header.at("format_version").get<std::uint32_t>();
    if (ckpt.version != kCheckpointVersion) {
      throw CheckpointError("checkpoint format version " + std::to_string(ckpt.version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    ckpt.model_kind = header.at("model_kind").get<std::string>();
    ckpt.config = TrainConfig::from_json(header.at("config"));
    ckpt.vocab = Vocabulary::from_json(header.at("vocabulary"));
    ckpt.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint header is malformed: " + std::string(e.what()));
  }

  // nlohmann::json sorts keys; recover blob order from the offsets.
  std::vector<std::tuple<std::uint64_t, std::string, Shape>> entries;
  for (const auto& [name, entry] : header.at("parameters").items()) {
    entries.emplace_back(entry.at("offset").get<std::uint64_t>(), name,
                         entry.at("shape").get<Shape>());
  }
  std::sort(entries.begin(), entries.end());
  const unsigned char* blob = bytes.data() + 16 + header_len;
  const std::uint64_t blob_len = bytes.size() - 16 - header_len;
  for (const auto& [offset, name, shape] : entries) {
    const std::uint64_t n = shape_size(shape);
    if (offset + 4 * n > blob_len) {
      throw CheckpointError("checkpoint " + path.string() + " is truncated (parameter '" + name +
                            "')");
    }
    std::vector<double> values(n);
    for (std::uint64_t i = 0; i < n; ++i) values[i] = get_f32(blob + offset + 4 * i);
    ckpt.parameters.emplace_back(name, Tensor(shape, std::move(values)));
  }
  return ckpt;
}

bool has_negation_head(const Checkpoint& ckpt) {
  return ckpt.model_kind == "mtl" || ckpt.model_kind == "tagger";
}

ModelParams model_from_checkpoint(const Checkpoint& ckpt) {
  const ModelKind kind = kind_from_string(ckpt.model_kind);
  ModelParams model = allocate_model(
      kind, {ckpt.vocab.size(), ckpt.config.embedding_dim, ckpt.config.hidden_dim});
  const NamedTensors expected = model.named_parameters();
  if (expected.size() != ckpt.parameters.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.parameters.size()) +
                          " parameters, a " + ckpt.model_kind + " model needs " +
                          std::to_string(expected.size()));
  }
  for (const auto& [name, target] : expected) {
    auto it = std::find_if(ckpt.parameters.begin(), ckpt.parameters.end(),
                           [&](const auto& p) { return p.first == name; });
    if (it == ckpt.parameters.end()) throw CheckpointError("checkpoint lacks parameter '" + name + "'");
    if (it->second.shape() != target.shape()) {
      throw CheckpointError("parameter '" + name + "' has shape " +
                            shape_to_string(it->second.shape()) + ", expected " +
                            shape_to_string(target.shape()));
    }
    Tensor dst = target;
    std::copy(it->second.values().begin(), it->second.values().end(), dst.values().begin());
  }
  return model;
}

BowModel bow_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "bow") throw CheckpointError("checkpoint does not hold a bow model");
  BowModel model;
  model.vocab = ckpt.vocab;
  for (const auto& [name, t] : ckpt.parameters) {
    if (name == "bow.weights") model.weights.assign(t.values().begin(), t.values().end());
    if (name == "bow.bias") model.bias = t.item();
  }
  if (model.weights.size() != model.vocab.size()) {
    throw CheckpointError("bow weights do not match the vocabulary size");
  }
  model.c = ckpt.extra.value("chosen_c", 1.0);
  return model;
}

void round_to_float32(const NamedTensors& params) {
  for (const auto& [name, t] : params) {
    Tensor p = t;
    for (double& v : p.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace negmtl
