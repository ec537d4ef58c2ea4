#pragma once

// The three networks built from the shared lower layers:
//
//   negation tagger   embedding -> dropout -> sentence BiLSTM -> linear -> CRF
//   sentiment (STL)   per sentence: embedding -> dropout -> sentence BiLSTM -> max
//                     over sentences: document BiLSTM -> max -> linear -> softmax
//   multi-task (MTL)  both heads over one physically shared embedding and
//                     sentence BiLSTM.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "negmtl/autodiff.hpp"
#include "negmtl/corpus.hpp"
#include "negmtl/crf.hpp"
#include "negmtl/layers.hpp"
#include "negmtl/rng.hpp"

namespace negmtl {

enum class ModelKind { kNegationTagger, kStl, kMtl };

std::string_view to_string(ModelKind kind);

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 100;
  std::size_t hidden_dim = 100;  // per direction, both levels

  bool operator==(const ModelDims&) const = default;
};

struct SharedParams {
  EmbeddingTable embedding;
  LstmParams sentence_fwd;
  LstmParams sentence_bwd;
};

struct NegationHead {
  LinearParams emission;  // [5 x 2d]
  CrfParams crf;
};

struct SentimentHead {
  LstmParams document_fwd;
  LstmParams document_bwd;
  LinearParams output;  // [2 x 2d]
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct ModelParams {
  SharedParams shared;
  std::optional<NegationHead> negation;
  std::optional<SentimentHead> sentiment;

  // Each parameter group draws from its own init stream, so an STL and an
  // MTL model built from the same seed start with identical shared and
  // sentiment weights.
  static ModelParams init(ModelKind kind, const ModelDims& dims, const RngStreams& streams);

  ModelKind kind() const;
  ModelDims dims() const;

  NamedTensors shared_parameters() const;
  NamedTensors negation_parameters() const;
  NamedTensors sentiment_parameters() const;
  NamedTensors named_parameters() const;

  // Independent copy of every tensor.
  ModelParams clone() const;
};

// Builds an empty-valued parameter set with the registry layout of `kind`.
ModelParams allocate_model(ModelKind kind, const ModelDims& dims);

using SentenceIds = std::vector<std::size_t>;
using DocumentIds = std::vector<SentenceIds>;

// Shared path for one sentence: [T x 2d] contextual features.
Tensor sentence_features(Tape& tape, const SharedParams& shared, std::span<const std::size_t> ids,
                         Mode mode, Rng& rng, double dropout_p);

// [T x 5] emission scores.
Tensor negation_forward(Tape& tape, const ModelParams& params, std::span<const std::size_t> ids,
                        Mode mode, Rng& rng, double dropout_p = 0.3);

Tensor negation_loss(Tape& tape, const ModelParams& params, std::span<const std::size_t> ids,
                     std::span<const BioTag> gold, Mode mode, Rng& rng, double dropout_p = 0.3);

std::vector<BioTag> negation_tag(const ModelParams& params, std::span<const std::size_t> ids);

// [2] logits, index 0 negative, index 1 positive.
Tensor sentiment_forward(Tape& tape, const ModelParams& params, const DocumentIds& doc, Mode mode,
                         Rng& rng, double dropout_p = 0.3);

Tensor sentiment_loss(Tape& tape, const ModelParams& params, const DocumentIds& doc, Label gold,
                      Mode mode, Rng& rng, double dropout_p = 0.3);

struct SentimentPrediction {
  Label label = Label::kPositive;
  std::array<double, kNumLabels> logits{};
};

// Argmax of the logits; an exact tie is positive.
Label label_from_logits(double negative_logit, double positive_logit);

SentimentPrediction predict_document(const ModelParams& params, const DocumentIds& doc);

}  // namespace negmtl
