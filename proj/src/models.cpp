#include "negmtl/models.hpp"

#include <stdexcept>

namespace negmtl {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kNegationTagger: return "tagger";
    case ModelKind::kStl: return "stl";
    case ModelKind::kMtl: return "mtl";
  }
  return "?";
}

ModelParams ModelParams::init(ModelKind kind, const ModelDims& dims, const RngStreams& streams) {
  if (dims.vocab_size < 2 || dims.embedding_dim == 0 || dims.hidden_dim == 0) {
    throw std::invalid_argument("model dimensions must be positive (vocab >= 2)");
  }
  const std::size_t d = dims.hidden_dim;
  ModelParams p;
  Rng shared_rng = streams.stream("init.shared");
  p.shared.embedding = EmbeddingTable::init(dims.vocab_size, dims.embedding_dim, shared_rng);
  p.shared.sentence_fwd = LstmParams::init(dims.embedding_dim, d, shared_rng);
  p.shared.sentence_bwd = LstmParams::init(dims.embedding_dim, d, shared_rng);
  if (kind != ModelKind::kStl) {
    Rng rng = streams.stream("init.negation");
    p.negation = NegationHead{LinearParams::init(2 * d, kNumBioTags, rng),
                              CrfParams::init(kNumBioTags)};
  }
  if (kind != ModelKind::kNegationTagger) {
    Rng rng = streams.stream("init.sentiment");
    SentimentHead head;
    head.document_fwd = LstmParams::init(2 * d, d, rng);
    head.document_bwd = LstmParams::init(2 * d, d, rng);
    head.output = LinearParams::init(2 * d, kNumLabels, rng);
    p.sentiment = std::move(head);
  }
  return p;
}

ModelParams allocate_model(ModelKind kind, const ModelDims& dims) {
  return ModelParams::init(kind, dims, RngStreams(0));
}

ModelKind ModelParams::kind() const {
  if (negation && sentiment) return ModelKind::kMtl;
  if (sentiment) return ModelKind::kStl;
  return ModelKind::kNegationTagger;
}

ModelDims ModelParams::dims() const {
  return {shared.embedding.vocab_size(), shared.embedding.dim(), shared.sentence_fwd.hidden_dim()};
}

namespace {

void add_lstm(NamedTensors& out, const std::string& prefix, const LstmParams& p) {
  out.emplace_back(prefix + ".W", p.w);
  out.emplace_back(prefix + ".U", p.u);
  out.emplace_back(prefix + ".b", p.b);
}

void add_linear(NamedTensors& out, const std::string& prefix, const LinearParams& p) {
  out.emplace_back(prefix + ".W", p.w);
  out.emplace_back(prefix + ".b", p.b);
}

LstmParams clone(const LstmParams& p) {
  LstmParams c{p.w.detach(), p.u.detach(), p.b.detach()};
  c.w.set_requires_grad(true);
  c.u.set_requires_grad(true);
  c.b.set_requires_grad(true);
  return c;
}

LinearParams clone(const LinearParams& p) {
  LinearParams c{p.w.detach(), p.b.detach()};
  c.w.set_requires_grad(true);
  c.b.set_requires_grad(true);
  return c;
}

Tensor clone(const Tensor& t) {
  Tensor c = t.detach();
  c.set_requires_grad(true);
  return c;
}

}  // namespace

NamedTensors ModelParams::shared_parameters() const {
  NamedTensors out;
  out.emplace_back("shared.embedding", shared.embedding.weights);
  add_lstm(out, "shared.sentence_lstm.fwd", shared.sentence_fwd);
  add_lstm(out, "shared.sentence_lstm.bwd", shared.sentence_bwd);
  return out;
}

NamedTensors ModelParams::negation_parameters() const {
  NamedTensors out;
  if (negation) {
    add_linear(out, "negation.emission", negation->emission);
    out.emplace_back("negation.crf.transitions", negation->crf.transitions);
  }
  return out;
}

NamedTensors ModelParams::sentiment_parameters() const {
  NamedTensors out;
  if (sentiment) {
    add_lstm(out, "sentiment.document_lstm.fwd", sentiment->document_fwd);
    add_lstm(out, "sentiment.document_lstm.bwd", sentiment->document_bwd);
    add_linear(out, "sentiment.output", sentiment->output);
  }
  return out;
}

NamedTensors ModelParams::named_parameters() const {
  NamedTensors out = shared_parameters();
  for (auto& p : negation_parameters()) out.push_back(std::move(p));
  for (auto& p : sentiment_parameters()) out.push_back(std::move(p));
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams c;
  c.shared.embedding.weights = negmtl::clone(shared.embedding.weights);
  c.shared.sentence_fwd = negmtl::clone(shared.sentence_fwd);
  c.shared.sentence_bwd = negmtl::clone(shared.sentence_bwd);
  if (negation) {
    c.negation = NegationHead{negmtl::clone(negation->emission),
                              CrfParams{negmtl::clone(negation->crf.transitions)}};
  }
  if (sentiment) {
    c.sentiment = SentimentHead{negmtl::clone(sentiment->document_fwd),
                                negmtl::clone(sentiment->document_bwd),
                                negmtl::clone(sentiment->output)};
  }
  return c;
}

// ---------------------------------------------------------------------------
// Forward passes

Tensor sentence_features(Tape& tape, const SharedParams& shared, std::span<const std::size_t> ids,
                         Mode mode, Rng& rng, double dropout_p) {
  if (ids.empty()) throw std::invalid_argument("empty sentence");
  Tensor x = embed(tape, shared.embedding, ids);
  x = dropout(tape, x, dropout_p, mode, rng);
  return bilstm(tape, shared.sentence_fwd, shared.sentence_bwd, x);
}

Tensor negation_forward(Tape& tape, const ModelParams& params, std::span<const std::size_t> ids,
                        Mode mode, Rng& rng, double dropout_p) {
  if (!params.negation) throw std::logic_error("model has no negation head");
  Tensor h = sentence_features(tape, params.shared, ids, mode, rng, dropout_p);
  return linear(tape, params.negation->emission, h);
}

Tensor negation_loss(Tape& tape, const ModelParams& params, std::span<const std::size_t> ids,
                     std::span<const BioTag> gold, Mode mode, Rng& rng, double dropout_p) {
  Tensor emissions = negation_forward(tape, params, ids, mode, rng, dropout_p);
  std::vector<std::size_t> tags;
  tags.reserve(gold.size());
  for (auto t : gold) tags.push_back(static_cast<std::size_t>(t));
  return crf_nll(tape, emissions, tags, params.negation->crf);
}

std::vector<BioTag> negation_tag(const ModelParams& params, std::span<const std::size_t> ids) {
  Tape tape(false);
  Rng unused(0);
  Tensor emissions = negation_forward(tape, params, ids, Mode::kEval, unused);
  auto best = viterbi(emissions, params.negation->crf);
  std::vector<BioTag> tags;
  tags.reserve(best.tags.size());
  for (auto t : best.tags) tags.push_back(bio_tag_from_id(t));
  return tags;
}

Tensor sentiment_forward(Tape& tape, const ModelParams& params, const DocumentIds& doc, Mode mode,
                         Rng& rng, double dropout_p) {
  if (!params.sentiment) throw std::logic_error("model has no sentiment head");
  if (doc.empty()) throw std::invalid_argument("empty document");
  std::vector<Tensor> sentence_vectors;
  sentence_vectors.reserve(doc.size());
  for (const auto& ids : doc) {
    Tensor h = sentence_features(tape, params.shared, ids, mode, rng, dropout_p);
    sentence_vectors.push_back(max_over_time(tape, h));
  }
  const SentimentHead& head = *params.sentiment;
  Tensor sentences = stack_rows(tape, sentence_vectors);
  Tensor doc_states = bilstm(tape, head.document_fwd, head.document_bwd, sentences);
  return linear(tape, head.output, max_over_time(tape, doc_states));
}

Tensor sentiment_loss(Tape& tape, const ModelParams& params, const DocumentIds& doc, Label gold,
                      Mode mode, Rng& rng, double dropout_p) {
  Tensor logits = sentiment_forward(tape, params, doc, mode, rng, dropout_p);
  return softmax_cross_entropy(tape, logits, static_cast<std::size_t>(gold));
}

Label label_from_logits(double negative_logit, double positive_logit) {
  return positive_logit >= negative_logit ? Label::kPositive : Label::kNegative;
}

SentimentPrediction predict_document(const ModelParams& params, const DocumentIds& doc) {
  Tape tape(false);
  Rng unused(0);
  Tensor logits = sentiment_forward(tape, params, doc, Mode::kEval, unused);
  SentimentPrediction pred;
  pred.logits = {logits[0], logits[1]};
  pred.label = label_from_logits(logits[0], logits[1]);
  return pred;
}

}  // namespace negmtl
