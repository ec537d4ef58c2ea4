#include "negmtl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "negmtl/crf.hpp"
#include "negmtl/layers.hpp"

namespace negmtl {

GradCheckReport grad_check(const LossFn& f, const NamedTensors& params, double h, double tol) {
  auto evaluate = [&f]() {
    Tape quiet(false);
    return f(quiet).item();
  };

  for (const auto& [name, t] : params) {
    Tensor p = t;
    p.drop_grad();
  }
  Tape tape;
  Tensor loss = f(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : params) {
    analytic.emplace_back(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.back().begin());
    Tensor p = t;
    p.drop_grad();
  }

  const double base = evaluate();
  if (evaluate() != base) throw NondeterministicLoss("grad_check: loss is not deterministic");

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k].second;
    auto values = p.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = evaluate();
      values[i] = saved - h;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic[k][i];
      const double denom = std::max({1.0, std::abs(exact), std::abs(numeric)});
      const double err = std::abs(exact - numeric) / denom;
      ++report.coordinates;
      if (err > report.max_rel_error || std::isnan(err)) {
        report.max_rel_error = std::isnan(err) ? INFINITY : err;
        report.worst_parameter = params[k].first;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

GradCheckReport grad_check(const LossFn& f, Tensor x, double h, double tol) {
  return grad_check(f, NamedTensors{{"x", x}}, h, tol);
}

// ---------------------------------------------------------------------------
// Suite

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t = uniform_tensor(std::move(shape), -scale, scale, rng);
  return t;
}

Tensor constant(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng);
  t.set_requires_grad(false);
  return t;
}

// Weighted sum with fixed random weights, so every output coordinate
// contributes a distinct gradient.
Tensor probe(Tape& tape, const Tensor& out, const Tensor& weights) {
  return sum(tape, mul(tape, out, weights));
}

// tanh whose backward rule uses 1 - y instead of 1 - y^2.
Tensor broken_tanh(Tape& tape, const Tensor& a) {
  const bool track = tape.recording() && a.requires_grad();
  Tensor out(a.shape(), track);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  if (track) {
    tape.record(out, [a, out]() mutable {
      auto g = out.grad();
      auto ga = a.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - out[i]);
    });
  }
  return out;
}

void add_check(std::vector<ComponentCheck>& out, const std::string& component,
               const std::string& name, const LossFn& f, const NamedTensors& params, double tol) {
  out.push_back({component, name, grad_check(f, params, 1e-5, tol)});
}

void layer_checks(std::vector<ComponentCheck>& out, Rng& rng, double tol, GradCheckBug bug) {
  {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({3, 4}, rng);
    Tensor w = constant({2, 4}, rng);
    add_check(out, "layers", "matmul",
              [=](Tape& t) { return probe(t, matmul(t, a, b), w); }, {{"a", a}, {"b", b}}, tol);
  }
  {
    Tensor a = random_tensor({4}, rng), b = random_tensor({4}, rng), s = random_tensor({1}, rng);
    Tensor w = constant({4}, rng);
    const bool broken = bug == GradCheckBug::kWrongTanhDerivative;
    add_check(
        out, "layers", "elementwise",
        [=](Tape& t) {
          Tensor th = broken ? broken_tanh(t, a) : tanh(t, a);
          Tensor e = add(t, mul(t, th, sigmoid(t, b)), mul(t, a, s));
          return probe(t, e, w);
        },
        {{"a", a}, {"b", b}, {"s", s}}, tol);
  }
  {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 2}, rng);
    Tensor w = constant({2, 5}, rng);
    add_check(out, "layers", "concat",
              [=](Tape& t) { return probe(t, concat(t, a, b, 1), w); }, {{"a", a}, {"b", b}}, tol);
  }
  {
    Tensor hseq = random_tensor({4, 3}, rng);
    Tensor w = constant({3}, rng);
    add_check(out, "layers", "max_over_time",
              [=](Tape& t) { return probe(t, max_over_time(t, hseq), w); }, {{"h", hseq}}, tol);
  }
  {
    Tensor logits = random_tensor({3}, rng, 2.0);
    add_check(out, "layers", "softmax_cross_entropy",
              [=](Tape& t) { return softmax_cross_entropy(t, logits, 1); }, {{"logits", logits}},
              tol);
  }
  {
    EmbeddingTable table = EmbeddingTable::init(5, 3, rng);
    const std::vector<std::size_t> ids = {1, 3, 2, 3};
    Tensor w = constant({4, 3}, rng);
    add_check(out, "layers", "embed",
              [=](Tape& t) { return probe(t, embed(t, table, ids), w); },
              {{"embedding", table.weights}}, tol);
  }
  {
    LinearParams lin = LinearParams::init(4, 3, rng);
    for (double& v : lin.b.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    Tensor x = random_tensor({4}, rng);
    Tensor w = constant({3}, rng);
    add_check(out, "layers", "linear",
              [=](Tape& t) { return probe(t, linear(t, lin, x), w); },
              {{"W", lin.w}, {"b", lin.b}, {"x", x}}, tol);
  }
  {
    LstmParams p = LstmParams::init(3, 2, rng);
    std::vector<Tensor> xs = {random_tensor({3}, rng), random_tensor({3}, rng),
                              random_tensor({3}, rng)};
    NamedTensors params = {{"W", p.w}, {"U", p.u}, {"b", p.b}};
    for (std::size_t i = 0; i < xs.size(); ++i) params.emplace_back("x" + std::to_string(i), xs[i]);
    add_check(
        out, "layers", "lstm_step x3",
        [=](Tape& t) {
          LstmState s = lstm_zero_state(2);
          for (const auto& x : xs) s = lstm_step(t, p, x, s);
          return sum(t, s.h);
        },
        params, tol);
  }
  {
    LstmParams f = LstmParams::init(3, 2, rng), b = LstmParams::init(3, 2, rng);
    Tensor xs = random_tensor({3, 3}, rng);
    Tensor w = constant({3, 4}, rng);
    add_check(out, "layers", "bilstm",
              [=](Tape& t) { return probe(t, bilstm(t, f, b, xs), w); },
              {{"fwd.W", f.w}, {"fwd.U", f.u}, {"fwd.b", f.b}, {"bwd.W", b.w}, {"bwd.U", b.u},
               {"bwd.b", b.b}, {"xs", xs}},
              tol);
  }
  {
    Tensor x = random_tensor({2, 4}, rng);
    Tensor w = constant({2, 4}, rng);
    const std::uint64_t mask_seed = rng();
    add_check(
        out, "layers", "dropout",
        [=](Tape& t) {
          Rng r(mask_seed);
          return probe(t, dropout(t, x, 0.3, Mode::kTrain, r), w);
        },
        {{"x", x}}, tol);
  }
}

void crf_checks(std::vector<ComponentCheck>& out, Rng& rng, double tol) {
  Tensor emissions = random_tensor({4, kNumBioTags}, rng, 2.0);
  CrfParams crf = CrfParams::init(kNumBioTags);
  for (double& v : crf.transitions.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const std::vector<std::size_t> gold = {0, 1, 3, 4};
  add_check(out, "crf", "crf_nll",
            [=](Tape& t) { return crf_nll(t, emissions, gold, crf); },
            {{"emissions", emissions}, {"transitions", crf.transitions}}, tol);
}

ModelParams toy_model(ModelKind kind, Rng& rng) {
  ModelParams m = ModelParams::init(kind, {7, 4, 3}, RngStreams(rng()));
  // Non-zero biases and transitions exercise every gradient path.
  for (auto& [name, t] : m.named_parameters()) {
    if (name.ends_with(".b") || name.ends_with("transitions")) {
      Tensor p = t;
      for (double& v : p.values()) v += std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    }
  }
  return m;
}

void negation_checks(std::vector<ComponentCheck>& out, Rng& rng, double tol) {
  ModelParams m = toy_model(ModelKind::kNegationTagger, rng);
  const std::vector<std::size_t> ids = {2, 5, 3, 6};
  const std::vector<BioTag> gold = {BioTag::kO, BioTag::kBCue, BioTag::kBScope, BioTag::kIScope};
  const std::uint64_t dropout_seed = rng();
  add_check(
      out, "negation", "negation loss",
      [=](Tape& t) {
        Rng r(dropout_seed);
        return negation_loss(t, m, ids, gold, Mode::kTrain, r, 0.3);
      },
      m.named_parameters(), tol);
}

void sentiment_checks(std::vector<ComponentCheck>& out, Rng& rng, double tol) {
  ModelParams m = toy_model(ModelKind::kStl, rng);
  const DocumentIds doc = {{2, 5, 3, 6}, {4, 2}, {6, 1, 3}};
  const std::uint64_t dropout_seed = rng();
  add_check(
      out, "sentiment", "sentiment loss",
      [=](Tape& t) {
        Rng r(dropout_seed);
        return sentiment_loss(t, m, doc, Label::kPositive, Mode::kTrain, r, 0.3);
      },
      m.named_parameters(), tol);
}

}  // namespace

std::vector<ComponentCheck> run_gradcheck_suite(const std::string& component, std::uint64_t seed,
                                                double tol, GradCheckBug bug) {
  static const std::vector<std::string> kComponents = {"layers", "crf", "negation", "sentiment"};
  if (component != "all" &&
      std::find(kComponents.begin(), kComponents.end(), component) == kComponents.end()) {
    throw std::invalid_argument("unknown gradcheck component '" + component +
                                "' (expected all|layers|crf|negation|sentiment)");
  }
  std::vector<ComponentCheck> out;
  RngStreams streams(seed);
  auto wants = [&](const char* c) { return component == "all" || component == c; };
  if (wants("layers")) {
    Rng rng = streams.stream("gradcheck.layers");
    layer_checks(out, rng, tol, bug);
  }
  if (wants("crf")) {
    Rng rng = streams.stream("gradcheck.crf");
    crf_checks(out, rng, tol);
  }
  if (wants("negation")) {
    Rng rng = streams.stream("gradcheck.negation");
    negation_checks(out, rng, tol);
  }
  if (wants("sentiment")) {
    Rng rng = streams.stream("gradcheck.sentiment");
    sentiment_checks(out, rng, tol);
  }
  return out;
}

}  // namespace negmtl
