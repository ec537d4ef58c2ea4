#include "negmtl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace negmtl {

namespace {

constexpr std::array<std::string_view, kNumBioTags> kTagNames = {"O", "B-CUE", "I-CUE", "B-SCOPE",
                                                                 "I-SCOPE"};

}  // namespace

std::string_view to_string(BioTag tag) { return kTagNames.at(static_cast<std::size_t>(tag)); }

BioTag bio_tag_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kTagNames.size(); ++i) {
    if (kTagNames[i] == name) return static_cast<BioTag>(i);
  }
  throw std::invalid_argument("unknown BIO tag '" + std::string(name) + "'");
}

BioTag bio_tag_from_id(std::size_t id) {
  if (id >= kNumBioTags) throw std::out_of_range("BIO tag id " + std::to_string(id));
  return static_cast<BioTag>(id);
}

std::string_view to_string(Label label) {
  return label == Label::kPositive ? "positive" : "negative";
}

Label label_from_string(std::string_view name) {
  if (name == "positive") return Label::kPositive;
  if (name == "negative") return Label::kNegative;
  throw std::invalid_argument("unknown sentiment label '" + std::string(name) + "'");
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

ValidationError::ValidationError(const std::string& document_id, const std::string& what)
    : std::runtime_error("document '" + document_id + "': " + what), document_id_(document_id) {}

// ---------------------------------------------------------------------------
// Validation and JSON

void validate(const Document& doc) {
  if (doc.id.empty()) throw ValidationError(doc.id, "empty id");
  if (doc.sentences.empty()) throw ValidationError(doc.id, "no sentences");
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const Sentence& sent = doc.sentences[s];
    const std::string where = "sentence " + std::to_string(s);
    if (sent.tokens.empty()) throw ValidationError(doc.id, where + " has no tokens");
    for (std::size_t n = 0; n < sent.negations.size(); ++n) {
      const NegationStructure& neg = sent.negations[n];
      const std::string which = where + " negation " + std::to_string(n);
      if (neg.cue.empty()) throw ValidationError(doc.id, which + " has no cue");
      auto check = [&](const std::set<std::size_t>& idx, const char* kind) {
        if (!idx.empty() && *idx.rbegin() >= sent.tokens.size()) {
          throw ValidationError(doc.id, which + " " + kind + " index " +
                                            std::to_string(*idx.rbegin()) +
                                            " out of range for " +
                                            std::to_string(sent.tokens.size()) + " tokens");
        }
      };
      check(neg.cue, "cue");
      check(neg.scope, "scope");
      for (auto i : neg.cue) {
        if (neg.scope.count(i)) {
          throw ValidationError(doc.id, which + " token " + std::to_string(i) +
                                            " is both cue and scope");
        }
      }
    }
  }
}

namespace {

std::set<std::size_t> index_set(const nlohmann::json& arr) {
  std::set<std::size_t> out;
  for (const auto& v : arr) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw std::invalid_argument("token index must be a non-negative integer, got " + v.dump());
    }
    out.insert(v.get<std::size_t>());
  }
  return out;
}

}  // namespace

Document document_from_json(const nlohmann::json& record) {
  Document doc;
  doc.id = record.at("id").get<std::string>();
  doc.domain = record.at("domain").get<std::string>();
  doc.label = label_from_string(record.at("label").get<std::string>());
  for (const auto& js : record.at("sentences")) {
    Sentence sent;
    sent.tokens = js.at("tokens").get<std::vector<std::string>>();
    sent.negation_annotated = js.contains("negations");
    if (sent.negation_annotated) {
      for (const auto& jn : js.at("negations")) {
        NegationStructure neg;
        neg.cue = index_set(jn.at("cue"));
        neg.scope = index_set(jn.value("scope", nlohmann::json::array()));
        sent.negations.push_back(std::move(neg));
      }
    }
    doc.sentences.push_back(std::move(sent));
  }
  return doc;
}

nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json sentences = nlohmann::json::array();
  for (const auto& sent : doc.sentences) {
    nlohmann::json negs = nlohmann::json::array();
    for (const auto& neg : sent.negations) {
      negs.push_back({{"cue", neg.cue}, {"scope", neg.scope}});
    }
    nlohmann::json js = {{"tokens", sent.tokens}};
    if (sent.negation_annotated) js["negations"] = negs;
    sentences.push_back(std::move(js));
  }
  return {{"id", doc.id},
          {"domain", doc.domain},
          {"label", std::string(to_string(doc.label))},
          {"sentences", sentences}};
}

std::vector<Document> parse_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    Document doc;
    try {
      doc = document_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
    validate(doc);
    if (!seen.insert(doc.id).second) throw ValidationError(doc.id, "duplicate document id");
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> parse_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

void write_corpus(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& doc : docs) out << document_to_json(doc).dump() << '\n';
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file " + path.string());
  write_corpus(out, docs);
}

// ---------------------------------------------------------------------------
// BIO encoding

FlatNegation flatten(const Sentence& sentence) {
  FlatNegation flat;
  for (const auto& neg : sentence.negations) flat.cue.insert(neg.cue.begin(), neg.cue.end());
  for (const auto& neg : sentence.negations) {
    for (auto i : neg.scope) {
      if (!flat.cue.count(i)) flat.scope.insert(i);
    }
  }
  return flat;
}

std::vector<BioTag> to_bio(const FlatNegation& flat, std::size_t length) {
  std::vector<BioTag> tags(length, BioTag::kO);
  for (auto i : flat.scope) {
    tags.at(i) = (i > 0 && flat.scope.count(i - 1)) ? BioTag::kIScope : BioTag::kBScope;
  }
  for (auto i : flat.cue) {
    tags.at(i) = (i > 0 && flat.cue.count(i - 1)) ? BioTag::kICue : BioTag::kBCue;
  }
  return tags;
}

std::vector<BioTag> to_bio(const Sentence& sentence) {
  return to_bio(flatten(sentence), sentence.tokens.size());
}

FlatNegation from_bio(const std::vector<BioTag>& tags) {
  // Every B or I token belongs to its type's set; the B/I distinction only
  // matters for span boundaries, which sets do not carry. A stray I-X is
  // therefore equivalent to B-X.
  FlatNegation flat;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case BioTag::kBCue:
      case BioTag::kICue: flat.cue.insert(i); break;
      case BioTag::kBScope:
      case BioTag::kIScope: flat.scope.insert(i); break;
      case BioTag::kO: break;
    }
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() : Vocabulary(false) {}

Vocabulary::Vocabulary(bool lowercase) : lowercase_(lowercase) {
  tokens_ = {"<pad>", "<unk>"};
}

std::string Vocabulary::normalize(std::string_view token) const {
  std::string out(token);
  if (lowercase_) {
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  return out;
}

std::size_t Vocabulary::lookup(std::string_view token) const {
  auto it = ids_.find(normalize(token));
  return it == ids_.end() ? kUnknownId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(normalize(token)) > 0;
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

std::vector<std::vector<std::size_t>> Vocabulary::encode(const Document& doc) const {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) out.push_back(encode(s.tokens));
  return out;
}

std::size_t Vocabulary::add(const std::string& token) {
  std::string key = normalize(token);
  auto [it, inserted] = ids_.emplace(key, tokens_.size());
  if (inserted) tokens_.push_back(std::move(key));
  return it->second;
}

nlohmann::json Vocabulary::to_json() const {
  return {{"lowercase", lowercase_},
          {"tokens", std::vector<std::string>(tokens_.begin() + 2, tokens_.end())}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v(j.at("lowercase").get<bool>());
  for (const auto& t : j.at("tokens")) v.add(t.get<std::string>());
  return v;
}

Vocabulary build_vocab(const std::vector<Document>& train_docs, std::size_t min_count,
                       bool lowercase) {
  if (train_docs.empty()) throw std::invalid_argument("build_vocab: empty training corpus");
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  Vocabulary vocab(lowercase);
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : train_docs) {
    for (const auto& sent : doc.sentences) {
      for (const auto& tok : sent.tokens) {
        std::string key = tok;
        if (lowercase) {
          std::transform(key.begin(), key.end(), key.begin(),
                         [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        }
        ++counts[key];
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : ordered) {
    if (n >= min_count) vocab.add(tok);
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Statistics

std::size_t count_structures(const std::vector<Document>& docs) {
  std::size_t n = 0;
  for (const auto& d : docs)
    for (const auto& s : d.sentences) n += s.negations.size();
  return n;
}

SplitStats split_stats(const std::vector<Document>& docs) {
  SplitStats st;
  for (const auto& d : docs) {
    const auto cls = static_cast<std::size_t>(d.label);
    ++st.documents;
    ++st.documents_per_class[cls];
    st.sentences += d.sentences.size();
    for (const auto& s : d.sentences) {
      st.structures += s.negations.size();
      st.structures_per_class[cls] += s.negations.size();
    }
  }
  return st;
}

CorpusStats corpus_stats(
    const std::vector<std::pair<std::string, const std::vector<Document>*>>& splits) {
  CorpusStats out;
  for (const auto& [name, docs] : splits) {
    out.splits.emplace_back(name, docs ? split_stats(*docs) : SplitStats{});
  }
  return out;
}

const SplitStats& CorpusStats::at(std::string_view name) const {
  for (const auto& [n, st] : splits) {
    if (n == name) return st;
  }
  throw std::out_of_range("no split named '" + std::string(name) + "'");
}

}  // namespace negmtl
