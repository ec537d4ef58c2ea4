#pragma once

// Annotated review corpora: documents with a binary sentiment label whose
// sentences carry negation structures (cue tokens plus scope tokens).

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace negmtl {

// Tag ids are stable: they index the CRF label dimension.
enum class BioTag : std::size_t { kO = 0, kBCue = 1, kICue = 2, kBScope = 3, kIScope = 4 };
inline constexpr std::size_t kNumBioTags = 5;

std::string_view to_string(BioTag tag);
BioTag bio_tag_from_string(std::string_view name);
BioTag bio_tag_from_id(std::size_t id);

// Class 0 is negative, class 1 is positive.
enum class Label : std::size_t { kNegative = 0, kPositive = 1 };
inline constexpr std::size_t kNumLabels = 2;

std::string_view to_string(Label label);
Label label_from_string(std::string_view name);

struct NegationStructure {
  std::set<std::size_t> cue;
  std::set<std::size_t> scope;

  bool operator==(const NegationStructure&) const = default;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<NegationStructure> negations;
  // False when the record carried no "negations" field at all, as opposed
  // to an annotated sentence with zero structures.
  bool negation_annotated = true;
};

struct Document {
  std::string id;
  std::string domain;
  Label label = Label::kNegative;
  std::vector<Sentence> sentences;
};

// Line-numbered failure while reading a corpus file.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A record that parsed but breaks a corpus invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& document_id, const std::string& what);
  const std::string& document_id() const { return document_id_; }

 private:
  std::string document_id_;
};

// Throws ValidationError describing the first broken invariant.
void validate(const Document& doc);

Document document_from_json(const nlohmann::json& record);
nlohmann::json document_to_json(const Document& doc);

// One JSON document per line. Blank lines are skipped; duplicate ids are
// rejected.
std::vector<Document> parse_corpus(std::istream& in);
std::vector<Document> parse_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const std::vector<Document>& docs);
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);

// Union of all structures in a sentence. A token that is a cue anywhere is
// never also a scope token.
struct FlatNegation {
  std::set<std::size_t> cue;
  std::set<std::size_t> scope;

  bool operator==(const FlatNegation&) const = default;
};

FlatNegation flatten(const Sentence& sentence);
std::vector<BioTag> to_bio(const Sentence& sentence);
std::vector<BioTag> to_bio(const FlatNegation& flat, std::size_t length);
// Stray I-X tags with no preceding X tag are read as B-X.
FlatNegation from_bio(const std::vector<BioTag>& tags);

class Vocabulary {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnknownId = 1;

  Vocabulary();
  explicit Vocabulary(bool lowercase);

  std::size_t size() const { return tokens_.size(); }
  bool lowercase() const { return lowercase_; }
  std::size_t lookup(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  bool contains(std::string_view token) const;
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::vector<std::size_t>> encode(const Document& doc) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  // Appends a new token; used by builders.
  std::size_t add(const std::string& token);

  bool operator==(const Vocabulary& other) const {
    return lowercase_ == other.lowercase_ && tokens_ == other.tokens_;
  }

 private:
  std::string normalize(std::string_view token) const;

  bool lowercase_ = false;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Tokens with count >= min_count, ordered by descending frequency then
// lexicographically, receive ids starting at 2.
Vocabulary build_vocab(const std::vector<Document>& train_docs, std::size_t min_count = 1,
                       bool lowercase = false);

struct SplitStats {
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t structures = 0;
  std::array<std::size_t, kNumLabels> documents_per_class{};
  std::array<std::size_t, kNumLabels> structures_per_class{};

  bool operator==(const SplitStats&) const = default;
};

struct CorpusStats {
  // Split name -> counts, in the order the splits were given.
  std::vector<std::pair<std::string, SplitStats>> splits;

  const SplitStats& at(std::string_view name) const;
};

SplitStats split_stats(const std::vector<Document>& docs);
CorpusStats corpus_stats(
    const std::vector<std::pair<std::string, const std::vector<Document>*>>& splits);

std::size_t count_structures(const std::vector<Document>& docs);

}  // namespace negmtl
