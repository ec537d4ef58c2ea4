#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "negmtl/corpus.hpp"
#include "negmtl/rng.hpp"
#include "synthetic.hpp"

using namespace negmtl;

namespace {

std::vector<BioTag> tags(std::initializer_list<const char*> names) {
  std::vector<BioTag> out;
  for (const char* n : names) out.push_back(bio_tag_from_string(n));
  return out;
}

Sentence sentence(std::size_t n, std::vector<NegationStructure> negs = {}) {
  Sentence s;
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back("w" + std::to_string(i));
  s.negations = std::move(negs);
  return s;
}

const char* kTwoSentenceDoc =
    R"({"id":"d1","domain":"hotels","label":"negative","sentences":[)"
    R"({"tokens":["no","me","gustó"],"negations":[{"cue":[0],"scope":[1,2]}]},)"
    R"({"tokens":["malo","."],"negations":[]}]})";

}  // namespace

TEST(ParseCorpus, SingleDocument) {
  std::istringstream in(std::string(kTwoSentenceDoc) + "\n");
  const auto docs = parse_corpus(in);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].label, Label::kNegative);
  EXPECT_EQ(docs[0].sentences.size(), 2u);
  EXPECT_EQ(docs[0].sentences[0].negations[0].scope, (std::set<std::size_t>{1, 2}));
}

TEST(ParseCorpus, EmptyFile) {
  std::istringstream in("");
  EXPECT_TRUE(parse_corpus(in).empty());
}

TEST(ParseCorpus, ScopeIndexAtSentenceLengthIsRejected) {
  std::istringstream in(
      R"({"id":"x","domain":"cars","label":"positive","sentences":[{"tokens":["a","b"],"negations":[{"cue":[0],"scope":[2]}]}]})");
  EXPECT_THROW(parse_corpus(in), ValidationError);
}

TEST(ParseCorpus, MalformedLineReportsLineNumber) {
  std::istringstream in(std::string(kTwoSentenceDoc) + "\n{not json\n");
  try {
    parse_corpus(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseCorpus, RejectsBadLabelEmptyCueAndDuplicateIds) {
  std::istringstream bad_label(
      R"({"id":"x","domain":"cars","label":"neutral","sentences":[{"tokens":["a"]}]})");
  EXPECT_ANY_THROW(parse_corpus(bad_label));
  std::istringstream empty_cue(
      R"({"id":"x","domain":"cars","label":"positive","sentences":[{"tokens":["a"],"negations":[{"cue":[],"scope":[0]}]}]})");
  EXPECT_THROW(parse_corpus(empty_cue), ValidationError);
  std::istringstream dup(std::string(kTwoSentenceDoc) + "\n" + kTwoSentenceDoc + "\n");
  EXPECT_ANY_THROW(parse_corpus(dup));
}

TEST(ParseCorpus, WriteThenParseRoundTrips) {
  const auto docs = negmtl::testing::negation_flip_corpus(12, 3);
  std::stringstream buf;
  write_corpus(buf, docs);
  const auto back = parse_corpus(buf);
  ASSERT_EQ(back.size(), docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    EXPECT_EQ(document_to_json(back[i]), document_to_json(docs[i]));
  }
}

TEST(ToBio, SpanishHotelExample) {
  Sentence s;
  s.tokens = {"El", "hotel", "está", "situado", "en", "la", "puerta", "de", "toledo", ",",
              "no", "está", "lejos", "del", "centro", "."};
  s.negations.push_back({{10}, {11, 12, 13, 14}});
  EXPECT_EQ(to_bio(s), tags({"O", "O", "O", "O", "O", "O", "O", "O", "O", "O", "B-CUE", "B-SCOPE",
                             "I-SCOPE", "I-SCOPE", "I-SCOPE", "O"}));
}

TEST(ToBio, NoNegationsIsAllO) {
  EXPECT_EQ(to_bio(sentence(4)), std::vector<BioTag>(4, BioTag::kO));
}

TEST(ToBio, OverlappingScopesMerge) {
  Sentence s = sentence(6, {{{0}, {2, 3}}, {{1}, {3, 4}}});
  const auto t = to_bio(s);
  EXPECT_EQ(t[2], BioTag::kBScope);
  EXPECT_EQ(t[3], BioTag::kIScope);
  EXPECT_EQ(t[4], BioTag::kIScope);
}

TEST(ToBio, CueWinsOverScope) {
  Sentence s = sentence(4, {{{1}, {0, 2}}, {{3}, {1}}});
  const auto t = to_bio(s);
  EXPECT_EQ(t, tags({"B-SCOPE", "B-CUE", "B-SCOPE", "B-CUE"}));
}

TEST(FromBio, Examples) {
  const auto a = from_bio(tags({"O", "B-CUE", "B-SCOPE", "I-SCOPE"}));
  EXPECT_EQ(a.cue, (std::set<std::size_t>{1}));
  EXPECT_EQ(a.scope, (std::set<std::size_t>{2, 3}));
  const auto b = from_bio(tags({"O", "I-SCOPE", "O"}));
  EXPECT_EQ(b.scope, (std::set<std::size_t>{1}));
  EXPECT_TRUE(b.cue.empty());
  const auto c = from_bio(tags({"O", "O"}));
  EXPECT_TRUE(c.cue.empty() && c.scope.empty());
}

TEST(Bio, RoundTripAndPermutationInvarianceOnRandomSentences) {
  std::mt19937_64 shuffler(17);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Sentence s = negmtl::testing::random_annotated_sentence(seed);
    const FlatNegation flat = flatten(s);
    EXPECT_EQ(from_bio(to_bio(s)), flat);
    std::shuffle(s.negations.begin(), s.negations.end(), shuffler);
    EXPECT_EQ(flatten(s), flat);
    EXPECT_EQ(to_bio(flat, s.tokens.size()), to_bio(s));
  }
}

TEST(Vocabulary, FrequencyThenLexicographicIds) {
  Document d;
  d.id = "v";
  d.domain = "books";
  d.sentences.push_back(Sentence{{"a", "b", "a"}, {}, true});
  const Vocabulary v = build_vocab({d});
  EXPECT_EQ(v.lookup("a"), 2u);
  EXPECT_EQ(v.lookup("b"), 3u);
  EXPECT_EQ(v.lookup("zzz"), Vocabulary::kUnknownId);
  const Vocabulary v2 = build_vocab({d}, 2);
  EXPECT_TRUE(v2.contains("a"));
  EXPECT_FALSE(v2.contains("b"));
  EXPECT_EQ(v2.size(), 3u);
}

TEST(Vocabulary, JsonRoundTripAndLowercase) {
  Document d;
  d.id = "v";
  d.domain = "books";
  d.sentences.push_back(Sentence{{"Hotel", "hotel", "Bueno"}, {}, true});
  const Vocabulary v = build_vocab({d}, 1, true);
  EXPECT_EQ(v.lookup("HOTEL"), 2u);
  EXPECT_EQ(Vocabulary::from_json(v.to_json()), v);
}

TEST(Stats, SyntheticThreeDocuments) {
  std::vector<Document> docs(3);
  for (std::size_t i = 0; i < 3; ++i) {
    docs[i].id = "s" + std::to_string(i);
    docs[i].domain = "music";
    docs[i].label = i < 2 ? Label::kPositive : Label::kNegative;
  }
  docs[0].sentences.push_back(sentence(4, {{{0}, {1}}, {{2}, {3}}}));
  docs[1].sentences.push_back(sentence(3, {{{1}, {}}}));
  docs[2].sentences.push_back(sentence(5, {{{0}, {1, 2}}, {{3}, {4}}}));
  docs[2].sentences.push_back(sentence(2));
  const SplitStats st = split_stats(docs);
  EXPECT_EQ(st.documents, 3u);
  EXPECT_EQ(st.sentences, 4u);
  EXPECT_EQ(st.structures, 5u);
  EXPECT_EQ(st.documents_per_class[1], 2u);
  EXPECT_EQ(st.structures_per_class[0], 2u);
  EXPECT_EQ(st.structures_per_class[1], 3u);
}

TEST(Stats, EmptySplitIsZero) {
  EXPECT_EQ(split_stats({}), SplitStats{});
}
