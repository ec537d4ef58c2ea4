#pragma once

// Generated corpora for tests and the acceptance suite.

#include <cstdint>
#include <string>
#include <vector>

#include "negmtl/corpus.hpp"

namespace negmtl::testing {

// Each document carries one class-specific keyword per sentence; labels
// alternate so the split is balanced. Sentences are annotated with an empty
// negation list.
std::vector<Document> separable_corpus(std::size_t n, std::uint64_t seed,
                                       const std::string& prefix = "sep");

// Three sentences per document. One holds a sentiment keyword that is either
// bare, inside an annotated negation scope (label flips), or after a negation
// whose scope closes before it (label kept). The other sentences are filler,
// sometimes with their own negation.
std::vector<Document> negation_flip_corpus(std::size_t n, std::uint64_t seed,
                                           const std::string& prefix = "flip");

// Random sentence with up to three negation structures whose scopes may
// overlap, be discontinuous or precede their cue.
Sentence random_annotated_sentence(std::uint64_t seed, std::size_t max_len = 14);

}  // namespace negmtl::testing
