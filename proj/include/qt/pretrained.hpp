#pragma once

#include <string>

#include "qt/mat.hpp"
#include "qt/rng.hpp"
#include "qt/vocab.hpp"

namespace qt {

struct PretrainedTable {
  Mat<float> table;      // V x D, aligned with the vocabulary
  int dim = 0;
  double coverage = 0.0; // fraction of content tokens found in the file
};

// Text vector format: one line per token, `token v1 v2 ... vD`, optionally
// preceded by a `N D` header line. Vocabulary tokens absent from the file
// (including <pad> and <unk>) get U[-0.1, 0.1] rows; the pad row is zeroed.
PretrainedTable load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                           Rng& rng);
PretrainedTable read_pretrained_embeddings(std::istream& in, const Vocabulary& vocab, Rng& rng);

}  // namespace qt
