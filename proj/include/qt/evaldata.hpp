#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qt/evalharness.hpp"

namespace qt {

// Generic task files, tab-separated:
//   classify:   label<TAB>sentence[<TAB>split]
//   pairs:      label<TAB>sentence1<TAB>sentence2[<TAB>split]
//   similarity: score<TAB>sentence1<TAB>sentence2
// split, when present, is one of train/dev/test and must cover every line.

struct ClassifyRows {
  std::vector<int> labels;
  std::optional<std::vector<SplitTag>> split;
};

struct PairRows {
  std::vector<int> labels;
  std::optional<std::vector<SplitTag>> split;
};

struct SimilarityRows {
  std::vector<double> scores;
};

ClassifyRows load_classify_tsv(const std::string& path);
PairRows load_pair_tsv(const std::string& path);
SimilarityRows load_similarity_tsv(const std::string& path);

// One line per example, space-separated class log-probabilities.
Mat<double> load_logprob_file(const std::string& path);

}  // namespace qt
