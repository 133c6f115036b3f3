#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qt/mat.hpp"
#include "qt/model.hpp"

namespace qt {

// N sentence vectors with aligned ids. Vectors are kept in double so the
// text export (17 significant digits) round-trips losslessly.
struct EmbeddingCollection {
  Mat<double> vectors;            // N x D
  std::vector<std::int64_t> ids;  // aligned with rows

  int dim() const { return vectors.cols; }
  int count() const { return vectors.rows; }
};

struct Neighbor {
  std::int64_t id;
  double cosine;
};

// Encodes each sentence as [f(s) g(s)]. Row order follows the input; the
// internal batching never changes a row (padding-length invariance).
EmbeddingCollection embed_sentences(const QtModel<float>& model,
                                    const std::vector<std::vector<std::string>>& sentences,
                                    int batch_size = 64);

double cosine_similarity(const double* a, const double* b, int dim);

// Exact brute-force scan, descending cosine, ties broken by ascending id.
std::vector<Neighbor> nearest_neighbors(const EmbeddingCollection& coll,
                                        const std::vector<double>& query, int k);

// Retrieval with the composed query vC + vB - vA. A, B and C stay in the
// candidate pool.
std::vector<Neighbor> analogy_query(const EmbeddingCollection& coll,
                                    const std::vector<double>& va, const std::vector<double>& vb,
                                    const std::vector<double>& vc, int k);

std::vector<double> embedding_row(const EmbeddingCollection& coll, std::int64_t id);

// Text format: header `N D`, then one `id v1 ... vD` line per sentence.
void export_embeddings(const EmbeddingCollection& coll, std::ostream& out);
void export_embeddings_file(const EmbeddingCollection& coll, const std::string& path);
EmbeddingCollection import_embeddings(std::istream& in);
EmbeddingCollection import_embeddings_file(const std::string& path);

}  // namespace qt
