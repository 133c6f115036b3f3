#include "qt/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qt/corpus.hpp"
#include "qt/errors.hpp"

namespace qt {

EmbeddingCollection embed_sentences(const QtModel<float>& model,
                                    const std::vector<std::vector<std::string>>& sentences,
                                    int batch_size) {
  if (sentences.empty()) throw InputError("embed_sentences: no sentences");
  if (batch_size < 1) throw ValueError("embed_sentences: batch size must be >= 1");

  std::vector<std::vector<std::int32_t>> encoded;
  encoded.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].empty())
      throw InputError("embed_sentences: sentence " + std::to_string(i) + " is empty");
    encoded.push_back(encode_sentence(model.vocab, sentences[i]));
  }

  EmbeddingCollection coll;
  coll.vectors = Mat<double>(static_cast<int>(sentences.size()), model.embed_dim());
  coll.ids.resize(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) coll.ids[i] = static_cast<std::int64_t>(i);

  for (std::size_t begin = 0; begin < encoded.size(); begin += batch_size) {
    const std::size_t end = std::min(encoded.size(), begin + batch_size);
    std::vector<std::vector<std::int32_t>> chunk(encoded.begin() + begin, encoded.begin() + end);
    std::vector<std::int64_t> idx(end - begin);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int64_t>(begin + i);
    const Minibatch batch = make_minibatch(chunk, idx);
    const Mat<float> f_out = model.f->forward(batch);
    const Mat<float> g_out = model.g->forward(batch);
    for (int i = 0; i < batch.batch_size; ++i) {
      double* row = coll.vectors.row(static_cast<int>(begin) + i);
      for (int j = 0; j < f_out.cols; ++j) row[j] = static_cast<double>(f_out.at(i, j));
      for (int j = 0; j < g_out.cols; ++j)
        row[f_out.cols + j] = static_cast<double>(g_out.at(i, j));
    }
  }
  return coll;
}

double cosine_similarity(const double* a, const double* b, int dim) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int j = 0; j < dim; ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0)
    throw DegenerateError("cosine_similarity: zero-norm vector has no direction");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingCollection& coll,
                                        const std::vector<double>& query, int k) {
  if (k < 1) throw ValueError("nearest_neighbors: k must be >= 1");
  if (static_cast<int>(query.size()) != coll.dim())
    throw ShapeError("nearest_neighbors: query dim " + std::to_string(query.size()) +
                     " != collection dim " + std::to_string(coll.dim()));
  std::vector<Neighbor> scored;
  scored.reserve(coll.count());
  for (int i = 0; i < coll.count(); ++i)
    scored.push_back({coll.ids[i], cosine_similarity(query.data(), coll.vectors.row(i), coll.dim())});
  std::sort(scored.begin(), scored.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.cosine != b.cosine) return a.cosine > b.cosine;
    return a.id < b.id;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);
  return scored;
}

std::vector<Neighbor> analogy_query(const EmbeddingCollection& coll,
                                    const std::vector<double>& va, const std::vector<double>& vb,
                                    const std::vector<double>& vc, int k) {
  if (va.size() != vb.size() || vb.size() != vc.size())
    throw ShapeError("analogy_query: vector dims disagree");
  std::vector<double> query(vc.size());
  for (std::size_t j = 0; j < query.size(); ++j) query[j] = vc[j] + vb[j] - va[j];
  return nearest_neighbors(coll, query, k);
}

std::vector<double> embedding_row(const EmbeddingCollection& coll, std::int64_t id) {
  for (int i = 0; i < coll.count(); ++i)
    if (coll.ids[i] == id)
      return std::vector<double>(coll.vectors.row(i), coll.vectors.row(i) + coll.dim());
  throw InputError("embedding id " + std::to_string(id) + " not found");
}

void export_embeddings(const EmbeddingCollection& coll, std::ostream& out) {
  if (coll.count() == 0) throw InputError("export_embeddings: empty collection");
  out << coll.count() << ' ' << coll.dim() << '\n';
  char buf[40];
  for (int i = 0; i < coll.count(); ++i) {
    out << coll.ids[i];
    const double* row = coll.vectors.row(i);
    for (int j = 0; j < coll.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), " %.17g", row[j]);
      out << buf;
    }
    out << '\n';
  }
}

void export_embeddings_file(const EmbeddingCollection& coll, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open embedding file for writing: " + path);
  export_embeddings(coll, out);
}

EmbeddingCollection import_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("embedding file line 1: missing N D header");
  std::istringstream header(line);
  std::int64_t n;
  int d;
  std::string rest;
  if (!(header >> n >> d) || (header >> rest) || n < 1 || d < 1)
    throw ParseError("embedding file line 1: bad N D header");

  EmbeddingCollection coll;
  coll.vectors = Mat<double>(static_cast<int>(n), d);
  coll.ids.resize(n);
  std::int64_t row = 0;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (row >= n)
      throw FormatError("embedding file line " + std::to_string(line_no) +
                        ": more rows than the header declared");
    std::istringstream ss(line);
    if (!(ss >> coll.ids[row]))
      throw ParseError("embedding file line " + std::to_string(line_no) + ": bad id");
    double* dst = coll.vectors.row(static_cast<int>(row));
    for (int j = 0; j < d; ++j)
      if (!(ss >> dst[j]))
        throw ParseError("embedding file line " + std::to_string(line_no) + ": expected " +
                         std::to_string(d) + " values");
    if (ss >> rest)
      throw ParseError("embedding file line " + std::to_string(line_no) + ": trailing data");
    ++row;
  }
  if (row != n)
    throw FormatError("embedding file declares " + std::to_string(n) + " rows but holds " +
                      std::to_string(row));
  return coll;
}

EmbeddingCollection import_embeddings_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open embedding file: " + path);
  return import_embeddings(in);
}

}  // namespace qt
