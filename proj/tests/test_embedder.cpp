#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "qt/embedder.hpp"
#include "qt/trainer.hpp"
#include "testutil.hpp"

using namespace qt;

namespace {

QtModel<float> tiny_model(EncoderKind kind) {
  RawCorpus raw = testutil::counting_corpus(12);
  QtModel<float> model;
  model.vocab = build_vocab(raw, 64);
  Rng rng(21);
  model.f = make_encoder<float>(kind, model.vocab.size(), 6, 4, rng);
  model.g = make_encoder<float>(kind, model.vocab.size(), 6, 4, rng);
  return model;
}

EmbeddingCollection hand_collection(std::vector<std::vector<double>> rows) {
  EmbeddingCollection coll;
  coll.vectors = Mat<double>(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), coll.vectors.row(static_cast<int>(i)));
    coll.ids.push_back(static_cast<std::int64_t>(i));
  }
  return coll;
}

}  // namespace

TEST_CASE("embed_sentences concatenates f and g outputs in input order") {
  for (EncoderKind kind : {EncoderKind::kBow, EncoderKind::kGru, EncoderKind::kBiGru}) {
    QtModel<float> model = tiny_model(kind);
    std::vector<std::vector<std::string>> sents = {{"w1", "w2"}, {"w3"}, {"w1", "w2"}};
    EmbeddingCollection coll = embed_sentences(model, sents);
    CHECK(coll.dim() == model.embed_dim());
    CHECK(coll.count() == 3);
    // Identical sentences get identical rows.
    for (int j = 0; j < coll.dim(); ++j) CHECK(coll.vectors.at(0, j) == coll.vectors.at(2, j));
  }
}

TEST_CASE("embedding rows are independent of the batching used") {
  QtModel<float> model = tiny_model(EncoderKind::kGru);
  std::vector<std::vector<std::string>> sents;
  for (int i = 0; i < 7; ++i) {
    std::vector<std::string> s;
    for (int t = 0; t <= i % 4; ++t) s.push_back("w" + std::to_string((i + t) % 9));
    sents.push_back(std::move(s));
  }
  EmbeddingCollection a = embed_sentences(model, sents, 2);
  EmbeddingCollection b = embed_sentences(model, sents, 7);
  EmbeddingCollection c = embed_sentences(model, sents, 64);
  CHECK(a.vectors.data == b.vectors.data);
  CHECK(b.vectors.data == c.vectors.data);
}

TEST_CASE("embed_sentences reports the index of an empty sentence") {
  QtModel<float> model = tiny_model(EncoderKind::kBow);
  try {
    embed_sentences(model, {{"w1"}, {}, {"w2"}});
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("nearest_neighbors: self-retrieval, orthogonality, ranking oracle") {
  EmbeddingCollection coll = hand_collection({
      {1.0, 0.0, 0.0},
      {0.9, 0.1, 0.0},
      {0.0, 1.0, 0.0},
      {0.4, 0.4, 0.2},
      {-1.0, 0.0, 0.0},
  });

  // A query present in the pool ranks itself first with cosine 1.
  auto self = nearest_neighbors(coll, {0.9, 0.1, 0.0}, 3);
  CHECK(self[0].id == 1);
  CHECK(self[0].cosine == doctest::Approx(1.0).epsilon(1e-12));

  // Orthogonal query: all similarities zero, ties broken by ascending id.
  auto ortho = nearest_neighbors(hand_collection({{1, 0, 0}, {0, 1, 0}}), {0.0, 0.0, 2.0}, 2);
  CHECK(ortho[0].cosine == 0.0);
  CHECK(ortho[1].cosine == 0.0);
  CHECK(ortho[0].id == 0);
  CHECK(ortho[1].id == 1);

  // Brute-force oracle on the 5-vector pool.
  const std::vector<double> query{0.7, 0.3, 0.1};
  auto ranked = nearest_neighbors(coll, query, 5);
  std::vector<std::pair<double, std::int64_t>> expected;
  for (int i = 0; i < coll.count(); ++i) {
    double dot = 0, nq = 0, nr = 0;
    for (int j = 0; j < 3; ++j) {
      dot += query[j] * coll.vectors.at(i, j);
      nq += query[j] * query[j];
      nr += coll.vectors.at(i, j) * coll.vectors.at(i, j);
    }
    expected.push_back({-dot / std::sqrt(nq * nr), coll.ids[i]});
  }
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 5; ++i) {
    CHECK(ranked[i].id == expected[i].second);
    CHECK(ranked[i].cosine == doctest::Approx(-expected[i].first).epsilon(1e-12));
  }

  // k = N returns a permutation of all ids.
  std::set<std::int64_t> ids;
  for (const auto& n : ranked) ids.insert(n.id);
  CHECK(ids.size() == 5);

  CHECK_THROWS_AS(nearest_neighbors(coll, {1.0, 0.0}, 1), ShapeError);
  CHECK_THROWS_AS(nearest_neighbors(coll, {0.0, 0.0, 0.0}, 1), DegenerateError);
}

TEST_CASE("cosine similarity is invariant to positive rescaling") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(8), b(8);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    const double base = cosine_similarity(a.data(), b.data(), 8);
    std::vector<double> a2 = a, b2 = b;
    const double sa = rng.uniform(0.1, 50.0), sb = rng.uniform(0.1, 50.0);
    for (auto& v : a2) v *= sa;
    for (auto& v : b2) v *= sb;
    CHECK(cosine_similarity(a2.data(), b2.data(), 8) == doctest::Approx(base).epsilon(1e-6));
  }
}

TEST_CASE("analogy_query composes vC + vB - vA and keeps A, B, C in the pool") {
  EmbeddingCollection coll = hand_collection({
      {1.0, 0.0, 0.0, 0.1},   // A
      {1.0, 1.0, 0.0, 0.1},   // B
      {0.0, 0.0, 1.0, 0.1},   // C
      {0.0, 1.0, 1.0, 0.1},   // D = C + B - A exactly
      {0.3, -0.4, 0.2, 0.9},
  });
  auto va = embedding_row(coll, 0);
  auto vb = embedding_row(coll, 1);
  auto vc = embedding_row(coll, 2);

  // Exact additive structure: D at rank 1.
  auto d = analogy_query(coll, va, vb, vc, 1);
  CHECK(d[0].id == 3);

  // vA == vB: the query collapses to vC, so C itself is retrieved.
  auto c = analogy_query(coll, va, va, vc, 1);
  CHECK(c[0].id == 2);
  CHECK(c[0].cosine == doctest::Approx(1.0).epsilon(1e-12));

  // vA == vC: query = vB, so B is retrieved.
  auto b = analogy_query(coll, va, vb, va, 1);
  CHECK(b[0].id == 1);

  // Extensionally equal to nearest_neighbors on vC when vA == vB.
  auto nn = nearest_neighbors(coll, vc, 5);
  auto an = analogy_query(coll, vb, vb, vc, 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(nn[i].id == an[i].id);
    CHECK(nn[i].cosine == doctest::Approx(an[i].cosine).epsilon(1e-12));
  }
}

TEST_CASE("embedding export/import round-trips exactly") {
  Rng rng(9);
  EmbeddingCollection coll;
  coll.vectors = init<double>(6, 5, InitScheme::kUniform, rng, -2.0, 2.0);
  coll.vectors.at(0, 0) = 1.0 / 3.0;  // a value with no short decimal form
  coll.ids = {5, 9, 0, 2, 7, 3};

  std::ostringstream out;
  export_embeddings(coll, out);
  std::istringstream in(out.str());
  EmbeddingCollection loaded = import_embeddings(in);
  CHECK(loaded.ids == coll.ids);
  REQUIRE(loaded.vectors.same_shape(coll.vectors));
  for (std::size_t i = 0; i < coll.vectors.data.size(); ++i)
    CHECK(loaded.vectors.data[i] == coll.vectors.data[i]);

  // Header/body inconsistencies and an empty export are rejected.
  std::istringstream short_body("3 2\n0 1.0 2.0\n");
  CHECK_THROWS_AS(import_embeddings(short_body), FormatError);
  std::istringstream long_body("1 2\n0 1.0 2.0\n1 3.0 4.0\n");
  CHECK_THROWS_AS(import_embeddings(long_body), FormatError);
  std::istringstream bad_vals("1 2\n0 1.0 x\n");
  CHECK_THROWS_AS(import_embeddings(bad_vals), ParseError);
  EmbeddingCollection empty;
  std::ostringstream sink;
  CHECK_THROWS_AS(export_embeddings(empty, sink), InputError);
}
