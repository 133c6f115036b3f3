#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qt/encoder.hpp"
#include "qt/objective.hpp"

using namespace qt;

namespace {

template <typename T>
ScoreMatrix<T> masked_scores(const Mat<T>& raw) {
  ScoreMatrix<T> sm;
  sm.scores = raw;
  sm.mask.assign(raw.size(), 0);
  for (int i = 0; i < raw.rows; ++i) {
    sm.mask[static_cast<std::size_t>(i) * raw.cols + i] = 1;
    sm.scores.at(i, i) = -std::numeric_limits<T>::infinity();
  }
  return sm;
}

ScoreMatrix<double> random_scores(int b, Rng& rng) {
  return masked_scores(init<double>(b, b, InitScheme::kUniform, rng, -2.0, 2.0));
}

void check_against_oracle(const ScoreMatrix<double>& sm, const ContextConfig& ctx,
                          ObjectiveKind kind, double margin = 1.0) {
  std::vector<double> raw(sm.scores.data.begin(), sm.scores.data.end());
  for (int i = 0; i < sm.batch_size(); ++i) raw[static_cast<std::size_t>(i) * sm.batch_size() + i] = 0.0;
  oracle::LossAndGrad expected;
  switch (kind) {
    case ObjectiveKind::kQt: expected = oracle::qt_loss(raw, sm.batch_size(), sm.mask, ctx.offsets); break;
    case ObjectiveKind::kBinary:
      expected = oracle::binary_loss(raw, sm.batch_size(), sm.mask, ctx.offsets);
      break;
    case ObjectiveKind::kMargin:
      expected = oracle::margin_loss(raw, sm.batch_size(), sm.mask, ctx.offsets, margin);
      break;
  }
  LossResult<double> got = context_loss(sm, ctx, kind, margin);
  CHECK(got.report.loss == doctest::Approx(expected.loss).epsilon(1e-6));
  for (std::size_t i = 0; i < got.d_scores.data.size(); ++i)
    CHECK(got.d_scores.data[i] == doctest::Approx(expected.d_scores[i]).epsilon(1e-6));
}

}  // namespace

TEST_CASE("score_all builds F G^T with a masked diagonal") {
  // Orthonormal rows: off-diagonal scores vanish, diagonal is masked.
  Mat<double> eye(3, 3);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  ScoreMatrix<double> sm = score_all(eye, eye);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) {
        CHECK(sm.masked(i, j));
      } else {
        CHECK_FALSE(sm.masked(i, j));
        CHECK(sm.scores.at(i, j) == 0.0);
      }
    }

  Rng rng(5);
  Mat<double> f = init<double>(3, 2, InitScheme::kUniform, rng, -1, 1);
  Mat<double> g = init<double>(3, 2, InitScheme::kUniform, rng, -1, 1);
  ScoreMatrix<double> s1 = score_all(f, g);

  // Bilinearity: scaling F scales every unmasked score.
  Mat<double> f2 = f;
  for (auto& v : f2.data) v *= 3.0;
  ScoreMatrix<double> s2 = score_all(f2, g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(s2.scores.at(i, j) == doctest::Approx(3.0 * s1.scores.at(i, j)));

  // Independent dot-product check.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (int c = 0; c < 2; ++c) dot += f.at(i, c) * g.at(j, c);
      CHECK(s1.scores.at(i, j) == doctest::Approx(dot).epsilon(1e-6));
    }

  CHECK_THROWS_AS(score_all(Mat<double>(3, 2), Mat<double>(3, 3)), ShapeError);
  CHECK_THROWS_AS(score_all(Mat<double>(1, 2), Mat<double>(1, 2)), ShapeError);
}

TEST_CASE("qt_loss forced cases") {
  // B=2, offsets {+1}: the single candidate is the target, so p = 1.
  Mat<double> s2(2, 2);
  s2.data = {0.0, 3.7, -1.2, 0.0};
  LossResult<double> r2 = qt_loss(masked_scores(s2), ContextConfig{{+1}});
  CHECK(r2.report.count == 1);
  CHECK(r2.report.loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r2.report.accuracy == 1.0);

  // B=4, all unmasked scores equal: uniform over 3 candidates, loss = ln 3.
  Mat<double> s4(4, 4, 0.5);
  LossResult<double> r4 = qt_loss(masked_scores(s4), ContextConfig{{-1, +1}});
  CHECK(r4.report.loss == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(r4.report.count == 6);
}

TEST_CASE("qt_loss matches the frozen 3x3 oracle values") {
  Mat<double> s(3, 3);
  s.data = {0, 1, 2, 0, 0, 1, 2, 0, 0};
  LossResult<double> r = qt_loss(masked_scores(s), ContextConfig{{+1}});
  // Frozen from an independent high-precision script.
  CHECK(r.report.count == 2);
  CHECK(r.report.loss == doctest::Approx(0.81326168751822281).epsilon(1e-12));
  CHECK(r.d_scores.at(0, 1) == doctest::Approx(-0.36552928931500245).epsilon(1e-12));
  CHECK(r.d_scores.at(0, 2) == doctest::Approx(0.36552928931500245).epsilon(1e-12));
  CHECK(r.d_scores.at(1, 0) == doctest::Approx(0.13447071068499755).epsilon(1e-12));
  CHECK(r.d_scores.at(1, 2) == doctest::Approx(-0.13447071068499755).epsilon(1e-12));
  CHECK(r.d_scores.at(2, 0) == 0.0);
  CHECK(r.d_scores.at(2, 1) == 0.0);
}

TEST_CASE("all objectives match the brute-force oracle on random matrices") {
  Rng rng(17);
  for (int b : {3, 5}) {
    for (int trial = 0; trial < 4; ++trial) {
      ScoreMatrix<double> sm = random_scores(b, rng);
      ContextConfig ctx{{-1, +1}};
      check_against_oracle(sm, ctx, ObjectiveKind::kQt);
      check_against_oracle(sm, ctx, ObjectiveKind::kBinary);
      check_against_oracle(sm, ctx, ObjectiveKind::kMargin, 0.7);
      check_against_oracle(sm, ContextConfig{{+1}}, ObjectiveKind::kQt);
    }
  }
}

TEST_CASE("qt_loss gradient matches central finite differences") {
  Rng rng(23);
  ScoreMatrix<double> sm = random_scores(5, rng);
  const ContextConfig ctx{{-1, +1}};
  LossResult<double> res = qt_loss(sm, ctx);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      if (sm.masked(i, j)) {
        CHECK(res.d_scores.at(i, j) == 0.0);
        continue;
      }
      const double saved = sm.scores.at(i, j);
      const double h = 1e-6;
      sm.scores.at(i, j) = saved + h;
      const double up = qt_loss(sm, ctx).report.loss;
      sm.scores.at(i, j) = saved - h;
      const double down = qt_loss(sm, ctx).report.loss;
      sm.scores.at(i, j) = saved;
      CHECK(res.d_scores.at(i, j) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("qt_loss is invariant to full-row score shifts") {
  Rng rng(29);
  ScoreMatrix<double> sm = random_scores(4, rng);
  const ContextConfig ctx{{-1, +1}};
  const double base = qt_loss(sm, ctx).report.loss;
  for (int j = 0; j < 4; ++j)
    if (!sm.masked(2, j)) sm.scores.at(2, j) += 11.25;
  CHECK(qt_loss(sm, ctx).report.loss == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("column permutations permute dS and preserve the loss") {
  Rng rng(31);
  const int b = 5;
  ScoreMatrix<double> sm = random_scores(b, rng);
  auto targets = detail::prediction_pairs(b, ContextConfig{{-1, +1}});
  LossResult<double> base = detail::masked_multiclass_loss(sm, targets);

  const std::vector<int> perm{2, 0, 4, 1, 3};
  ScoreMatrix<double> permuted;
  permuted.scores = Mat<double>(b, b);
  permuted.mask.assign(static_cast<std::size_t>(b) * b, 0);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j) {
      permuted.scores.at(i, perm[j]) = sm.scores.at(i, j);
      permuted.mask[static_cast<std::size_t>(i) * b + perm[j]] =
          sm.mask[static_cast<std::size_t>(i) * b + j];
    }
  std::vector<std::pair<int, int>> ptargets;
  for (auto [i, t] : targets) ptargets.emplace_back(i, perm[t]);
  LossResult<double> got = detail::masked_multiclass_loss(permuted, ptargets);

  CHECK(got.report.loss == doctest::Approx(base.report.loss).epsilon(1e-12));
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      CHECK(got.d_scores.at(i, perm[j]) == doctest::Approx(base.d_scores.at(i, j)).epsilon(1e-12));
}

TEST_CASE("context_accuracy counts strict argmax hits only") {
  // Single candidate: trivially correct.
  Mat<double> s2(2, 2, 0.0);
  CHECK(context_accuracy(masked_scores(s2), ContextConfig{{+1}}) == 1.0);

  // One-hot correct scores.
  Mat<double> hot(3, 3);
  hot.at(0, 1) = 5.0;
  hot.at(1, 2) = 5.0;
  hot.at(2, 1) = -1.0;  // wrong direction for (2,+1): out of range, skipped
  CHECK(context_accuracy(masked_scores(hot), ContextConfig{{+1}}) == 1.0);

  // Adversarial: argmax never the target.
  Mat<double> adv(3, 3);
  adv.at(0, 2) = 9.0;
  adv.at(1, 0) = 9.0;
  CHECK(context_accuracy(masked_scores(adv), ContextConfig{{+1}}) == 0.0);

  // Ties count as incorrect.
  Mat<double> tie(3, 3, 1.0);
  CHECK(context_accuracy(masked_scores(tie), ContextConfig{{+1}}) == 0.0);
}

TEST_CASE("binary objective: all-zero scores give ln 2 per cell") {
  Mat<double> s(4, 4, 0.0);
  LossResult<double> r = alt_context_loss(masked_scores(s), ContextConfig{{-1, +1}},
                                          ObjectiveKind::kBinary);
  CHECK(r.report.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Every row predicts, so every unmasked cell is labelled.
  CHECK(r.report.count == 4 * 3);
}

TEST_CASE("margin objective: satisfied margins give zero loss and gradient") {
  Mat<double> s(3, 3);
  // Targets (i, i+1) get score 5, everything else 0; margin 1 is satisfied.
  s.at(0, 1) = 5.0;
  s.at(1, 2) = 5.0;
  s.at(2, 1) = 0.0;
  LossResult<double> r = alt_context_loss(masked_scores(s), ContextConfig{{+1}},
                                          ObjectiveKind::kMargin, 1.0);
  CHECK(r.report.loss == 0.0);
  for (double v : r.d_scores.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(alt_context_loss(masked_scores(s), ContextConfig{{+1}},
                                   ObjectiveKind::kMargin, -1.0),
                  ValueError);
}

TEST_CASE("degenerate batches are rejected") {
  Mat<double> s(2, 2, 0.0);
  CHECK_THROWS_AS(qt_loss(masked_scores(s), ContextConfig{{+5}}), DegenerateError);
  CHECK_THROWS_AS(context_accuracy(masked_scores(s), ContextConfig{{-7}}), DegenerateError);
  CHECK_THROWS_AS(ContextConfig{{0}}.validate(), ConfigError);
}

TEST_CASE("one-word sentences with lookup encoders reduce to skip-gram") {
  // Lookup encoder == BoW over length-1 sentences.
  Rng rng(41);
  const int vocab = 20, dim = 6, b = 8;
  BowParams<double> f_params = init_bow_params<double>(vocab, dim, rng);
  BowParams<double> g_params = init_bow_params<double>(vocab, dim, rng);

  std::vector<std::int32_t> words;
  std::vector<std::vector<std::int32_t>> sentences;
  std::vector<std::int64_t> indices;
  for (int i = 0; i < b; ++i) {
    words.push_back(2 + static_cast<std::int32_t>(rng.next_below(vocab - 2)));
    sentences.push_back({words.back()});
    indices.push_back(i);
  }
  const Minibatch batch = make_minibatch(sentences, indices);

  const Mat<double> f_out = bow_forward(f_params, batch);
  const Mat<double> g_out = bow_forward(g_params, batch);
  const ContextConfig ctx{{-1, +1}};
  const LossResult<double> got = qt_loss(score_all(f_out, g_out), ctx);

  const double expected = oracle::skipgram_inbatch_loss(f_params.embedding, g_params.embedding,
                                                        words, ctx.offsets);
  CHECK(got.report.loss == doctest::Approx(expected).epsilon(1e-6));
}
