#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "qt/errors.hpp"
#include "qt/mat.hpp"

namespace qt {

// Relative sentence positions treated as prediction targets. A context
// window of size c corresponds to offsets {-(c-1)/2, ..., -1, +1, ..., +(c-1)/2}.
struct ContextConfig {
  std::vector<int> offsets{-1, +1};

  void validate() const {
    if (offsets.empty()) throw ConfigError("ContextConfig: needs at least one offset");
    for (int o : offsets)
      if (o == 0) throw ConfigError("ContextConfig: offset 0 is not a context position");
  }

  static ContextConfig from_window(int context_size) {
    if (context_size < 3 || context_size % 2 == 0)
      throw ConfigError("context size must be an odd integer >= 3");
    ContextConfig ctx;
    ctx.offsets.clear();
    const int half = (context_size - 1) / 2;
    for (int o = -half; o <= half; ++o)
      if (o != 0) ctx.offsets.push_back(o);
    return ctx;
  }
};

// B x B candidate scores with an exclusion mask. Masked entries are treated
// as -inf by the softmax; the diagonal (a sentence scored against itself) is
// always masked.
template <typename T>
struct ScoreMatrix {
  Mat<T> scores;
  std::vector<std::uint8_t> mask;  // 1 = excluded

  int batch_size() const { return scores.rows; }
  bool masked(int i, int j) const { return mask[static_cast<std::size_t>(i) * scores.cols + j] != 0; }
};

struct LossReport {
  double loss = 0.0;      // mean nats per prediction
  double accuracy = 0.0;  // argmax == target, ties incorrect
  std::int64_t count = 0; // predictions made
};

enum class ObjectiveKind { kQt, kBinary, kMargin };

template <typename T>
struct LossResult {
  LossReport report;
  Mat<T> d_scores;
};

// S = F G^T with the diagonal masked.
template <typename T>
ScoreMatrix<T> score_all(const Mat<T>& f_out, const Mat<T>& g_out) {
  if (f_out.cols != g_out.cols || f_out.rows != g_out.rows)
    throw ShapeError("score_all: encoder outputs disagree, " +
                     shape_str(f_out.rows, f_out.cols) + " vs " +
                     shape_str(g_out.rows, g_out.cols));
  if (f_out.rows < 2) throw ShapeError("score_all: batch must hold >= 2 sentences");
  ScoreMatrix<T> sm;
  sm.scores = matmul_nt(f_out, g_out);
  sm.mask.assign(sm.scores.size(), 0);
  for (int i = 0; i < sm.scores.rows; ++i) {
    sm.mask[static_cast<std::size_t>(i) * sm.scores.cols + i] = 1;
    sm.scores.at(i, i) = -std::numeric_limits<T>::infinity();
  }
  return sm;
}

// Routes d_scores back to the two encoder outputs: dF = dS G, dG = dS^T F.
template <typename T>
std::pair<Mat<T>, Mat<T>> score_backward(const Mat<T>& d_scores, const Mat<T>& f_out,
                                         const Mat<T>& g_out) {
  return {matmul(d_scores, g_out), matmul_tn(d_scores, f_out)};
}

namespace detail {

// Enumerates the (source row, target column) prediction pairs induced by the
// context offsets; out-of-range targets are skipped.
inline std::vector<std::pair<int, int>> prediction_pairs(int batch_size, const ContextConfig& ctx) {
  ctx.validate();
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < batch_size; ++i)
    for (int o : ctx.offsets) {
      const int t = i + o;
      if (t >= 0 && t < batch_size) pairs.emplace_back(i, t);
    }
  return pairs;
}

// Fraction of predictions whose strict row argmax (over unmasked entries)
// hits the target.
template <typename T>
double argmax_accuracy(const ScoreMatrix<T>& sm, const std::vector<std::pair<int, int>>& pairs) {
  const int b = sm.batch_size();
  std::int64_t correct = 0;
  for (const auto& [i, t] : pairs) {
    T best = -std::numeric_limits<T>::infinity();
    int best_j = -1;
    int n_best = 0;
    for (int j = 0; j < b; ++j) {
      if (sm.masked(i, j)) continue;
      const T s = sm.scores.at(i, j);
      if (s > best) {
        best = s;
        best_j = j;
        n_best = 1;
      } else if (s == best) {
        ++n_best;
      }
    }
    if (best_j == t && n_best == 1) ++correct;
  }
  return pairs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// Multi-class cross-entropy over masked rows for an explicit target list;
// the gradient belongs to the mean loss. Row softmaxes are shared across
// the row's predictions.
template <typename T>
LossResult<T> masked_multiclass_loss(const ScoreMatrix<T>& sm,
                                     const std::vector<std::pair<int, int>>& targets) {
  const int b = sm.scores.rows;
  if (targets.empty()) throw DegenerateError("qt_loss: batch yields no predictions");
  const Mat<T> probs = softmax_rows(sm.scores);

  LossResult<T> res;
  res.d_scores = Mat<T>(b, b);
  double total = 0.0;
  for (const auto& [i, t] : targets) {
    if (sm.masked(i, t)) throw ConfigError("qt_loss: target cell is masked");
    // A prediction with exactly zero probability yields an infinite loss;
    // the trainer treats that as divergence.
    total += -std::log(static_cast<double>(probs.at(i, t)));
    for (int j = 0; j < b; ++j)
      if (!sm.masked(i, j)) res.d_scores.at(i, j) += probs.at(i, j);
    res.d_scores.at(i, t) -= T(1);
  }
  const T inv = T(1.0 / static_cast<double>(targets.size()));
  for (auto& v : res.d_scores.data) v *= inv;
  res.report.loss = total / static_cast<double>(targets.size());
  res.report.count = static_cast<std::int64_t>(targets.size());
  res.report.accuracy = argmax_accuracy(sm, targets);
  return res;
}

}  // namespace detail

// The context-classification loss: each (source, offset) prediction is a
// softmax over the batch candidates with the true context sentence as the
// class. Loss is the mean cross-entropy per prediction; d_scores is its
// exact gradient.
template <typename T>
LossResult<T> qt_loss(const ScoreMatrix<T>& sm, const ContextConfig& ctx) {
  return detail::masked_multiclass_loss(sm, detail::prediction_pairs(sm.batch_size(), ctx));
}

template <typename T>
double context_accuracy(const ScoreMatrix<T>& sm, const ContextConfig& ctx) {
  auto pairs = detail::prediction_pairs(sm.batch_size(), ctx);
  if (pairs.empty()) throw DegenerateError("context_accuracy: batch yields no predictions");
  return detail::argmax_accuracy(sm, pairs);
}

// Alternatives to the multi-class objective, kept for comparison runs.
//   binary: per-cell logistic loss, label 1 on true context cells and 0 on
//           every other unmasked cell of rows that make a prediction; the
//           reported loss is the mean per labelled cell.
//   margin: hinge on score differences, mean per prediction.
template <typename T>
LossResult<T> alt_context_loss(const ScoreMatrix<T>& sm, const ContextConfig& ctx,
                               ObjectiveKind kind, double margin = 1.0) {
  const int b = sm.batch_size();
  const auto pairs = detail::prediction_pairs(b, ctx);
  if (pairs.empty()) throw DegenerateError("alt_context_loss: batch yields no predictions");

  LossResult<T> res;
  res.d_scores = Mat<T>(b, b);
  res.report.accuracy = detail::argmax_accuracy(sm, pairs);
  double total = 0.0;

  if (kind == ObjectiveKind::kBinary) {
    std::vector<std::uint8_t> positive(static_cast<std::size_t>(b) * b, 0);
    std::vector<std::uint8_t> row_active(b, 0);
    for (const auto& [i, t] : pairs) {
      positive[static_cast<std::size_t>(i) * b + t] = 1;
      row_active[i] = 1;
    }
    std::int64_t cells = 0;
    for (int i = 0; i < b; ++i) {
      if (!row_active[i]) continue;
      for (int j = 0; j < b; ++j) {
        if (sm.masked(i, j)) continue;
        const double s = static_cast<double>(sm.scores.at(i, j));
        const double sig = 1.0 / (1.0 + std::exp(-s));
        const double y = positive[static_cast<std::size_t>(i) * b + j] ? 1.0 : 0.0;
        // -log sigma(s) for positives, -log(1 - sigma(s)) for negatives,
        // evaluated via the softplus form for stability.
        const double softplus = s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
        total += softplus - y * s;
        res.d_scores.at(i, j) = static_cast<T>(sig - y);
        ++cells;
      }
    }
    const T inv = T(1.0 / static_cast<double>(cells));
    for (auto& v : res.d_scores.data) v *= inv;
    res.report.loss = total / static_cast<double>(cells);
    res.report.count = cells;
    return res;
  }

  if (kind != ObjectiveKind::kMargin) throw ConfigError("alt_context_loss: unknown kind");
  if (!(margin > 0.0)) throw ValueError("alt_context_loss: margin must be positive");
  for (const auto& [i, t] : pairs) {
    const double st = static_cast<double>(sm.scores.at(i, t));
    for (int j = 0; j < b; ++j) {
      if (j == t || sm.masked(i, j)) continue;
      const double gap = margin - st + static_cast<double>(sm.scores.at(i, j));
      if (gap > 0.0) {
        total += gap;
        res.d_scores.at(i, j) += T(1);
        res.d_scores.at(i, t) -= T(1);
      }
    }
  }
  const T inv = T(1.0 / static_cast<double>(pairs.size()));
  for (auto& v : res.d_scores.data) v *= inv;
  res.report.loss = total / static_cast<double>(pairs.size());
  res.report.count = static_cast<std::int64_t>(pairs.size());
  return res;
}

template <typename T>
LossResult<T> context_loss(const ScoreMatrix<T>& sm, const ContextConfig& ctx,
                           ObjectiveKind kind, double margin = 1.0) {
  return kind == ObjectiveKind::kQt ? qt_loss(sm, ctx) : alt_context_loss(sm, ctx, kind, margin);
}

}  // namespace qt
