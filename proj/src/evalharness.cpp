#include "qt/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "qt/embedder.hpp"
#include "qt/errors.hpp"
#include "qt/objective.hpp"

namespace qt {

int LabeledDataset::num_classes() const {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  return c;
}

void LabeledDataset::validate() const {
  if (static_cast<int>(labels.size()) != features.rows)
    throw ShapeError("dataset: label count != feature rows");
  for (int y : labels)
    if (y < 0) throw ValueError("dataset: labels must be non-negative");
  if (split && static_cast<int>(split->size()) != features.rows)
    throw ShapeError("dataset: split mask size != feature rows");
}

LabeledDataset LabeledDataset::subset(const std::vector<int>& rows) const {
  if (rows.empty()) throw InputError("dataset subset: no rows selected");
  LabeledDataset out;
  out.features = Mat<double>(static_cast<int>(rows.size()), features.cols);
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = features.row(rows[i]);
    std::copy(src, src + features.cols, out.features.row(static_cast<int>(i)));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

namespace {

int distinct_labels(const std::vector<int>& labels) {
  std::set<int> s(labels.begin(), labels.end());
  return static_cast<int>(s.size());
}

// Mean cross-entropy + (l2/2)||W||^2 and its gradient, full batch.
struct ProbeObjective {
  const LabeledDataset& data;
  double l2;
  int classes;

  double loss_and_grad(const Mat<double>& w, const std::vector<double>& bias, Mat<double>& dw,
                       std::vector<double>& dbias) const {
    const int n = data.count();
    Mat<double> logits = matmul_nt(data.features, w);  // n x C
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < classes; ++c) logits.at(i, c) += bias[c];
    Mat<double> probs = softmax_rows(logits);

    dw = Mat<double>(w.rows, w.cols);
    dbias.assign(bias.size(), 0.0);
    double loss = 0.0;
    Mat<double> dlogits(n, classes);
    for (int i = 0; i < n; ++i) {
      const double p = std::max(probs.at(i, data.labels[i]), 1e-300);
      loss += -std::log(p);
      for (int c = 0; c < classes; ++c) dlogits.at(i, c) = probs.at(i, c);
      dlogits.at(i, data.labels[i]) -= 1.0;
    }
    const double inv = 1.0 / static_cast<double>(n);
    loss *= inv;
    for (auto& v : dlogits.data) v *= inv;
    dw = matmul_tn(dlogits, data.features);  // C x D
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < classes; ++c) dbias[c] += dlogits.at(i, c);

    double reg = 0.0;
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      reg += w.data[i] * w.data[i];
      dw.data[i] += l2 * w.data[i];
    }
    return loss + 0.5 * l2 * reg;
  }
};

struct ProbeRun {
  LinearProbe probe;
  std::vector<double> losses;
};

ProbeRun run_probe(const LabeledDataset& train, double l2, std::uint64_t seed,
                   const ProbeOptions& opts, bool record_losses) {
  train.validate();
  if (distinct_labels(train.labels) < 2)
    throw DegenerateError("train_linear_probe: needs >= 2 classes present");
  if (l2 < 0) throw ValueError("train_linear_probe: l2 must be >= 0");

  const int classes = train.num_classes();
  const int dim = train.features.cols;
  Rng rng(seed);
  LinearProbe probe;
  probe.weights = init<double>(classes, dim, InitScheme::kUniform, rng, -0.01, 0.01);
  probe.bias.assign(classes, 0.0);
  probe.l2 = l2;

  ProbeObjective obj{train, l2, classes};

  // Plain Adam over the flattened parameters.
  Mat<double> mw(classes, dim), vw(classes, dim);
  std::vector<double> mb(classes, 0.0), vb(classes, 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  ProbeRun run;
  Mat<double> dw;
  std::vector<double> dbias;
  for (int t = 1; t <= opts.max_iters; ++t) {
    const double loss = obj.loss_and_grad(probe.weights, probe.bias, dw, dbias);
    if (record_losses) run.losses.push_back(loss);
    double sq = 0.0;
    for (double v : dw.data) sq += v * v;
    for (double v : dbias) sq += v * v;
    if (std::sqrt(sq) < opts.grad_tol) break;

    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < dw.data.size(); ++i) {
      mw.data[i] = b1 * mw.data[i] + (1 - b1) * dw.data[i];
      vw.data[i] = b2 * vw.data[i] + (1 - b2) * dw.data[i] * dw.data[i];
      probe.weights.data[i] -= opts.lr * (mw.data[i] / c1) / (std::sqrt(vw.data[i] / c2) + eps);
    }
    for (int c = 0; c < classes; ++c) {
      mb[c] = b1 * mb[c] + (1 - b1) * dbias[c];
      vb[c] = b2 * vb[c] + (1 - b2) * dbias[c] * dbias[c];
      probe.bias[c] -= opts.lr * (mb[c] / c1) / (std::sqrt(vb[c] / c2) + eps);
    }
  }
  run.probe = std::move(probe);
  return run;
}

}  // namespace

LinearProbe train_linear_probe(const LabeledDataset& train, double l2, std::uint64_t seed,
                               const ProbeOptions& opts) {
  return run_probe(train, l2, seed, opts, false).probe;
}

std::vector<double> probe_loss_curve(const LabeledDataset& train, double l2, std::uint64_t seed,
                                     const ProbeOptions& opts) {
  return run_probe(train, l2, seed, opts, true).losses;
}

Mat<double> probe_logprobs(const LinearProbe& probe, const Mat<double>& features) {
  if (features.cols != probe.weights.cols)
    throw ShapeError("probe_logprobs: feature dim != probe dim");
  Mat<double> logits = matmul_nt(features, probe.weights);
  for (int i = 0; i < logits.rows; ++i)
    for (int c = 0; c < logits.cols; ++c) logits.at(i, c) += probe.bias[c];
  Mat<double> probs = softmax_rows(logits);
  for (auto& v : probs.data) v = std::log(std::max(v, 1e-300));
  return probs;
}

std::vector<int> probe_predict(const LinearProbe& probe, const Mat<double>& features) {
  Mat<double> lp = probe_logprobs(probe, features);
  std::vector<int> pred(lp.rows);
  for (int i = 0; i < lp.rows; ++i) {
    int best = 0;
    for (int c = 1; c < lp.cols; ++c)
      if (lp.at(i, c) > lp.at(i, best)) best = c;
    pred[i] = best;
  }
  return pred;
}

double probe_accuracy(const LinearProbe& probe, const LabeledDataset& data) {
  const std::vector<int> pred = probe_predict(probe, data.features);
  std::int64_t correct = 0;
  for (int i = 0; i < data.count(); ++i)
    if (pred[i] == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.count());
}

std::vector<int> kfold_assignment(int n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold: k must be >= 2");
  if (k > n) throw ConfigError("kfold: k exceeds the dataset size");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  // First n % k folds get the extra element.
  std::vector<int> fold(n);
  const int base = n / k;
  const int extra = n % k;
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    for (int j = 0; j < size; ++j) fold[order[pos++]] = f;
  }
  return fold;
}

namespace {

double choose_l2(const LabeledDataset& train_part, const std::vector<double>& l2_grid,
                 std::uint64_t seed, const ProbeOptions& opts) {
  if (l2_grid.empty()) throw ConfigError("kfold: empty l2 grid");
  if (l2_grid.size() == 1) return l2_grid[0];
  // Inner 90/10 split of the training portion.
  const int n = train_part.count();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0xD1B54A32D192ED03ull);
  rng.shuffle(order);
  int dev_size = std::max(1, n / 10);
  if (dev_size >= n) dev_size = n - 1;
  std::vector<int> dev_rows(order.begin(), order.begin() + dev_size);
  std::vector<int> fit_rows(order.begin() + dev_size, order.end());

  LabeledDataset fit = train_part.subset(fit_rows);
  LabeledDataset dev = train_part.subset(dev_rows);
  // The inner fit can lose a class to the split; fall back to the full
  // portion in that degenerate case.
  bool usable = true;
  if (distinct_labels(fit.labels) < 2) usable = false;

  double best_l2 = l2_grid[0];
  double best_acc = -1.0;
  for (double l2 : l2_grid) {
    const LinearProbe probe =
        train_linear_probe(usable ? fit : train_part, l2, seed, opts);
    const double acc = probe_accuracy(probe, usable ? dev : train_part);
    if (acc > best_acc) {
      best_acc = acc;
      best_l2 = l2;
    }
  }
  return best_l2;
}

}  // namespace

CvResult kfold_eval(const LabeledDataset& data, int k, const std::vector<double>& l2_grid,
                    std::uint64_t seed, const ProbeOptions& opts) {
  data.validate();
  const std::vector<int> fold = kfold_assignment(data.count(), k, seed);

  CvResult result;
  for (int f = 0; f < k; ++f) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < data.count(); ++i)
      (fold[i] == f ? test_rows : train_rows).push_back(i);
    LabeledDataset train_part = data.subset(train_rows);
    LabeledDataset test_part = data.subset(test_rows);

    const double l2 = choose_l2(train_part, l2_grid, seed + static_cast<std::uint64_t>(f), opts);
    const LinearProbe probe = train_linear_probe(train_part, l2, seed, opts);
    result.fold_accuracies.push_back(probe_accuracy(probe, test_part));
    result.chosen_l2.push_back(l2);
  }
  double mean = 0.0;
  for (double a : result.fold_accuracies) mean += a;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (double a : result.fold_accuracies) var += (a - mean) * (a - mean);
  result.mean_accuracy = mean;
  result.std_accuracy = std::sqrt(var / static_cast<double>(k));
  return result;
}

SplitResult split_eval(const LabeledDataset& data, const std::vector<double>& l2_grid,
                       std::uint64_t seed, const ProbeOptions& opts) {
  data.validate();
  if (!data.split) throw ConfigError("split_eval: dataset carries no split masks");
  std::vector<int> train_rows, dev_rows, test_rows;
  for (int i = 0; i < data.count(); ++i) {
    switch ((*data.split)[i]) {
      case SplitTag::kTrain: train_rows.push_back(i); break;
      case SplitTag::kDev: dev_rows.push_back(i); break;
      case SplitTag::kTest: test_rows.push_back(i); break;
    }
  }
  if (train_rows.empty() || test_rows.empty())
    throw ConfigError("split_eval: split lacks train or test rows");
  LabeledDataset train_part = data.subset(train_rows);
  LabeledDataset test_part = data.subset(test_rows);

  double best_l2 = l2_grid.empty() ? 0.0 : l2_grid[0];
  if (l2_grid.empty()) throw ConfigError("split_eval: empty l2 grid");
  if (!dev_rows.empty() && l2_grid.size() > 1) {
    LabeledDataset dev_part = data.subset(dev_rows);
    double best_acc = -1.0;
    for (double l2 : l2_grid) {
      const LinearProbe probe = train_linear_probe(train_part, l2, seed, opts);
      const double acc = probe_accuracy(probe, dev_part);
      if (acc > best_acc) {
        best_acc = acc;
        best_l2 = l2;
      }
    }
  }
  const LinearProbe probe = train_linear_probe(train_part, best_l2, seed, opts);
  return {probe_accuracy(probe, test_part), best_l2};
}

std::vector<double> pair_features(const std::vector<double>& u, const std::vector<double>& v,
                                  PairMode mode) {
  if (u.size() != v.size()) throw ShapeError("pair_features: dims disagree");
  std::vector<double> out;
  out.reserve(mode == PairMode::kHeuristic ? 2 * u.size() : 4 * u.size());
  if (mode == PairMode::kConcatHeuristic) {
    out.insert(out.end(), u.begin(), u.end());
    out.insert(out.end(), v.begin(), v.end());
  }
  for (std::size_t j = 0; j < u.size(); ++j) out.push_back(std::fabs(u[j] - v[j]));
  for (std::size_t j = 0; j < u.size(); ++j) out.push_back(u[j] * v[j]);
  return out;
}

LabeledDataset pair_feature_dataset(const PairDataset& pairs, PairMode mode) {
  if (pairs.count() == 0) throw InputError("pair_feature_dataset: no pairs");
  if (!pairs.left.same_shape(pairs.right))
    throw ShapeError("pair_feature_dataset: left/right shapes disagree");
  const int d = pairs.left.cols;
  const int fd = mode == PairMode::kHeuristic ? 2 * d : 4 * d;
  LabeledDataset out;
  out.features = Mat<double>(pairs.count(), fd);
  out.labels.reserve(pairs.count());
  for (int i = 0; i < pairs.count(); ++i) {
    std::vector<double> u(pairs.left.row(i), pairs.left.row(i) + d);
    std::vector<double> v(pairs.right.row(i), pairs.right.row(i) + d);
    const std::vector<double> feat = pair_features(u, v, mode);
    std::copy(feat.begin(), feat.end(), out.features.row(i));
    const double t = pairs.targets[i];
    if (t != 0.0 && t != 1.0)
      throw ValueError("pair_feature_dataset: targets must be binary labels");
    out.labels.push_back(static_cast<int>(t));
  }
  return out;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("pearson: series lengths disagree");
  const std::size_t n = a.size();
  if (n < 3) throw InputError("pearson: needs >= 3 points");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0)
    throw DegenerateError("pearson: a series has zero variance");
  return cov / std::sqrt(va * vb);
}

namespace {

// Average ranks for ties, 1-based.
std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman: series lengths disagree");
  return pearson_correlation(average_ranks(a), average_ranks(b));
}

CorrelationResult similarity_correlation(const PairDataset& pairs) {
  if (pairs.count() < 3) throw InputError("similarity_correlation: needs >= 3 pairs");
  if (!pairs.left.same_shape(pairs.right))
    throw ShapeError("similarity_correlation: left/right shapes disagree");
  std::vector<double> cosines(pairs.count());
  for (int i = 0; i < pairs.count(); ++i)
    cosines[i] = cosine_similarity(pairs.left.row(i), pairs.right.row(i), pairs.left.cols);
  return {pearson_correlation(cosines, pairs.targets),
          spearman_correlation(cosines, pairs.targets)};
}

std::vector<int> ensemble_predict(const std::vector<Mat<double>>& model_logprobs,
                                  const std::vector<double>& validation_scores) {
  if (model_logprobs.empty()) throw InputError("ensemble: needs >= 1 model");
  if (model_logprobs.size() != validation_scores.size())
    throw ShapeError("ensemble: one validation score per model required");
  double total = 0.0;
  for (double s : validation_scores) {
    if (!(s > 0)) throw ValueError("ensemble: validation scores must be positive");
    total += s;
  }
  const Mat<double>& first = model_logprobs[0];
  for (const auto& lp : model_logprobs)
    if (!lp.same_shape(first))
      throw ShapeError("ensemble: prediction matrices must share example and class axes");

  std::vector<int> pred(first.rows);
  for (int i = 0; i < first.rows; ++i) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < first.cols; ++c) {
      double s = 0.0;
      for (std::size_t m = 0; m < model_logprobs.size(); ++m)
        s += (validation_scores[m] / total) * model_logprobs[m].at(i, c);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    pred[i] = best;
  }
  return pred;
}

}  // namespace qt
