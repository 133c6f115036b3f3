#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qt/mat.hpp"
#include "qt/rng.hpp"

namespace qt {

enum class SplitTag : std::int8_t { kTrain = 0, kDev = 1, kTest = 2 };

struct LabeledDataset {
  Mat<double> features;  // N x D
  std::vector<int> labels;
  std::optional<std::vector<SplitTag>> split;

  int count() const { return features.rows; }
  int num_classes() const;
  void validate() const;
  LabeledDataset subset(const std::vector<int>& rows) const;
};

struct PairDataset {
  Mat<double> left;   // N x D
  Mat<double> right;  // N x D
  std::vector<double> targets;

  int count() const { return left.rows; }
};

// Softmax regression weights over fixed features.
struct LinearProbe {
  Mat<double> weights;  // C x D
  std::vector<double> bias;
  double l2 = 0.0;
};

struct ProbeOptions {
  double lr = 0.01;
  int max_iters = 2000;
  double grad_tol = 1e-5;  // stop when the full-gradient L2 norm drops below
};

// Full-batch Adam on mean cross-entropy + (l2/2)||W||^2 (bias unregularized).
LinearProbe train_linear_probe(const LabeledDataset& train, double l2, std::uint64_t seed,
                               const ProbeOptions& opts = {});

// Per-iteration mean losses of the same optimization, for convergence checks.
std::vector<double> probe_loss_curve(const LabeledDataset& train, double l2, std::uint64_t seed,
                                     const ProbeOptions& opts = {});

Mat<double> probe_logprobs(const LinearProbe& probe, const Mat<double>& features);
std::vector<int> probe_predict(const LinearProbe& probe, const Mat<double>& features);
double probe_accuracy(const LinearProbe& probe, const LabeledDataset& data);

struct CvResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population std over fold accuracies
  std::vector<double> fold_accuracies;
  std::vector<double> chosen_l2;
};

inline const std::vector<double>& default_l2_grid() {
  static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  return grid;
}

// Seeded k-fold cross validation; fold sizes differ by at most one. Within
// each fold the l2 strength is picked on an inner 90/10 split of the
// training portion, then the probe is retrained on the full portion.
CvResult kfold_eval(const LabeledDataset& data, int k, const std::vector<double>& l2_grid,
                    std::uint64_t seed, const ProbeOptions& opts = {});

// Seeded fold assignment only (exposed for property tests).
std::vector<int> kfold_assignment(int n, int k, std::uint64_t seed);

// Evaluation against a predefined train/dev/test split: l2 picked on dev,
// accuracy reported on test.
struct SplitResult {
  double test_accuracy = 0.0;
  double chosen_l2 = 0.0;
};
SplitResult split_eval(const LabeledDataset& data, const std::vector<double>& l2_grid,
                       std::uint64_t seed, const ProbeOptions& opts = {});

enum class PairMode { kHeuristic, kConcatHeuristic };

// heuristic: [|u - v| ; u .* v]; concat+heuristic prepends [u ; v].
std::vector<double> pair_features(const std::vector<double>& u, const std::vector<double>& v,
                                  PairMode mode);
LabeledDataset pair_feature_dataset(const PairDataset& pairs, PairMode mode);

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

struct CorrelationResult {
  double pearson = 0.0;
  double spearman = 0.0;
};

// Correlation between the pairs' cosine similarities and their human scores.
CorrelationResult similarity_correlation(const PairDataset& pairs);

// Weighted vote over per-model class log-probabilities; weights are the
// validation scores normalized to sum to one.
std::vector<int> ensemble_predict(const std::vector<Mat<double>>& model_logprobs,
                                  const std::vector<double>& validation_scores);

}  // namespace qt
