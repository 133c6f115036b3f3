#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qt/errors.hpp"
#include "qt/mat.hpp"
#include "qt/model.hpp"

namespace qt {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables global-norm clipping

  void validate() const {
    if (!(lr > 0)) throw ValueError("adam: lr must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw ValueError("adam: betas must lie in [0, 1)");
    if (!(eps > 0)) throw ValueError("adam: eps must be positive");
    if (clip_norm < 0) throw ValueError("adam: clip threshold must be >= 0");
  }
};

// Dense Adam with bias correction. Moments follow each tensor's full shape;
// embedding rows that received no gradient this step still decay their
// moments, exactly as the textbook update reads.
template <typename T>
class Adam {
 public:
  Adam(AdamConfig cfg, std::vector<TensorRef<T>> bindings) : cfg_(cfg) {
    cfg_.validate();
    bind(std::move(bindings));
  }

  void bind(std::vector<TensorRef<T>> bindings) {
    bindings_ = std::move(bindings);
    if (m_.empty()) {
      for (const auto& ref : bindings_) {
        m_.emplace_back(ref.value->rows, ref.value->cols);
        v_.emplace_back(ref.value->rows, ref.value->cols);
      }
    } else if (m_.size() != bindings_.size()) {
      throw ShapeError("adam: binding count changed");
    }
  }

  std::int64_t step_count() const { return t_; }

  // Aborts (throws, mutating nothing) on non-finite gradients.
  void step(const std::vector<Mat<T>>& grads) {
    if (grads.size() != bindings_.size())
      throw ShapeError("adam: got " + std::to_string(grads.size()) + " gradients for " +
                       std::to_string(bindings_.size()) + " tensors");
    double sq_norm = 0.0;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      if (!grads[k].same_shape(*bindings_[k].value))
        throw ShapeError("adam: gradient shape mismatch for tensor " + bindings_[k].name);
      if (bindings_[k].frozen) continue;
      for (const T gv : grads[k].data) {
        const double g = static_cast<double>(gv);
        if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in " + bindings_[k].name);
        sq_norm += g * g;
      }
    }

    T scale = T(1);
    if (cfg_.clip_norm > 0.0) {
      const double norm = std::sqrt(sq_norm);
      if (norm > cfg_.clip_norm) scale = static_cast<T>(cfg_.clip_norm / norm);
    }

    ++t_;
    const T lr = static_cast<T>(cfg_.lr);
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T eps = static_cast<T>(cfg_.eps);
    const T corr1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T corr2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));

    for (std::size_t k = 0; k < bindings_.size(); ++k) {
      if (bindings_[k].frozen) continue;
      Mat<T>& p = *bindings_[k].value;
      Mat<T>& m = m_[k];
      Mat<T>& v = v_[k];
      const Mat<T>& g = grads[k];
      const std::int64_t n = static_cast<std::int64_t>(p.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < n; ++i) {
        const T gi = g.data[i] * scale;
        m.data[i] = b1 * m.data[i] + (T(1) - b1) * gi;
        v.data[i] = b2 * v.data[i] + (T(1) - b2) * gi * gi;
        const T mhat = m.data[i] / corr1;
        const T vhat = v.data[i] / corr2;
        p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  const std::vector<Mat<T>>& first_moments() const { return m_; }
  const std::vector<Mat<T>>& second_moments() const { return v_; }

  // Restores a serialized state (moment tensors aligned with the bindings).
  void restore(std::vector<Mat<T>> m, std::vector<Mat<T>> v, std::int64_t t) {
    if (m.size() != bindings_.size() || v.size() != bindings_.size())
      throw ShapeError("adam: restored state does not match bindings");
    for (std::size_t k = 0; k < bindings_.size(); ++k)
      if (!m[k].same_shape(*bindings_[k].value) || !v[k].same_shape(*bindings_[k].value))
        throw ShapeError("adam: restored moment shape mismatch for " + bindings_[k].name);
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<TensorRef<T>> bindings_;
  std::vector<Mat<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace qt
