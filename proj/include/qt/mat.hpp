#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qt/errors.hpp"
#include "qt/rng.hpp"

namespace qt {

// Dense row-major matrix. float for training, double for gradient checking.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(int r, int c, T fill = T(0)) : rows(r), cols(c) {
    if (r < 1 || c < 1) throw ShapeError("Mat: rows and cols must be >= 1");
    data.assign(static_cast<std::size_t>(r) * c, fill);
  }

  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  T* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const T* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  void fill(T v) { data.assign(data.size(), v); }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

inline std::string shape_str(int r, int c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

namespace detail {

// Forking a parallel region costs more than this much per-element work.
constexpr std::size_t kParallelGrain = 1 << 15;

template <typename T>
void check_matmul(const Mat<T>& a, const Mat<T>& b, int ak, int bk, const char* name) {
  if (ak != bk)
    throw ShapeError(std::string(name) + ": inner dimensions disagree, " +
                     shape_str(a.rows, a.cols) + " vs " + shape_str(b.rows, b.cols));
}

}  // namespace detail

// Serial reference kernels. These spell out the exact element order the
// OpenMP kernels must reproduce; tests assert bit-identical outputs.
namespace serial {

template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  detail::check_matmul(a, b, a.cols, b.rows, "matmul");
  Mat<T> c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    T* ci = c.row(i);
    const T* ai = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const T aik = ai[k];
      const T* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// a * b^T
template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
  detail::check_matmul(a, b, a.cols, b.cols, "matmul_nt");
  Mat<T> c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const T* ai = a.row(i);
    T* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const T* bj = b.row(j);
      T acc = T(0);
      for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
  return c;
}

// a^T * b
template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b) {
  detail::check_matmul(a, b, a.rows, b.rows, "matmul_tn");
  Mat<T> c(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i) {
    T* ci = c.row(i);
    for (int k = 0; k < a.rows; ++k) {
      const T aki = a.at(k, i);
      const T* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

template <typename T>
Mat<T> softmax_rows(const Mat<T>& s) {
  Mat<T> p(s.rows, s.cols);
  for (int i = 0; i < s.rows; ++i) {
    const T* si = s.row(i);
    T* pi = p.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < s.cols; ++j)
      if (si[j] > mx) mx = si[j];
    if (!(mx > -std::numeric_limits<T>::infinity()))
      throw DegenerateError("softmax_rows: row " + std::to_string(i) + " fully masked");
    T sum = T(0);
    for (int j = 0; j < s.cols; ++j) {
      // exp(-inf - mx) underflows to exactly 0: masked entries get zero mass.
      pi[j] = std::exp(si[j] - mx);
      sum += pi[j];
    }
    for (int j = 0; j < s.cols; ++j) pi[j] /= sum;
  }
  return p;
}

}  // namespace serial

// OpenMP kernels. Each output element is accumulated sequentially by a single
// thread in the same k order as the serial versions, so results are
// bit-identical to qt::serial regardless of thread count.

template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  detail::check_matmul(a, b, a.cols, b.rows, "matmul");
  Mat<T> c(a.rows, b.cols);
  const std::size_t work = static_cast<std::size_t>(a.rows) * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > detail::kParallelGrain)
  for (int i = 0; i < a.rows; ++i) {
    T* ci = c.row(i);
    const T* ai = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const T aik = ai[k];
      const T* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
  detail::check_matmul(a, b, a.cols, b.cols, "matmul_nt");
  Mat<T> c(a.rows, b.rows);
  const std::size_t work = static_cast<std::size_t>(a.rows) * a.cols * b.rows;
#pragma omp parallel for schedule(static) if (work > detail::kParallelGrain)
  for (int i = 0; i < a.rows; ++i) {
    const T* ai = a.row(i);
    T* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const T* bj = b.row(j);
      T acc = T(0);
      for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
  return c;
}

template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b) {
  detail::check_matmul(a, b, a.rows, b.rows, "matmul_tn");
  Mat<T> c(a.cols, b.cols);
  const std::size_t work = static_cast<std::size_t>(a.rows) * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > detail::kParallelGrain)
  for (int i = 0; i < a.cols; ++i) {
    T* ci = c.row(i);
    for (int k = 0; k < a.rows; ++k) {
      const T aki = a.at(k, i);
      const T* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

// Row-stabilized softmax. -inf entries act as a mask and receive exactly
// zero probability; a fully masked row is an error.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& s) {
  Mat<T> p(s.rows, s.cols);
  int bad_row = -1;
  const std::size_t work = s.size();
#pragma omp parallel for schedule(static) if (work > detail::kParallelGrain)
  for (int i = 0; i < s.rows; ++i) {
    const T* si = s.row(i);
    T* pi = p.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < s.cols; ++j)
      if (si[j] > mx) mx = si[j];
    if (!(mx > -std::numeric_limits<T>::infinity())) {
#pragma omp critical
      bad_row = i;
      continue;
    }
    T sum = T(0);
    for (int j = 0; j < s.cols; ++j) {
      pi[j] = std::exp(si[j] - mx);
      sum += pi[j];
    }
    for (int j = 0; j < s.cols; ++j) pi[j] /= sum;
  }
  if (bad_row >= 0)
    throw DegenerateError("softmax_rows: row " + std::to_string(bad_row) + " fully masked");
  return p;
}

enum class InitScheme { kXavierUniform, kUniform, kZeros, kOnes };

// Draws happen in row-major element order, one per entry, so a given RngState
// yields a bit-identical matrix everywhere.
template <typename T>
Mat<T> init(int rows, int cols, InitScheme scheme, Rng& rng, double lo = 0.0, double hi = 0.0) {
  Mat<T> m(rows, cols);
  switch (scheme) {
    case InitScheme::kZeros:
      break;
    case InitScheme::kOnes:
      m.fill(T(1));
      break;
    case InitScheme::kXavierUniform: {
      const double bound = std::sqrt(6.0 / (rows + cols));
      for (auto& v : m.data) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case InitScheme::kUniform: {
      if (!(lo < hi)) throw ValueError("init: uniform requires lo < hi");
      for (auto& v : m.data) v = static_cast<T>(rng.uniform(lo, hi));
      break;
    }
  }
  return m;
}

template <typename T>
void add_inplace(Mat<T>& a, const Mat<T>& b) {
  if (!a.same_shape(b))
    throw ShapeError("add_inplace: " + shape_str(a.rows, a.cols) + " vs " +
                     shape_str(b.rows, b.cols));
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

}  // namespace qt
