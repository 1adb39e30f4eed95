#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "darol/common.hpp"

namespace darol::numerics {

// Dense row-major matrix. Small problems only; everything is O(n^3)-naive
// on purpose.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  bool empty() const { return rows == 0 || cols == 0; }
};

inline Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

inline Matrix diagonal(const Vec& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

inline bool all_finite(const Matrix& m) { return darol::all_finite(m.data); }

inline Vec matvec(const Matrix& a, const Vec& x) {
  Vec y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

// y = A^T x
inline Vec matvec_t(const Matrix& a, const Vec& x) {
  Vec y(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += a(i, j) * x[i];
  }
  return y;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data) s += x * x;
  return std::sqrt(s);
}

inline Vec column(const Matrix& a, std::size_t j) {
  Vec c(a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) c[i] = a(i, j);
  return c;
}

inline Matrix select_columns(const Matrix& a, const std::vector<std::size_t>& idx) {
  Matrix s(a.rows, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (std::size_t i = 0; i < a.rows; ++i) s(i, j) = a(i, idx[j]);
  }
  return s;
}

}  // namespace darol::numerics
