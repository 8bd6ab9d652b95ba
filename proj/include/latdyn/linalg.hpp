#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "latdyn/errors.hpp"

namespace latdyn {

using Vec = std::vector<double>;

// Dense row-major matrix. Training tensors use rows = batch.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw DimensionError(std::string(where) + ": shape mismatch (" +
                         std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
  }
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec& a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

// y = M x (row-major M)
inline Vec matvec(const Matrix& m, const Vec& x) {
  if (x.size() != m.cols)
    throw DimensionError("matvec: expected length " + std::to_string(m.cols) +
                         ", got " + std::to_string(x.size()));
  Vec y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* mr = m.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += mr[c] * x[c];
    y[r] = s;
  }
  return y;
}

}  // namespace latdyn
