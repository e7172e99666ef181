#pragma once

#include <span>

#include "dprt/mathutil.hpp"

namespace dprt::nn {

/// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  Vec a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

  /// y = M x
  Vec multiply(std::span<const double> x) const {
    Vec y(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      const double* row = a.data() + static_cast<size_t>(r) * cols;
      double s = 0.0;
      for (int c = 0; c < cols; ++c) s += row[c] * x[c];
      y[r] = s;
    }
    return y;
  }

  /// y = M^T x
  Vec multiply_transposed(std::span<const double> x) const {
    Vec y(cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      const double* row = a.data() + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) y[c] += row[c] * x[r];
    }
    return y;
  }

  /// M += u v^T
  void add_outer(std::span<const double> u, std::span<const double> v) {
    for (int r = 0; r < rows; ++r) {
      double* row = a.data() + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) row[c] += u[r] * v[c];
    }
  }
};

inline void add_scaled(Vec& y, std::span<const double> x, double s) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

}  // namespace dprt::nn
