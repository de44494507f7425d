#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bliss {

// Dense row-major matrix of 64-bit reals. One container serves features,
// embeddings, and layer parameters.
struct Matrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  double& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
  double at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
  double* row(std::int64_t r) { return data.data() + r * cols; }
  const double* row(std::int64_t r) const { return data.data() + r * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// c = a * b, shapes (m,k)x(k,n)
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a^T * b, shapes (k,m)x(k,n)
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// c = a * b^T, shapes (m,k)x(n,k)
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& m);

inline double row_norm_sq(const Matrix& m, std::int64_t r) {
  double s = 0.0;
  const double* p = m.row(r);
  for (std::int64_t c = 0; c < m.cols; ++c) s += p[c] * p[c];
  return s;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

}  // namespace bliss
