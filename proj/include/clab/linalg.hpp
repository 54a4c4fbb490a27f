#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace clab {

// Minimal dense row-major matrix; just enough for small covariance work.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a[i * cols + j];
  }
  bool operator==(const Matrix&) const = default;
};

// Lower-triangular Cholesky factor; throws std::runtime_error if the input
// is not symmetric positive definite.
Matrix cholesky(const Matrix& spd);

// Solves (L L^T) x = b given the lower factor L.
std::vector<double> cholesky_solve(const Matrix& lower,
                                   std::span<const double> b);

double trace(const Matrix& m);

}  // namespace clab
