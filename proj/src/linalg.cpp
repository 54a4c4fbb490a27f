#include "clab/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace clab {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix cholesky(const Matrix& spd) {
  if (spd.rows != spd.cols)
    throw std::runtime_error("cholesky of non-square matrix");
  const std::size_t n = spd.rows;
  Matrix lower(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= lower(i, k) * lower(j, k);
      if (i == j) {
        if (!(sum > 0.0))
          throw std::runtime_error("matrix is not positive definite");
        lower(i, i) = std::sqrt(sum);
      } else {
        lower(i, j) = sum / lower(j, j);
      }
    }
  }
  return lower;
}

std::vector<double> cholesky_solve(const Matrix& lower,
                                   std::span<const double> b) {
  const std::size_t n = lower.rows;
  if (b.size() != n) throw std::runtime_error("cholesky_solve size mismatch");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= lower(i, k) * y[k];
    y[i] = sum / lower(i, i);
  }
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) sum -= lower(k, ii) * x[k];
    x[ii] = sum / lower(ii, ii);
  }
  return x;
}

double trace(const Matrix& m) {
  if (m.rows != m.cols) throw std::runtime_error("trace of non-square matrix");
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) t += m(i, i);
  return t;
}

}  // namespace clab
