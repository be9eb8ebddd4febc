#pragma once

// Shared helpers for the test suites: seeded random data, a dense Kronecker
// product oracle, and a log-log slope fit.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "polyenergy/types.hpp"

namespace testutil {

using polyenergy::Index;
using polyenergy::Matrix;
using polyenergy::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> gauss;
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = gauss(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> gauss;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

// Random matrix shifted so its spectral abscissa is -margin (Hurwitz).
inline Matrix random_stable(std::mt19937_64& rng, Index n, double margin = 0.5) {
  Matrix m = random_matrix(rng, n, n);
  const double abscissa = Eigen::EigenSolver<Matrix>(m, false).eigenvalues().real().maxCoeff();
  m.diagonal().array() -= abscissa + margin;
  return m;
}

// Seed-taking conveniences for one-shot draws.
inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_matrix(rng, rows, cols);
}

inline Vector random_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_vector(rng, n);
}

inline Matrix random_stable(Index n, std::uint64_t seed, double margin = 0.5) {
  std::mt19937_64 rng(seed);
  return random_stable(rng, n, margin);
}

inline Matrix dense_kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix identity(Index n) { return Matrix::Identity(n, n); }

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace testutil
