#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace polyenergy {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

// Which energy function a quantity belongs to. Past is the controllability-type
// function (anti-stabilizing Riccati branch), Future the observability-type one.
enum class EnergyKind { Past, Future };

inline const char* to_string(EnergyKind kind) {
  return kind == EnergyKind::Past ? "past" : "future";
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible sizes between operands (matrix/vector/tensor shapes).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument values (bad degree, eta out of range, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The requested gain level is not achievable: Hamiltonian eigenvalues on the
// imaginary axis, wrong invariant subspace dimension, or a non-Hurwitz closed loop.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A k-fold eigenvalue sum of the closed-loop matrix is (numerically) zero, so the
// coefficient linear system is singular.
class ResonanceError : public Error {
 public:
  using Error::Error;
};

// A solve finished but its verified residual exceeds the accepted tolerance.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

// Underlying dense factorization failed to converge or produced unusable output.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

// File format or filesystem problems in the coefficient/model readers and writers.
class IoError : public Error {
 public:
  using Error::Error;
};

// base^exp for tensor sizing, with overflow detection. exp >= 0.
inline std::int64_t ipow(std::int64_t base, int exp) {
  if (exp < 0) throw ConfigError("ipow: negative exponent");
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > std::numeric_limits<std::int64_t>::max() / base)
      throw ConfigError("ipow: size overflow (" + std::to_string(base) + "^" +
                        std::to_string(exp) + ")");
    r *= base;
  }
  return r;
}

}  // namespace polyenergy
