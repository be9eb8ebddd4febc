#pragma once

#include <limits>
#include <vector>

#include "polyenergy/types.hpp"

namespace polyenergy {

// Which Schur form backs a factorization. The complex form gives the simplest
// substitution (scalar diagonal shifts); the real form halves the working-set
// bytes for large tensors and handles complex-pair 2x2 blocks by decoupling
// them through the block eigenvectors.
enum class SchurKind { Complex, Real };

// One-time Schur factorization of a square real matrix M, reused across all
// tensor degrees k. Also carries the spectrum and the block structure needed
// by the substitution recursions.
class SchurCache {
 public:
  SchurCache(const Matrix& M, SchurKind kind);

  Index dim() const { return n_; }
  SchurKind kind() const { return kind_; }
  const Matrix& matrix() const { return M_; }
  const ComplexVector& eigenvalues() const { return eigenvalues_; }
  double max_abs_eigenvalue() const { return max_abs_eig_; }

  // Pivot tolerance for degree k: a k-fold eigenvalue sum with modulus at or
  // below this is treated as a resonance.
  double resonance_tolerance(int k) const {
    return 1e-12 * static_cast<double>(k) * max_abs_eig_;
  }

  // Complex form accessors (kind() == Complex).
  const ComplexMatrix& unitary() const;
  const ComplexMatrix& triangular() const;

  // Real form accessors (kind() == Real).
  const Matrix& orthogonal() const;
  const Matrix& quasi_triangular() const;
  const ComplexMatrix& quasi_triangular_complex() const;
  // Start offsets of the diagonal blocks; sizes are 1 or 2 (complex pairs).
  const std::vector<Index>& block_starts() const;

 private:
  Matrix M_;
  SchurKind kind_;
  Index n_ = 0;
  ComplexMatrix U_, T_;        // complex form
  Matrix Ur_, Tr_;             // real form
  ComplexMatrix Tc_;           // Tr_ cast once, for the complexified recursion
  std::vector<Index> blocks_;  // real form diagonal block starts
  ComplexVector eigenvalues_;
  double max_abs_eig_ = 0.0;
};

SchurCache schur_factor(const Matrix& M, SchurKind kind = SchurKind::Complex);

// True when no k-fold sum of eigenvalues of M is within the resonance tolerance
// of zero. Fast path when the spectrum lies strictly in one open half plane;
// otherwise enumerates sums (up to ~1e8 combinations, ConfigError beyond).
bool check_solvability(const SchurCache& cache, int k);

struct KwaySettings {
  // Verify ||L_k(M)^T x - b|| <= tol_res * ||b|| matrix-free before returning.
  // Needs b, x and an accumulator alive at once (3 tensor-sized buffers); callers
  // that cannot afford the third buffer disable this and verify externally.
  bool verify_residual = true;
  double tol_res = 1e-8;
  // Accepted imaginary leakage when extracting the real solution (complex path).
  double imag_tol = 1e-10;
};

struct KwaySolveInfo {
  double rel_residual = std::numeric_limits<double>::quiet_NaN();
};

// Solve L_k(M)^T x = b where L_k(M) = sum_j I (x) ... (x) M(slot j) (x) ... (x) I
// with k slots, via the cached Schur form: transform the right-hand side one
// mode at a time, run the recursive substitution with accumulated diagonal
// shifts, transform back. b is taken by value: moving it in lets the solver run
// with two tensor-sized work buffers (plus an n^(k-1) scratch on the real path).
// Throws ResonanceError on (near-)singular pivots and AccuracyError when a
// requested verification fails.
Vector solve_kway(const SchurCache& cache, int k, Vector b,
                  KwaySolveInfo* info = nullptr, const KwaySettings& settings = {});

}  // namespace polyenergy
