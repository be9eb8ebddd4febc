#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Sparse>

#include <map>
#include <memory>

#include "polyenergy/kronpoly.hpp"
#include "polyenergy/types.hpp"

namespace polyenergy {

using SparseTensor = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

// One homogeneous drift coefficient F_p (n x n^p), either a dense matrix or the
// factored form M^{-1} G with G sparse and M symmetric positive definite (the
// Galerkin case, where materializing M^{-1} G densely is impossible at scale).
class DriftTerm {
 public:
  static DriftTerm dense(int order, Matrix F);
  static DriftTerm mass_solve_sparse(int order, SparseTensor G,
                                     std::shared_ptr<const Eigen::LLT<Matrix>> mass);

  int order() const { return order_; }
  Index state_dim() const { return factor_->rows(); }
  const KronFactor& factor() const { return *factor_; }

  // F_p * xp where xp is an already-formed Kronecker power of length n^p.
  Vector apply_power(const Vector& xp) const;

  // Guarded dense materialization (tests, small systems).
  Matrix dense_matrix(std::int64_t max_entries = 10'000'000) const;

  // Non-null only for the factored sparse form; used by serialization.
  const SparseTensor* sparse_gram() const;

 private:
  DriftTerm(int order, std::shared_ptr<const KronFactor> factor)
      : order_(order), factor_(std::move(factor)) {}
  int order_ = 0;
  std::shared_ptr<const KronFactor> factor_;
};

// Control-affine dynamics with polynomial drift:
//   x' = A x + sum_p F_p x^{(p)} + B u,   y = C x.
struct PolyDynamics {
  Matrix A;                       // n x n
  Matrix B;                       // n x m
  Matrix C;                       // p_out x n
  std::map<int, DriftTerm> drift; // keyed by order p >= 2

  Index n() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
  Index output_dim() const { return C.rows(); }
  int max_drift_order() const;

  void validate() const;

  // Drift vector field f(x) = A x + sum_p F_p x^{(p)}.
  Vector f(const Vector& x) const;
};

}  // namespace polyenergy
