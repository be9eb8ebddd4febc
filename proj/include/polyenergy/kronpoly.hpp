#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "polyenergy/types.hpp"

namespace polyenergy {

// Coefficient of one homogeneous term of a polynomial in Kronecker form: a vector
// v of length dim^order representing v^T x^(order-fold Kronecker power of x).
// Linearization convention everywhere: the FIRST tensor factor varies SLOWEST,
// i.e. entry a corresponds to the multi-index (i1,...,ik) with
// a = i1*n^(k-1) + i2*n^(k-2) + ... + ik (0-based digits).
struct KCoeff {
  int order = 0;   // k >= 1
  Index dim = 0;   // n >= 1
  Vector data;     // length n^k
  bool symmetric = false;  // set by symmetrize(); required by poly_grad

  KCoeff() = default;
  KCoeff(int k, Index n, Vector values, bool is_sym = false);

  std::int64_t size() const { return data.size(); }

  // Matricization: the n x n^(k-1) matrix V with vec(V) = data (column major),
  // so row g holds the entries whose trailing multi-index digit is g. For
  // symmetric coefficients every mode is interchangeable, making this the V_k
  // whose products V_k^T B appear in the energy recurrences.
  Eigen::Map<const Matrix> matricized() const;

  // Throws DimensionError/ConfigError if order, dim and data length disagree.
  void validate() const;
};

// a = i1*n^(k-1) + ... + ik for 0-based indices. idx.size() determines k.
std::int64_t linearize_index(const std::vector<int>& idx, Index n);

// Inverse of linearize_index; returns k digits, first factor slowest.
std::vector<int> unlinearize_index(std::int64_t a, int k, Index n);

// x^{(k)} = x (x) x (x) ... (x) x, k-fold Kronecker power. k >= 1.
Vector kron_power(const Vector& x, int k);

// Permutation realizing transposition through vec: for A of shape p x q (column
// major), vec(A^T)[i] = vec(A)[perm[i]]. Returned as an index map of length p*q.
std::vector<std::int64_t> perfect_shuffle(Index p, Index q);

// Symmetrize a Kronecker coefficient: average over all permutations of each
// multi-index orbit. Value-preserving (same polynomial), idempotent, and exact
// on already-symmetric input (entries pass through untouched).
KCoeff symmetrize(const KCoeff& v);

// In-place variant used for large tensors; sets v.symmetric = true.
void symmetrize_in_place(KCoeff& v);

// Spot-check Definition-style symmetry: `checks` random (multi-index, permutation)
// pairs compared entrywise within tol * max|v|. Exhaustive when checks <= 0 and
// the tensor is small.
bool is_symmetric(const KCoeff& v, int checks, std::uint64_t seed,
                  double tol = 1e-12);

// Evaluate 1/2 * sum_k v_k^T x^{(k)} without forming Kronecker powers
// (successive last-mode contractions). Coefficients need not be symmetric.
double poly_eval(const std::vector<KCoeff>& coeffs, const Vector& x);

// Gradient of poly_eval. Requires every coefficient to be flagged symmetric
// (grad of 1/2 v_k^T x^(k) = (k/2) V_k x^(k-1) only holds then); otherwise
// throws ConfigError.
Vector poly_grad(const std::vector<KCoeff>& coeffs, const Vector& x);

// A linear map used as one slot of a Kronecker product: F of shape n x q where
// q = n^p for drift factors (p >= 1). Implementations supply dense row blocks
// without materializing F when it has exploitable structure.
class KronFactor {
 public:
  virtual ~KronFactor() = default;
  virtual Index rows() const = 0;  // n
  virtual Index cols() const = 0;  // q
  // out += scale * W * F, with W: b x n, out: b x q.
  virtual void add_right_product(Eigen::Ref<Matrix> out,
                                 const Eigen::Ref<const Matrix>& W,
                                 double scale) const = 0;
  // out += scale * F^T * W, with W: n x c, out: q x c.
  virtual void add_left_tproduct(Eigen::Ref<Matrix> out,
                                 const Eigen::Ref<const Matrix>& W,
                                 double scale) const = 0;
  // F * v for a vector v of length cols().
  virtual Vector apply(const Vector& v) const = 0;
  // Dense materialization (oracle/tests; guarded by callers for big sizes).
  virtual Matrix dense() const = 0;
};

// Plain dense matrix factor.
class DenseKronFactor final : public KronFactor {
 public:
  explicit DenseKronFactor(Matrix F) : F_(std::move(F)) {}
  Index rows() const override { return F_.rows(); }
  Index cols() const override { return F_.cols(); }
  void add_right_product(Eigen::Ref<Matrix> out, const Eigen::Ref<const Matrix>& W,
                         double scale) const override;
  void add_left_tproduct(Eigen::Ref<Matrix> out, const Eigen::Ref<const Matrix>& W,
                         double scale) const override;
  Vector apply(const Vector& v) const override { return F_ * v; }
  Matrix dense() const override { return F_; }
  const Matrix& matrix() const { return F_; }

 private:
  Matrix F_;
};

// L_i(F)^T v for F: n x n^p with i slots, i.e.
//   sum_{j=1..i} (I_{n^(j-1)} (x) F (x) I_{n^(i-j)})^T v,
// returning a vector of length n^(i+p-1). Requires i >= 2 and p >= 2 (the form
// the energy recurrences consume); use the accumulating primitive below for
// other slot counts.
Vector lyap_mult_t(const Matrix& F, const KCoeff& v);
Vector lyap_mult_t(const KronFactor& F, const KCoeff& v);

// Dense k-way Lyapunov operator L_k(M) = sum_j I (x) ... (x) M(slot j) (x) ... (x) I
// for M: n x q. Output shape n^k x (n^(k-1) * q). Guarded: refuses results with
// more than max_entries entries. Oracle / small-problem use.
Matrix dense_kway_lyap(const Matrix& M, int k,
                       std::int64_t max_entries = 10'000'000);

namespace detail {

// out += scale * (I_a (x) F^T (x) I_b) w, where F is rows x cols, w has length
// a*rows*b and out has length a*cols*b. The building block of lyap_mult_t and of
// the matrix-free residual checks (no temporaries of tensor size).
void add_kron_slot_t(const KronFactor& F, const double* w, double* out, Index a,
                     Index b, double scale);

// out += scale * L_i(F)^T v for any i >= 1 (no public-precondition gate).
void add_lyap_mult_t(const KronFactor& F, const KCoeff& v, double scale,
                     double* out, std::int64_t out_size);

// Contract the LAST tensor mode with x: given w of length n^j (viewed as
// n^(j-1) x n blocks of length n each... block layout: trailing index fastest),
// returns w' of length n^(j-1) with w'[alpha] = sum_g w[alpha*n+g] x[g].
Vector contract_last_mode(const Vector& w, Index n, const Vector& x);

}  // namespace detail

}  // namespace polyenergy
