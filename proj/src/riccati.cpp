#include "polyenergy/riccati.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <sstream>

#include "polyenergy/kway_solver.hpp"

namespace polyenergy {

namespace {

using Complex = std::complex<double>;

std::string fmt_sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

void validate_shapes(const Matrix& A, const Matrix& B, const Matrix& C, double eta) {
  if (A.rows() != A.cols()) throw DimensionError("riccati: A must be square");
  if (A.rows() < 1) throw DimensionError("riccati: empty system");
  if (B.rows() != A.rows()) throw DimensionError("riccati: B row count != state dim");
  if (C.cols() != A.rows()) throw DimensionError("riccati: C column count != state dim");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite())
    throw ConfigError("riccati: non-finite entries");
  if (eta == 0.0) throw ConfigError("riccati: eta must be nonzero (gamma = 1 is excluded)");
  if (eta > 1.0) throw ConfigError("riccati: eta must be at most 1 (eta = 1 - gamma^{-2})");
}

// Applies the 2x2 unitary Q = [[u0, -conj(u1)], [u1, conj(u0)]] as a similarity
// on rows/columns (p, p+1) of T and on the columns of U, then clears the
// subdiagonal entry it annihilates by construction.
void apply_swap_rotation(ComplexMatrix& T, ComplexMatrix& U, Index p, Complex u0,
                         Complex u1) {
  const Index m = T.rows();
  Eigen::Matrix2cd Q;
  Q << u0, -std::conj(u1), u1, std::conj(u0);
  T.block(0, p, m, 2) = T.block(0, p, m, 2) * Q;
  T.block(p, 0, 2, m) = Q.adjoint() * T.block(p, 0, 2, m);
  U.block(0, p, m, 2) = U.block(0, p, m, 2) * Q;
  T(p + 1, p) = Complex(0.0, 0.0);
}

// Moves the eigenvalues selected by `keep` to the leading diagonal of the
// complex Schur pair (T, U) with unitary 2x2 similarity swaps of adjacent
// diagonal entries. Eigen ships no reordering for Schur forms.
template <class Pred>
void reorder_schur(ComplexMatrix& T, ComplexMatrix& U, Pred keep) {
  const Index m = T.rows();
  Index target = 0;
  for (Index i = 0; i < m; ++i) {
    if (!keep(T(i, i))) continue;
    for (Index j = i; j > target; --j) {
      // Swap T(j-1, j-1) and T(j, j). The unitary Q with first column along the
      // in-block eigenvector of the trailing eigenvalue upper-triangularizes
      // the 2x2 block with the diagonal exchanged.
      const Index p = j - 1;
      const Complex a = T(p, p), b = T(p, p + 1), c = T(p + 1, p + 1);
      const Complex v0 = b, v1 = c - a;
      const double nrm = std::sqrt(std::norm(v0) + std::norm(v1));
      if (nrm == 0.0) continue;  // equal eigenvalues, defective direction: nothing to move
      apply_swap_rotation(T, U, p, v0 / nrm, v1 / nrm);
    }
    ++target;
  }
}

struct HalfPlaneSplit {
  Index positive = 0;
  Index negative = 0;
  double min_abs_re = std::numeric_limits<double>::infinity();
};

HalfPlaneSplit split_spectrum(const ComplexMatrix& T) {
  HalfPlaneSplit s;
  for (Index i = 0; i < T.rows(); ++i) {
    const double re = T(i, i).real();
    s.min_abs_re = std::min(s.min_abs_re, std::abs(re));
    (re > 0.0 ? s.positive : s.negative) += 1;
  }
  return s;
}

Matrix riccati_residual(const Matrix& A, const Matrix& B, const Matrix& C,
                        double eta, EnergyKind kind, const Matrix& X) {
  Matrix R = A.transpose() * X + X * A;
  const Matrix BtX = B.transpose() * X;
  if (kind == EnergyKind::Past)
    R += BtX.transpose() * BtX - eta * (C.transpose() * C);
  else
    R += -eta * (BtX.transpose() * BtX) + C.transpose() * C;
  return R;
}

double relative_denominator(const Matrix& A, const Matrix& B, const Matrix& C,
                            double eta, const Matrix& X) {
  const double xn = X.norm();
  return A.norm() * xn + std::abs(eta) * C.squaredNorm() + B.squaredNorm() * xn * xn;
}

Matrix closed_loop_of(const Matrix& A, const Matrix& B, double eta,
                      EnergyKind kind, const Matrix& X) {
  if (kind == EnergyKind::Past) return A + B * (B.transpose() * X);
  return A - eta * (B * (B.transpose() * X));
}

// One Newton step: solve A_cl^T D + D A_cl = -R on the current closed loop and
// update X. Reuses the tensor solver at degree 2.
Matrix newton_step(const Matrix& closed_loop, const Matrix& R) {
  const Index n = closed_loop.rows();
  Matrix Rs = 0.5 * (R + R.transpose());
  Vector rhs = -Eigen::Map<const Vector>(Rs.data(), n * n);
  SchurCache cache(closed_loop, SchurKind::Complex);
  Vector d = solve_kway(cache, 2, std::move(rhs));
  Matrix D = Eigen::Map<const Matrix>(d.data(), n, n);
  return 0.5 * (D + D.transpose());
}

// Extracts the invariant subspace of the Hamiltonian for the requested branch
// and solves the graph relation for the (symmetrized) candidate solution.
Matrix branch_subspace_solution(const Matrix& A, const Matrix& B,
                                const Matrix& C, double eta, EnergyKind kind) {
  const Index n = A.rows();

  Matrix H(2 * n, 2 * n);
  if (kind == EnergyKind::Past) {
    H << A, B * B.transpose(), eta * (C.transpose() * C), -A.transpose();
  } else {
    H << A, -eta * (B * B.transpose()), -(C.transpose() * C), -A.transpose();
  }

  Eigen::ComplexSchur<ComplexMatrix> cs(H.cast<Complex>());
  if (cs.info() != Eigen::Success)
    throw FactorizationError("riccati: Hamiltonian Schur iteration failed");
  ComplexMatrix T = cs.matrixT();
  ComplexMatrix U = cs.matrixU();

  const double eig_scale = T.diagonal().cwiseAbs().maxCoeff();
  const double axis_tol = 100.0 * std::numeric_limits<double>::epsilon() *
                          std::max(eig_scale, 1.0);
  const HalfPlaneSplit split = split_spectrum(T);
  if (split.min_abs_re <= axis_tol)
    throw InfeasibleError(
        "riccati: Hamiltonian eigenvalue within " + fmt_sci(axis_tol) +
        " of the imaginary axis; the requested gain level is not achievable");
  if (split.positive != n || split.negative != n)
    throw InfeasibleError("riccati: Hamiltonian half-plane split is " +
                          std::to_string(split.positive) + "/" +
                          std::to_string(split.negative) + ", expected " +
                          std::to_string(n) + "/" + std::to_string(n));

  const bool want_positive = (kind == EnergyKind::Past);
  reorder_schur(T, U, [&](Complex lambda) {
    return want_positive ? lambda.real() > 0.0 : lambda.real() < 0.0;
  });

  const ComplexMatrix Z1 = U.topLeftCorner(n, n);
  const ComplexMatrix Z2 = U.bottomLeftCorner(n, n);
  // The graph solve can be violently ill conditioned: on stiff convective
  // problems the anti-stabilizing solution norm (and with it cond(Z1)) grows
  // rapidly with the state dimension, tripping any pivot-based rank gate long
  // before the computed solution actually degrades. Solve through it and gate
  // on the verified outcome (residual, definiteness, closed-loop half plane)
  // instead; only a structurally degenerate basis is rejected here.
  Eigen::FullPivLU<ComplexMatrix> lu(Z1.transpose());
  if (lu.rank() == 0)
    throw InfeasibleError(
        "riccati: invariant subspace is not the graph of a matrix (the "
        "selected branch does not define a solution)");
  const ComplexMatrix Xc = lu.solve(Z2.transpose()).transpose();
  if (!Xc.allFinite())
    throw InfeasibleError(
        "riccati: invariant subspace is not the graph of a matrix (the "
        "selected branch does not define a solution)");
  // Symmetrize into fresh storage: assigning 0.5 (X + X^T) back onto X would
  // alias the transposed read and leave the result slightly asymmetric.
  const Matrix Xr = Xc.real();
  return 0.5 * (Xr + Xr.transpose());
}

// Residual bookkeeping, Newton polishing, and solution verification shared by
// the direct and dual-form routes.
RiccatiSolution finish_solution(const Matrix& A, const Matrix& B,
                                const Matrix& C, double eta, EnergyKind kind,
                                const RiccatiOptions& opts, Matrix X) {
  RiccatiSolution sol;
  sol.X = std::move(X);
  Matrix R = riccati_residual(A, B, C, eta, kind, sol.X);
  sol.residual_abs = R.norm();
  double den = relative_denominator(A, B, C, eta, sol.X);
  sol.residual_rel = den > 0.0 ? sol.residual_abs / den : sol.residual_abs;

  for (int step = 0; step < opts.max_refine && sol.residual_rel > opts.residual_tol;
       ++step) {
    const Matrix cl = closed_loop_of(A, B, eta, kind, sol.X);
    const Matrix Xu = sol.X + newton_step(cl, R);
    const Matrix Xn = 0.5 * (Xu + Xu.transpose());
    const Matrix Rn = riccati_residual(A, B, C, eta, kind, Xn);
    const double den_n = relative_denominator(A, B, C, eta, Xn);
    const double rel_n = den_n > 0.0 ? Rn.norm() / den_n : Rn.norm();
    if (rel_n >= sol.residual_rel) break;  // no further improvement
    sol.X = Xn;
    R = Rn;
    sol.residual_abs = Rn.norm();
    sol.residual_rel = rel_n;
    sol.newton_steps = step + 1;
  }

  sol.closed_loop = closed_loop_of(A, B, eta, kind, sol.X);

  if (opts.check_solution) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sol.X);
    if (es.info() != Eigen::Success)
      throw FactorizationError("riccati: eigendecomposition of the solution failed");
    const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
      throw InfeasibleError("riccati: solution is not positive semidefinite "
                            "(min eigenvalue " +
                            fmt_sci(es.eigenvalues().minCoeff()) + ")");
    Eigen::EigenSolver<Matrix> cl_eig(sol.closed_loop, false);
    if (cl_eig.info() != Eigen::Success)
      throw FactorizationError("riccati: closed-loop eigendecomposition failed");
    const double margin = 1e-12 * std::max(sol.closed_loop.norm(), 1.0);
    const double max_re = cl_eig.eigenvalues().real().maxCoeff();
    const double min_re = cl_eig.eigenvalues().real().minCoeff();
    if (kind == EnergyKind::Past ? (min_re < margin) : (max_re > -margin))
      throw InfeasibleError(std::string("riccati: closed loop is not ") +
                            (kind == EnergyKind::Past ? "anti-stable" : "Hurwitz") +
                            " (critical real part " +
                            fmt_sci(kind == EnergyKind::Past ? min_re : max_re) + ")");
  }
  return sol;
}

RiccatiSolution solve_hinf_riccati(const Matrix& A, const Matrix& B,
                                   const Matrix& C, double eta, EnergyKind kind,
                                   const RiccatiOptions& opts) {
  validate_shapes(A, B, C, eta);
  try {
    return finish_solution(A, B, C, eta, kind, opts,
                           branch_subspace_solution(A, B, C, eta, kind));
  } catch (const InfeasibleError& direct_err) {
    // The inverse of the sought solution satisfies the equation of the other
    // kind on the transposed data (multiply the equation by X^{-1} on both
    // sides), and the branch correspondence flips stabilizing and
    // anti-stabilizing. That dual graph is well conditioned exactly when the
    // direct one is nearly singular, so a failed direct solve can often be
    // recovered by inverting the dual factor. A singular dual factor means
    // the solution itself is unbounded or indefinite at working precision.
    const EnergyKind dual =
        (kind == EnergyKind::Past) ? EnergyKind::Future : EnergyKind::Past;
    Matrix P;
    try {
      P = branch_subspace_solution(A.transpose(), C.transpose(), B.transpose(),
                                   eta, dual);
    } catch (const InfeasibleError&) {
      throw direct_err;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
      throw InfeasibleError(
          std::string(direct_err.what()) +
          "; the dual-form factor is singular, so the selected branch has no "
          "finite positive definite solution at working precision");
    const Matrix Xd = es.eigenvectors() *
                      es.eigenvalues().cwiseInverse().asDiagonal() *
                      es.eigenvectors().transpose();
    return finish_solution(A, B, C, eta, kind, opts,
                           0.5 * (Xd + Xd.transpose()));
  }
}

}  // namespace

RiccatiSolution solve_past_riccati(const Matrix& A, const Matrix& B,
                                   const Matrix& C, double eta,
                                   const RiccatiOptions& opts) {
  return solve_hinf_riccati(A, B, C, eta, EnergyKind::Past, opts);
}

RiccatiSolution solve_future_riccati(const Matrix& A, const Matrix& B,
                                     const Matrix& C, double eta,
                                     const RiccatiOptions& opts) {
  return solve_hinf_riccati(A, B, C, eta, EnergyKind::Future, opts);
}

}  // namespace polyenergy
