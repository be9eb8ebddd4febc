#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <random>

#include "polyenergy/riccati.hpp"
#include "test_util.hpp"

using namespace polyenergy;
using testutil::random_matrix;
using testutil::random_stable;

namespace {

Matrix scalar1(double v) { return Matrix::Constant(1, 1, v); }

double past_residual(const Matrix& A, const Matrix& B, const Matrix& C, double eta,
                     const Matrix& V) {
  const Matrix R = A.transpose() * V + V * A + V * B * B.transpose() * V -
                   eta * C.transpose() * C;
  return R.norm();
}

double future_residual(const Matrix& A, const Matrix& B, const Matrix& C, double eta,
                       const Matrix& W) {
  const Matrix R = A.transpose() * W + W * A - eta * W * B * B.transpose() * W +
                   C.transpose() * C;
  return R.norm();
}

double max_real_eig(const Matrix& M) {
  return Eigen::EigenSolver<Matrix>(M, false).eigenvalues().real().maxCoeff();
}

// Independent oracle: eigenvector (not Schur) basis of the Hamiltonian for the
// future equation, stabilizing branch.
Matrix future_care_oracle(const Matrix& A, const Matrix& B, const Matrix& C, double eta) {
  const Index n = A.rows();
  Matrix H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = A;
  H.topRightCorner(n, n) = -eta * B * B.transpose();
  H.bottomLeftCorner(n, n) = -C.transpose() * C;
  H.bottomRightCorner(n, n) = -A.transpose();
  Eigen::EigenSolver<Matrix> eig(H);
  ComplexMatrix basis(2 * n, n);
  Index got = 0;
  for (Index i = 0; i < 2 * n && got < n; ++i)
    if (eig.eigenvalues()[i].real() < 0) basis.col(got++) = eig.eigenvectors().col(i);
  REQUIRE(got == n);
  const ComplexMatrix Z1 = basis.topRows(n), Z2 = basis.bottomRows(n);
  const ComplexMatrix Wc = Z2 * Eigen::FullPivLU<ComplexMatrix>(Z1).inverse();
  const Matrix W = Wc.real();
  return 0.5 * (W + W.transpose());
}

}  // namespace

TEST_CASE("scalar closed forms, both branches") {
  const Matrix A = scalar1(-2), B = scalar1(1), C = scalar1(1);
  const double eta = 0.5;

  const auto past = solve_past_riccati(A, B, C, eta);
  CHECK(past.X(0, 0) == doctest::Approx(2.0 + std::sqrt(4.5)).epsilon(1e-13));
  CHECK(past.closed_loop(0, 0) == doctest::Approx(std::sqrt(4.5)).epsilon(1e-12));
  CHECK(past.residual_rel <= 1e-12);

  const auto fut = solve_future_riccati(A, B, C, eta);
  CHECK(fut.X(0, 0) == doctest::Approx(-4.0 + std::sqrt(18.0)).epsilon(1e-13));
  CHECK(fut.closed_loop(0, 0) < 0);
  CHECK(fut.residual_rel <= 1e-12);
}

TEST_CASE("zero output matrix: branch selection decides between 0 and the Gramian inverse") {
  const Matrix B = scalar1(1), C0 = scalar1(0);
  const double eta = 0.5;

  // stable A: the anti-stabilizing past branch is V = -2a/b^2
  const auto past_stable = solve_past_riccati(scalar1(-1), B, C0, eta);
  CHECK(past_stable.X(0, 0) == doctest::Approx(2.0).epsilon(1e-13));

  // anti-stable A: V = 0 already has -(A + BB'V) = -A Hurwitz
  const auto past_anti = solve_past_riccati(scalar1(1), B, C0, eta);
  CHECK(std::abs(past_anti.X(0, 0)) <= 1e-13);

  // future with C = 0 and stable A: W = 0
  const auto fut = solve_future_riccati(scalar1(-1), B, C0, eta);
  CHECK(std::abs(fut.X(0, 0)) <= 1e-13);
}

TEST_CASE("unreachable past problem is infeasible") {
  // B = 0 with stable A: no input can reach x != 0, the past branch condition
  // -(A) Hurwitz cannot hold.
  CHECK_THROWS_AS(solve_past_riccati(scalar1(-1), scalar1(0), scalar1(1), 0.5),
                  InfeasibleError);
}

TEST_CASE("eta domain is enforced") {
  const Matrix A = scalar1(-1), B = scalar1(1), C = scalar1(1);
  CHECK_THROWS_AS(solve_past_riccati(A, B, C, 0.0), ConfigError);
  CHECK_THROWS_AS(solve_future_riccati(A, B, C, 0.0), ConfigError);
  CHECK_THROWS_AS(solve_past_riccati(A, B, C, 1.5), ConfigError);
  CHECK_NOTHROW(solve_future_riccati(A, B, C, 1.0));   // classical-balancing limit
  CHECK_NOTHROW(solve_future_riccati(A, B, C, -0.5));  // gamma < 1 side
}

TEST_CASE("matches an independent eigenvector-basis oracle") {
  std::mt19937_64 rng(211);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 2 + trial % 3;
    const Matrix A = random_stable(rng, n);
    const Matrix B = random_matrix(rng, n, 2);
    const Matrix C = random_matrix(rng, 2, n);
    for (const double eta : {0.5, 1.0}) {
      const Matrix want = future_care_oracle(A, B, C, eta);
      const auto got = solve_future_riccati(A, B, C, eta);
      CHECK((got.X - want).norm() <= 1e-8 * (1.0 + want.norm()));
    }
  }
}

TEST_CASE("solutions are symmetric, PSD, with the required closed-loop half plane") {
  std::mt19937_64 rng(223);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 3 + trial % 3;
    const Matrix A = random_stable(rng, n);
    const Matrix B = random_matrix(rng, n, 2);
    const Matrix C = random_matrix(rng, 2, n);
    const double eta = 0.5;

    const auto past = solve_past_riccati(A, B, C, eta);
    CHECK((past.X - past.X.transpose()).norm() == 0.0);  // exactly symmetrized
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(past.X).eigenvalues().minCoeff() >=
          -1e-10 * past.X.norm());
    CHECK(max_real_eig(-past.closed_loop) < 0);
    CHECK(past_residual(A, B, C, eta, past.X) <=
          1e-10 * (1.0 + A.norm() * past.X.norm()));

    const auto fut = solve_future_riccati(A, B, C, eta);
    CHECK((fut.X - fut.X.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(fut.X).eigenvalues().minCoeff() >=
          -1e-10 * fut.X.norm());
    CHECK(max_real_eig(fut.closed_loop) < 0);
    CHECK(future_residual(A, B, C, eta, fut.X) <=
          1e-10 * (1.0 + A.norm() * fut.X.norm()));
  }
}

TEST_CASE("gain parameter moves the solutions monotonically") {
  std::mt19937_64 rng(227);
  const Index n = 4;
  const Matrix A = random_stable(rng, n);
  const Matrix B = random_matrix(rng, n, 2);
  const Matrix C = random_matrix(rng, 2, n);

  // past grows with eta, future shrinks (larger eta = easier gain bound)
  Matrix v_prev, w_prev;
  for (const double eta : {0.25, 0.5, 0.75, 1.0}) {
    const Matrix V = solve_past_riccati(A, B, C, eta).X;
    const Matrix W = solve_future_riccati(A, B, C, eta).X;
    if (v_prev.size() > 0) {
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(Matrix(V - v_prev)).eigenvalues().minCoeff() >=
            -1e-9 * V.norm());
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(Matrix(w_prev - W)).eigenvalues().minCoeff() >=
            -1e-9 * W.norm());
    }
    v_prev = V;
    w_prev = W;
  }
}

TEST_CASE("imaginary-axis Hamiltonian eigenvalues are rejected") {
  // A = 0, B = 0: the Hamiltonian spectrum collapses onto the axis.
  CHECK_THROWS_AS(solve_future_riccati(scalar1(0), scalar1(0), scalar1(1), 0.5),
                  InfeasibleError);
}
