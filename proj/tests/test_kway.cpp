#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/LU>

#include <random>

#include "polyenergy/kronpoly.hpp"
#include "polyenergy/kway_solver.hpp"
#include "test_util.hpp"

using namespace polyenergy;
using testutil::dense_kron;
using testutil::identity;
using testutil::random_matrix;
using testutil::random_stable;
using testutil::random_vector;

namespace {

Vector dense_oracle_solve(const Matrix& M, int k, const Vector& b) {
  const Matrix L = dense_kway_lyap(M, k);
  return Eigen::FullPivLU<Matrix>(L.transpose()).solve(b);
}

}  // namespace

TEST_CASE("Schur caches reconstruct the matrix") {
  std::mt19937_64 rng(101);
  const Matrix M = random_matrix(rng, 5, 5);

  const SchurCache c(M, SchurKind::Complex);
  const ComplexMatrix rec = c.unitary() * c.triangular() * c.unitary().adjoint();
  CHECK((rec.real() - M).norm() <= 1e-12 * M.norm());
  CHECK(rec.imag().norm() <= 1e-12 * M.norm());

  const SchurCache r(M, SchurKind::Real);
  const Matrix rrec = r.orthogonal() * r.quasi_triangular() * r.orthogonal().transpose();
  CHECK((rrec - M).norm() <= 1e-12 * M.norm());

  // Same spectrum from both forms. Lexicographic sorting can swap a conjugate
  // pair whose real parts differ by an ulp, so match greedily instead.
  const ComplexVector& ec = c.eigenvalues();
  const ComplexVector& er = r.eigenvalues();
  std::vector<Complex> pool(er.data(), er.data() + er.size());
  for (Index i = 0; i < ec.size(); ++i) {
    const auto nearest = std::min_element(
        pool.begin(), pool.end(), [&](Complex a, Complex b) {
          return std::abs(a - ec[i]) < std::abs(b - ec[i]);
        });
    REQUIRE(nearest != pool.end());
    CHECK(std::abs(*nearest - ec[i]) <= 1e-10 * M.norm());
    pool.erase(nearest);
  }
}

TEST_CASE("check_solvability detects k-fold eigenvalue-sum resonances") {
  Matrix stable = (Matrix(2, 2) << -1, 0, 0, -2).finished();
  CHECK(check_solvability(SchurCache(stable, SchurKind::Complex), 3));

  Matrix mixed = (Matrix(2, 2) << 1, 0, 0, -2).finished();
  CHECK(check_solvability(SchurCache(mixed, SchurKind::Complex), 2));  // sums: 2, -1, -4

  Matrix resonant2 = (Matrix(2, 2) << 1, 0, 0, -1).finished();
  CHECK_FALSE(check_solvability(SchurCache(resonant2, SchurKind::Complex), 2));

  Matrix resonant3 = (Matrix(3, 3) << 1, 0, 0, 0, 1, 0, 0, 0, -2).finished();
  CHECK_FALSE(check_solvability(SchurCache(resonant3, SchurKind::Real), 3));
}

TEST_CASE("diagonal systems solve exactly") {
  Matrix M = (Matrix(2, 2) << -1, 0, 0, -3).finished();
  std::mt19937_64 rng(103);
  for (const auto kind : {SchurKind::Complex, SchurKind::Real}) {
    const SchurCache cache(M, kind);
    for (int k = 1; k <= 4; ++k) {
      const Vector b = random_vector(rng, ipow(2, k));
      const Vector x = solve_kway(cache, k, b);
      for (std::int64_t a = 0; a < b.size(); ++a) {
        const auto idx = unlinearize_index(a, k, 2);
        double shift = 0;
        for (int t = 0; t < k; ++t) shift += M(idx[std::size_t(t)], idx[std::size_t(t)]);
        CHECK(x[a] == doctest::Approx(b[a] / shift).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("k=1 reduces to a plain transposed solve") {
  std::mt19937_64 rng(107);
  const Matrix M = random_stable(rng, 4);
  const Vector b = random_vector(rng, 4);
  const Vector want = Eigen::FullPivLU<Matrix>(M.transpose()).solve(b);
  for (const auto kind : {SchurKind::Complex, SchurKind::Real}) {
    const Vector got = solve_kway(SchurCache(M, kind), 1, b);
    CHECK((got - want).norm() <= 1e-11 * want.norm());
  }
}

TEST_CASE("random stable systems match the dense oracle on both paths") {
  std::mt19937_64 rng(109);
  double worst = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const Index n = 2 + trial % 3;          // 2..4
    const int k = 2 + trial % 3;            // 2..4
    const Matrix M = random_stable(rng, n);
    const Vector b = random_vector(rng, ipow(n, k));
    const Vector want = dense_oracle_solve(M, k, b);

    KwaySolveInfo info_c, info_r;
    const Vector xc = solve_kway(SchurCache(M, SchurKind::Complex), k, b, &info_c);
    const Vector xr = solve_kway(SchurCache(M, SchurKind::Real), k, b, &info_r);

    worst = std::max(worst, (xc - want).norm() / want.norm());
    worst = std::max(worst, (xr - want).norm() / want.norm());
    CHECK((xc - xr).norm() <= 1e-11 * want.norm());  // paths agree tightly
    CHECK(info_c.rel_residual <= 1e-10);
    CHECK(info_r.rel_residual <= 1e-10);
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("solves are linear in the right-hand side") {
  std::mt19937_64 rng(113);
  const Matrix M = random_stable(rng, 3);
  const SchurCache cache(M, SchurKind::Real);
  const Vector b1 = random_vector(rng, 27);
  const Vector b2 = random_vector(rng, 27);
  const Vector x1 = solve_kway(cache, 3, b1);
  const Vector x2 = solve_kway(cache, 3, b2);
  const Vector x12 = solve_kway(cache, 3, 2.0 * b1 - 0.5 * b2);
  CHECK((x12 - (2.0 * x1 - 0.5 * x2)).norm() <= 1e-11 * x12.norm());
}

TEST_CASE("resonant pivots raise ResonanceError") {
  Matrix M = (Matrix(2, 2) << 1, 0, 0, -1).finished();
  const Vector b = Vector::Ones(4);
  CHECK_THROWS_AS(solve_kway(SchurCache(M, SchurKind::Complex), 2, b), ResonanceError);
  CHECK_THROWS_AS(solve_kway(SchurCache(M, SchurKind::Real), 2, b), ResonanceError);
}

TEST_CASE("internal verification can be disabled and redone externally") {
  std::mt19937_64 rng(127);
  const Matrix M = random_stable(rng, 3);
  const SchurCache cache(M, SchurKind::Real);
  const Vector b = random_vector(rng, 27);

  KwaySettings settings;
  settings.verify_residual = false;
  KwaySolveInfo info;
  const Vector x = solve_kway(cache, 3, b, &info, settings);
  CHECK(std::isnan(info.rel_residual));  // nothing measured internally

  // matrix-free re-assembly, the pattern the energy layer uses at scale
  Vector acc = -b;
  const DenseKronFactor F(cache.matrix());
  for (int j = 0; j < 3; ++j)
    detail::add_kron_slot_t(F, x.data(), acc.data(), ipow(3, j), ipow(3, 2 - j), 1.0);
  CHECK(acc.norm() <= 1e-10 * b.norm());
}

TEST_CASE("complex pairs on the real path match the oracle") {
  // rotation-like block forces complex eigenvalues
  Matrix M(3, 3);
  M << -1, 4, 0.3,
       -4, -1, 0.1,
       0.2, -0.3, -2;
  std::mt19937_64 rng(131);
  for (int k = 2; k <= 4; ++k) {
    const Vector b = random_vector(rng, ipow(3, k));
    const Vector want = dense_oracle_solve(M, k, b);
    const Vector got = solve_kway(SchurCache(M, SchurKind::Real), k, b);
    CHECK((got - want).norm() <= 1e-10 * want.norm());
  }
}
