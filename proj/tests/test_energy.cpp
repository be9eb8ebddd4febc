#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "polyenergy/energy.hpp"
#include "polyenergy/models.hpp"
#include "test_util.hpp"

using namespace polyenergy;
using testutil::loglog_slope;
using testutil::random_matrix;
using testutil::random_stable;
using testutil::random_vector;

namespace {

// Small random system with the given drift orders, nonlinearities scaled down
// so the truncated energies behave well on the unit ball.
PolyDynamics random_system(std::mt19937_64& rng, Index n, std::vector<int> orders) {
  PolyDynamics sys;
  sys.A = random_stable(rng, n);
  sys.B = random_matrix(rng, n, 2);
  sys.C = random_matrix(rng, 1, n);
  for (int p : orders) {
    Matrix F = random_matrix(rng, n, ipow(n, p));
    F *= 0.1 / F.norm();
    sys.drift.emplace(p, DriftTerm::dense(p, std::move(F)));
  }
  return sys;
}

}  // namespace

TEST_CASE("scalar cubic system reproduces the degree-4 closed forms") {
  // x' = -x + x^3 + u, y = x, eta = 1/2. Quadratic terms from the two Riccati
  // branches, quartic terms from one substitution step each; all four follow
  // from the quadratic formula and are recomputed here rather than hard-coded.
  const PolyDynamics sys = build_scalar_cubic(-1.0, 1.0, 1.0, 1.0);
  const double eta = 0.5;

  const double v2 = 1.0 + std::sqrt(1.5);          // root with a + v2 > 0
  const double v4 = -v2 / (2.0 * (-1.0 + v2));     // 4(a+v2) v4 = -2 f3 v2
  const double w2 = -2.0 + std::sqrt(6.0);         // root with a - eta w2 < 0
  const double w4 = w2 / (2.0 * (eta * w2 + 1.0)); // 4(a-eta w2) w4 = -2 f3 w2

  const EnergyPoly past = compute_past_energy(sys, eta, 4);
  CHECK(past.coeff(2).data[0] == doctest::Approx(v2).epsilon(1e-12));
  CHECK(past.coeff(3).data[0] == 0.0);
  CHECK(past.coeff(4).data[0] == doctest::Approx(v4).epsilon(1e-12));

  const EnergyPoly fut = compute_future_energy(sys, eta, 4);
  CHECK(fut.coeff(2).data[0] == doctest::Approx(w2).epsilon(1e-12));
  CHECK(fut.coeff(3).data[0] == 0.0);
  CHECK(fut.coeff(4).data[0] == doctest::Approx(w4).epsilon(1e-12));
}

TEST_CASE("negative eta (gamma < 1) scalar closed forms") {
  const PolyDynamics sys = build_scalar_cubic(-1.0, 1.0, 1.0, 0.0);
  const double eta = -0.5;
  const EnergyPoly past = compute_past_energy(sys, eta, 2);
  CHECK(past.coeff(2).data[0] == doctest::Approx(1.0 + std::sqrt(0.5)).epsilon(1e-12));
  const EnergyPoly fut = compute_future_energy(sys, eta, 2);
  CHECK(fut.coeff(2).data[0] == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("linear systems have exactly zero higher coefficients") {
  std::mt19937_64 rng(301);
  const PolyDynamics sys = random_system(rng, 3, {});
  const EnergyPoly e = compute_future_energy(sys, 0.5, 5);
  for (int k = 3; k <= 5; ++k) CHECK(e.coeff(k).data.norm() == 0.0);
}

TEST_CASE("odd drift yields exactly zero odd coefficients") {
  std::mt19937_64 rng(307);
  const PolyDynamics sys = random_system(rng, 3, {3});
  for (const auto kind : {EnergyKind::Past, EnergyKind::Future}) {
    const EnergyPoly e = kind == EnergyKind::Past ? compute_past_energy(sys, 0.5, 5)
                                                  : compute_future_energy(sys, 0.5, 5);
    CHECK(e.coeff(3).data.norm() == 0.0);
    CHECK(e.coeff(5).data.norm() == 0.0);
    CHECK(e.coeff(4).data.norm() > 0.0);
  }
}

TEST_CASE("raising the degree does not change lower coefficients") {
  std::mt19937_64 rng(311);
  const PolyDynamics sys = random_system(rng, 3, {2, 3});
  const EnergyPoly e3 = compute_future_energy(sys, 0.5, 3);
  const EnergyPoly e5 = compute_future_energy(sys, 0.5, 5);
  for (int k = 2; k <= 3; ++k)
    CHECK((e3.coeff(k).data.array() == e5.coeff(k).data.array()).all());
}

TEST_CASE("all computed coefficients are symmetric") {
  std::mt19937_64 rng(313);
  const PolyDynamics sys = random_system(rng, 3, {2, 3});
  const EnergyPoly e = compute_past_energy(sys, 0.5, 4);
  for (int k = 2; k <= 4; ++k) {
    CHECK(e.coeff(k).symmetric);
    CHECK(is_symmetric(e.coeff(k), 0, 5));  // exhaustive at these sizes
  }
}

TEST_CASE("complex and real solve paths agree") {
  std::mt19937_64 rng(317);
  const PolyDynamics sys = random_system(rng, 4, {2});
  EnergyOptions copts, ropts;
  copts.path = SchurPath::Complex;
  ropts.path = SchurPath::Real;
  EnergyDiagnostics cd, rd;
  const EnergyPoly ec = compute_future_energy(sys, 0.5, 4, copts, &cd);
  const EnergyPoly er = compute_future_energy(sys, 0.5, 4, ropts, &rd);
  CHECK(cd.path_used == SchurKind::Complex);
  CHECK(rd.path_used == SchurKind::Real);
  for (int k = 2; k <= 4; ++k) {
    const double scale = ec.coeff(k).data.norm();
    CHECK((ec.coeff(k).data - er.coeff(k).data).norm() <= 1e-11 * (1.0 + scale));
  }
}

TEST_CASE("hjb_residual vanishes at the origin and for exact quadratic solutions") {
  std::mt19937_64 rng(331);
  const PolyDynamics lin = random_system(rng, 4, {});
  for (const auto kind : {EnergyKind::Past, EnergyKind::Future}) {
    const EnergyPoly e = kind == EnergyKind::Past ? compute_past_energy(lin, 0.5, 2)
                                                  : compute_future_energy(lin, 0.5, 2);
    CHECK(hjb_residual(lin, e, Vector::Zero(4)) == 0.0);
    // for linear dynamics the quadratic energy solves the PDE globally
    for (int trial = 0; trial < 5; ++trial) {
      const Vector x = 2.0 * random_vector(rng, 4);
      const double scale = 1.0 + std::pow(x.norm(), 4);
      CHECK(std::abs(hjb_residual(lin, e, x)) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("hjb_residual decays one order past the truncation degree") {
  std::mt19937_64 rng(337);
  const PolyDynamics sys = random_system(rng, 3, {2, 3});  // not odd: all orders live
  const Vector dir = random_vector(rng, 3).normalized();
  std::vector<double> eps, res_d2, res_d3;
  for (int i = 0; i < 9; ++i) eps.push_back(std::pow(10.0, -2.0 + 0.15 * i));

  for (const auto kind : {EnergyKind::Past, EnergyKind::Future}) {
    for (const int d : {2, 3}) {
      const EnergyPoly e = kind == EnergyKind::Past
                               ? compute_past_energy(sys, 0.5, d)
                               : compute_future_energy(sys, 0.5, d);
      std::vector<double> r;
      for (const double t : eps) r.push_back(std::abs(hjb_residual(sys, e, t * dir)));
      const double slope = loglog_slope(eps, r);
      CHECK(slope == doctest::Approx(d + 1.0).epsilon(0.08));
    }
  }
}

TEST_CASE("assembled right-hand sides match a direct polynomial-identity oracle") {
  std::mt19937_64 rng(347);
  const Index n = 2;
  const PolyDynamics sys = random_system(rng, n, {2, 3});
  const double eta = 0.5;

  for (const auto kind : {EnergyKind::Past, EnergyKind::Future}) {
    // symmetric stand-in coefficients of orders 2..4 (content irrelevant,
    // the identity must hold for any symmetric inputs)
    std::vector<KCoeff> coeffs;
    for (int k = 2; k <= 4; ++k)
      coeffs.push_back(symmetrize(KCoeff(k, n, random_vector(rng, ipow(n, k)))));
    std::vector<Matrix> vtb(6);
    for (int k = 3; k <= 4; ++k)
      vtb[std::size_t(k)] = coeffs[std::size_t(k - 2)].matricized().transpose() * sys.B;

    const int k = 5;
    const Vector rhs = detail::assemble_degree_rhs(sys, kind, eta, k, coeffs, vtb, 1.0);
    REQUIRE(rhs.size() == ipow(n, k));

    // value of the same expression at sample points:
    //   -(sum over drift orders) i * v_i . (F_p x^p (x) x^(i-1))
    //   -(1/4) (past) or +(eta/4) (future) * sum_{i+j=k+2} i j q_i . q_j,
    // with q_i = B^T V_i x^(i-1); both use only symmetry, not the internal
    // slot layout of the assembler.
    for (int trial = 0; trial < 6; ++trial) {
      const Vector x = random_vector(rng, n);
      double want = 0.0;
      for (const auto& [p, term] : sys.drift) {
        const int i = k + 1 - p;
        if (i < 2) continue;
        const Vector head = term.apply_power(kron_power(x, p));  // F_p x^p
        Vector contracted = coeffs[std::size_t(i - 2)].data;
        // fold the trailing i-1 modes with x, then the first with F_p x^p
        for (int t = 0; t < i - 1; ++t)
          contracted = detail::contract_last_mode(contracted, n, x);
        want -= double(i) * contracted.dot(head);
      }
      const double base = (kind == EnergyKind::Past ? -0.25 : 0.25 * eta);
      for (int i = 3; i <= k - 1; ++i) {
        const int j = k + 2 - i;
        if (j < 3 || j > k - 1) continue;
        const Vector qi =
            sys.B.transpose() * (coeffs[std::size_t(i - 2)].matricized() *
                                 kron_power(x, i - 1));
        const Vector qj =
            sys.B.transpose() * (coeffs[std::size_t(j - 2)].matricized() *
                                 kron_power(x, j - 1));
        want += base * i * j * qi.dot(qj);
      }
      const double got = rhs.dot(kron_power(x, k));
      CHECK(got == doctest::Approx(want).epsilon(1e-11));
    }
  }
}

TEST_CASE("closed_loop_matrix agrees with the Riccati solver's closed loop") {
  std::mt19937_64 rng(349);
  const PolyDynamics sys = random_system(rng, 4, {});
  const auto past = solve_past_riccati(sys.A, sys.B, sys.C, 0.5);
  const Matrix cl = closed_loop_matrix(sys, past.X, EnergyKind::Past, 0.5);
  CHECK((cl - past.closed_loop).norm() <= 1e-13 * (1.0 + cl.norm()));
}

TEST_CASE("diagnostics report per-degree work and the path taken") {
  std::mt19937_64 rng(353);
  const PolyDynamics sys = random_system(rng, 3, {2});
  EnergyDiagnostics diag;
  compute_future_energy(sys, 0.5, 4, {}, &diag);
  REQUIRE(diag.degree_seconds.size() == 3);  // degrees 2, 3, 4
  CHECK(diag.degree_seconds[0].first == 2);
  CHECK(diag.degree_seconds[2].first == 4);
  CHECK(diag.riccati_residual_rel <= 1e-10);
  CHECK(diag.kway_residual_max <= 1e-8);
  CHECK(diag.total_seconds >= 0.0);
}

TEST_CASE("an unreachable verification tolerance raises AccuracyError") {
  std::mt19937_64 rng(359);
  const PolyDynamics sys = random_system(rng, 3, {2});
  EnergyOptions opts;
  opts.kway_tol = 1e-30;
  CHECK_THROWS_AS(compute_future_energy(sys, 0.5, 3, opts), AccuracyError);
}

TEST_CASE("invalid arguments are rejected") {
  std::mt19937_64 rng(367);
  const PolyDynamics sys = random_system(rng, 3, {});
  CHECK_THROWS_AS(compute_past_energy(sys, 0.0, 3), ConfigError);
  CHECK_THROWS_AS(compute_past_energy(sys, 1.5, 3), ConfigError);
  CHECK_THROWS_AS(compute_past_energy(sys, 0.5, 1), ConfigError);
  const EnergyPoly e = compute_past_energy(sys, 0.5, 3);
  CHECK_THROWS_AS(e.coeff(4), ConfigError);
  CHECK_THROWS_AS(e.eval(Vector::Zero(2)), DimensionError);
}
