#pragma once

#include <utility>
#include <vector>

#include "polyenergy/dynamics.hpp"
#include "polyenergy/kronpoly.hpp"
#include "polyenergy/kway_solver.hpp"
#include "polyenergy/riccati.hpp"
#include "polyenergy/types.hpp"

namespace polyenergy {

enum class SchurPath { Auto, Complex, Real };

struct EnergyOptions {
  SchurPath path = SchurPath::Auto;
  // Auto picks the complex form while its estimated working set (about
  // 56 bytes per tensor entry at the top degree) stays under this budget,
  // the halved-footprint real form beyond.
  std::int64_t complex_path_budget_bytes = 1'500'000'000;
  // Relative residual accepted for each degree-k coefficient solve.
  double kway_tol = 1e-8;
  // Re-assemble the right-hand side and verify each solve matrix-free. Runs
  // with two tensor-sized buffers, so it stays affordable at the top degree.
  // A failing verification triggers one pass of iterative refinement when a
  // third tensor-sized buffer fits the path budget.
  bool verify_solves = true;
  RiccatiOptions riccati;
};

struct EnergyDiagnostics {
  double riccati_residual_abs = 0.0;
  double riccati_residual_rel = 0.0;
  int newton_steps = 0;
  double kway_residual_max = 0.0;
  SchurKind path_used = SchurKind::Complex;
  std::vector<std::pair<int, double>> degree_seconds;  // (degree, seconds), degree 2 = Riccati
  double total_seconds = 0.0;
};

// Polynomial energy function E(x) = 1/2 sum_{k=2..degree} v_k^T x^{(k)} with
// symmetric coefficients.
struct EnergyPoly {
  EnergyKind kind = EnergyKind::Past;
  double eta = 0.0;
  Index n = 0;
  int degree = 0;
  std::vector<KCoeff> coeffs;  // orders 2..degree, in order

  const KCoeff& coeff(int order) const;
  double eval(const Vector& x) const { return poly_eval(coeffs, x); }
  Vector grad(const Vector& x) const { return poly_grad(coeffs, x); }
  void validate() const;
};

// Quadratic-term closed loop: A + B B^T X2 (past) or A - eta B B^T X2 (future).
Matrix closed_loop_matrix(const PolyDynamics& sys, const Matrix& X2,
                          EnergyKind kind, double eta);

// Degree-d polynomial approximation of the past/future energy function:
// quadratic term from the Riccati equation, higher coefficients from one
// k-way solve per degree on the cached closed-loop Schur form, each
// symmetrized after solving. Throws on infeasible eta, resonant closed loop,
// or verification failure.
EnergyPoly compute_past_energy(const PolyDynamics& sys, double eta, int degree,
                               const EnergyOptions& opts = {},
                               EnergyDiagnostics* diag = nullptr);
EnergyPoly compute_future_energy(const PolyDynamics& sys, double eta, int degree,
                                 const EnergyOptions& opts = {},
                                 EnergyDiagnostics* diag = nullptr);

// Pointwise defect of the energy PDE at x:
//   past:   grad E . f + 1/2 |B^T grad E|^2 - eta/2 |C x|^2
//   future: grad E . f - eta/2 |B^T grad E|^2 + 1/2 |C x|^2
double hjb_residual(const PolyDynamics& sys, const EnergyPoly& energy,
                    const Vector& x);

namespace detail {

// Right-hand side of the degree-k coefficient system (sign = +1), or its
// negation (sign = -1), assembled from the lower-degree coefficients and the
// cached V_i^T B products (vtb[i] for order i, used for i >= 3).
Vector assemble_degree_rhs(const PolyDynamics& sys, EnergyKind kind, double eta,
                           int k, const std::vector<KCoeff>& coeffs,
                           const std::vector<Matrix>& vtb, double sign);

}  // namespace detail

}  // namespace polyenergy
