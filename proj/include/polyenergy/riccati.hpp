#pragma once

#include "polyenergy/types.hpp"

namespace polyenergy {

struct RiccatiOptions {
  // Relative residual accepted without (further) Newton refinement.
  double residual_tol = 1e-10;
  // Newton refinement budget (each step solves one Lyapunov equation on the
  // closed loop). 0 disables refinement.
  int max_refine = 4;
  // Validate positive semidefiniteness and the closed-loop half-plane location.
  bool check_solution = true;
};

struct RiccatiSolution {
  Matrix X;            // symmetric positive semidefinite solution
  Matrix closed_loop;  // A + B B^T X (past) or A - eta B B^T X (future)
  double residual_abs = 0.0;  // Frobenius norm of the matrix residual
  double residual_rel = 0.0;  // residual_abs / (|A||X| + |eta||C|^2 + |B|^2|X|^2)
  int newton_steps = 0;
};

// Solves A^T V + V A + V B B^T V - eta C^T C = 0 for the branch with
// -(A + B B^T V) Hurwitz (the one defining the quadratic past energy term).
// eta = 1 - gamma^{-2} must be nonzero and at most 1. Throws InfeasibleError
// when the Hamiltonian has eigenvalues (numerically) on the imaginary axis,
// the invariant subspace is not a graph, the solution is indefinite, or the
// closed loop is not in the required half plane.
RiccatiSolution solve_past_riccati(const Matrix& A, const Matrix& B,
                                   const Matrix& C, double eta,
                                   const RiccatiOptions& opts = {});

// Solves A^T W + W A - eta W B B^T W + C^T C = 0 for the branch with
// A - eta B B^T W Hurwitz (quadratic future energy term). Same eta domain and
// failure modes as the past equation.
RiccatiSolution solve_future_riccati(const Matrix& A, const Matrix& B,
                                     const Matrix& C, double eta,
                                     const RiccatiOptions& opts = {});

}  // namespace polyenergy
