#pragma once

#include <cstdint>

#include "polyenergy/dynamics.hpp"

namespace polyenergy {

// Configuration of the 1-D reaction-convection-diffusion rig
//   z_t = z_xx + convection z_x + reaction z + cubic z^3 + sum_j b_j(x) u_j
// on (0, length) with homogeneous Dirichlet ends, discretized with linear
// finite elements on a uniform mesh. Inputs are indicator actuators on equal
// subintervals; outputs integrate the state over equal subintervals.
struct HeatModelConfig {
  Index elements = 64;  // N; state dimension is N - 1
  double length = 30.0;
  Index inputs = 4;     // must divide elements
  Index outputs = 4;    // must divide elements
  double reaction = 0.125;
  double convection = 1.0;
  double cubic = 1.0;
  // Row-summed diagonal mass (default) or the consistent tridiagonal Galerkin
  // mass. Both are second order; the lumped form has a sign-consistent
  // discretization error, so energy values converge monotonically under mesh
  // refinement, which keeps convergence studies clean.
  bool lumped_mass = true;
  double initial_amplitude = 5e-5;  // z(x,0) = amplitude x (x - L)(x - L/2)

  void validate() const;
};

struct AssembledModel {
  PolyDynamics sys;
  Vector x0;          // nodal interpolant of the initial profile
  double mesh_width = 0.0;
  Matrix mass;        // Galerkin mass matrix backing the factored cubic term
  HeatModelConfig config;
};

// Galerkin assembly with exact element integrals for the linear part and the
// cubic tensor (kept factored as M^{-1} G3), where M is the lumped or
// consistent mass per the configuration.
AssembledModel build_heat_fem(const HeatModelConfig& config = {});

// x' = a x + f3 x^3 + b u, y = c x. The 1-D closed-form test bed.
PolyDynamics build_scalar_cubic(double a, double b, double c, double f3);

// Dense random system with A shifted to spectral abscissa -1/2, unit-normalized
// random drift coefficients of orders 2..max_drift_order, random B and C.
// Deterministic in seed.
PolyDynamics build_random_stable(Index n, Index m, Index p_out,
                                 int max_drift_order, std::uint64_t seed);

}  // namespace polyenergy
