#pragma once

#include <iosfwd>
#include <vector>

#include "polyenergy/energy.hpp"
#include "polyenergy/models.hpp"

namespace polyenergy {

struct BenchSettings {
  std::vector<Index> dims;        // state dimensions n (the mesh has n+1 elements)
  std::vector<int> degrees;       // polynomial degrees to time
  double eta = 0.5;
  EnergyKind kind = EnergyKind::Future;
  int reps = 1;                   // lower bound; cheap cases are repeated more
  HeatModelConfig base_config;    // elements and the derived x0 come from dims
  EnergyOptions energy;
};

struct BenchRecord {
  Index n = 0;
  int degree = 0;
  double eta = 0.0;
  EnergyKind kind = EnergyKind::Future;
  double energy_x0 = 0.0;         // polynomial evaluated at the initial state
  double wall_seconds = 0.0;      // best of the repetitions, compute call only
  double riccati_residual = 0.0;
  double kway_residual_max = 0.0;
  int reps = 0;
};

// Times compute_past/future_energy on the heat model across the requested
// (dimension, degree) grid. Progress goes to `log` when given.
std::vector<BenchRecord> run_benchmark(const BenchSettings& settings,
                                       std::ostream* log = nullptr);

// CSV sorted by (degree, n); header
// n,d,eta,kind,energy_x0,wall_s,riccati_res,kway_res_max,reps
void write_csv(const std::vector<BenchRecord>& records, std::ostream& out);

}  // namespace polyenergy
