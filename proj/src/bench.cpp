#include "polyenergy/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <limits>
#include <ostream>
#include <tuple>

namespace polyenergy {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

std::vector<BenchRecord> run_benchmark(const BenchSettings& settings, std::ostream* log) {
  if (settings.dims.empty() || settings.degrees.empty())
    throw ConfigError("benchmark: need at least one dimension and one degree");
  if (settings.reps < 1) throw ConfigError("benchmark: reps must be positive");

  std::vector<BenchRecord> records;
  for (const Index n : settings.dims) {
    HeatModelConfig cfg = settings.base_config;
    cfg.elements = n + 1;
    cfg.validate();
    const AssembledModel model = build_heat_fem(cfg);

    for (const int d : settings.degrees) {
      // Small problems finish in microseconds; repeat them enough for the
      // steady-clock resolution not to dominate.
      const int reps = std::max(settings.reps, n <= 63 ? 10 : 1);
      BenchRecord rec;
      rec.n = n;
      rec.degree = d;
      rec.eta = settings.eta;
      rec.kind = settings.kind;
      rec.reps = reps;
      rec.wall_seconds = std::numeric_limits<double>::infinity();

      for (int r = 0; r < reps; ++r) {
        EnergyDiagnostics diag;
        const double t0 = now_seconds();
        const EnergyPoly energy =
            settings.kind == EnergyKind::Past
                ? compute_past_energy(model.sys, settings.eta, d, settings.energy, &diag)
                : compute_future_energy(model.sys, settings.eta, d, settings.energy, &diag);
        const double wall = now_seconds() - t0;
        if (wall < rec.wall_seconds) {
          rec.wall_seconds = wall;
          rec.riccati_residual = diag.riccati_residual_rel;
          rec.kway_residual_max = diag.kway_residual_max;
        }
        if (r == 0) rec.energy_x0 = energy.eval(model.x0);
        if (log)
          *log << "bench n=" << n << " d=" << d << " rep " << (r + 1) << "/" << reps
               << " wall=" << wall << "s\n";
      }
      records.push_back(rec);
    }
  }
  std::sort(records.begin(), records.end(), [](const BenchRecord& a, const BenchRecord& b) {
    return std::tie(a.degree, a.n) < std::tie(b.degree, b.n);
  });
  return records;
}

void write_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
  out << "n,d,eta,kind,energy_x0,wall_s,riccati_res,kway_res_max,reps\n";
  out << std::setprecision(17);
  for (const BenchRecord& r : records) {
    out << r.n << ',' << r.degree << ',' << r.eta << ',' << to_string(r.kind) << ','
        << r.energy_x0 << ',' << r.wall_seconds << ',' << r.riccati_residual << ','
        << r.kway_residual_max << ',' << r.reps << '\n';
  }
}

}  // namespace polyenergy
