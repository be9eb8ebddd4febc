#include "polyenergy/cli.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polyenergy/bench.hpp"
#include "polyenergy/energy.hpp"
#include "polyenergy/io.hpp"
#include "polyenergy/models.hpp"

namespace polyenergy {

namespace {

struct CommonOutputOptions {
  double sidecar_threshold_mb = 32.0;

  SaveOptions save_options() const {
    SaveOptions o;
    o.sidecar_threshold_bytes = std::int64_t(sidecar_threshold_mb * 1024.0 * 1024.0);
    return o;
  }
};

SchurPath parse_path(const std::string& s) {
  if (s == "auto") return SchurPath::Auto;
  if (s == "complex") return SchurPath::Complex;
  if (s == "real") return SchurPath::Real;
  throw ConfigError("unknown Schur path '" + s + "' (auto|complex|real)");
}

EnergyKind parse_kind(const std::string& s) {
  if (s == "past") return EnergyKind::Past;
  if (s == "future") return EnergyKind::Future;
  throw ConfigError("unknown energy kind '" + s + "' (past|future)");
}

// "min:max:count", log-spaced inclusive grid.
std::vector<double> parse_eps_grid(const std::string& s) {
  double lo = 0, hi = 0;
  int count = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || !in.eof())
    throw ConfigError("eps grid must be min:max:count, got '" + s + "'");
  if (!(lo > 0) || !(hi > lo) || count < 2)
    throw ConfigError("eps grid needs 0 < min < max and count >= 2");
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) grid[std::size_t(i)] = std::exp(std::log(lo) + i * step);
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> vals;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) throw ConfigError("empty entry in list '" + s + "'");
    std::size_t used = 0;
    vals.push_back(std::stod(item, &used));
    if (used != item.size()) throw ConfigError("bad number '" + item + "'");
  }
  if (vals.empty()) throw ConfigError("empty list");
  return vals;
}

void log_diagnostics(const EnergyDiagnostics& diag, std::ostream& err) {
  err << std::setprecision(3);
  err << "riccati: rel residual " << diag.riccati_residual_rel << ", " << diag.newton_steps
      << " refinement step(s)\n";
  for (const auto& [k, seconds] : diag.degree_seconds)
    err << "degree " << k << ": " << seconds << " s\n";
  err << "path: " << (diag.path_used == SchurKind::Complex ? "complex" : "real")
      << ", max solve residual " << diag.kway_residual_max << ", total " << diag.total_seconds
      << " s\n";
}

void add_model_build(CLI::App& app, std::ostream& err) {
  auto* cmd = app.add_subcommand("model-build",
                                 "Assemble the cubic reaction-diffusion model and write it");
  auto cfg = std::make_shared<HeatModelConfig>();
  auto common = std::make_shared<CommonOutputOptions>();
  auto out_file = std::make_shared<std::string>();
  cmd->add_option("--elements", cfg->elements, "Number of mesh elements (state dim + 1)")
      ->required();
  cmd->add_option("--out", *out_file, "Output model file (JSON)")->required();
  cmd->add_option("--length", cfg->length, "Domain length");
  cmd->add_option("--inputs", cfg->inputs, "Number of input subdomains");
  cmd->add_option("--outputs", cfg->outputs, "Number of output subdomains");
  cmd->add_option("--reaction", cfg->reaction, "Linear reaction coefficient");
  cmd->add_option("--convection", cfg->convection, "Convection coefficient");
  cmd->add_option("--cubic", cfg->cubic, "Cubic reaction coefficient");
  cmd->add_flag("--lumped-mass,!--consistent-mass", cfg->lumped_mass,
                "Diagonal lumped mass (default) vs the consistent Galerkin mass");
  cmd->add_option("--amplitude", cfg->initial_amplitude, "Initial profile amplitude");
  cmd->add_option("--sidecar-threshold-mb", common->sidecar_threshold_mb,
                  "Inline payloads up to this size; spill larger ones to a .bin sidecar");
  cmd->callback([cfg, common, out_file, &err]() {
    const AssembledModel model = build_heat_fem(*cfg);
    save_model(model, *out_file, common->save_options());
    err << "wrote model with state dimension " << model.sys.n() << " to " << *out_file << "\n";
  });
}

void add_energy_compute(CLI::App& app, std::ostream& err) {
  auto* cmd = app.add_subcommand("energy-compute",
                                 "Compute polynomial energy coefficients for a model");
  struct Args {
    std::string model, out, kind = "future", path = "auto";
    double eta = 0.5;
    int degree = 2;
    bool no_verify = false;
    CommonOutputOptions common;
    double kway_tol = 1e-8;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--model", a->model, "Model file from model-build")->required();
  cmd->add_option("--out", a->out, "Output coefficient file (JSON)")->required();
  cmd->add_option("--kind", a->kind, "past or future");
  cmd->add_option("--eta", a->eta, "Gain parameter eta = 1 - 1/gamma^2, nonzero, <= 1");
  cmd->add_option("--degree", a->degree, "Polynomial degree d >= 2")->required();
  cmd->add_option("--path", a->path, "Schur solve form: auto, complex, or real");
  cmd->add_option("--kway-tol", a->kway_tol, "Relative residual allowed per coefficient solve");
  cmd->add_flag("--no-verify", a->no_verify, "Skip the residual verification pass");
  cmd->add_option("--sidecar-threshold-mb", a->common.sidecar_threshold_mb,
                  "Inline payloads up to this size; spill larger ones to a .bin sidecar");
  cmd->callback([a, &err]() {
    const AssembledModel model = load_model(a->model);
    EnergyOptions opts;
    opts.path = parse_path(a->path);
    opts.kway_tol = a->kway_tol;
    opts.verify_solves = !a->no_verify;
    EnergyDiagnostics diag;
    const EnergyKind kind = parse_kind(a->kind);
    const EnergyPoly energy =
        kind == EnergyKind::Past
            ? compute_past_energy(model.sys, a->eta, a->degree, opts, &diag)
            : compute_future_energy(model.sys, a->eta, a->degree, opts, &diag);
    log_diagnostics(diag, err);
    save_energy(energy, a->out, a->common.save_options());
    err << "wrote " << a->kind << " energy (n=" << energy.n << ", degree=" << energy.degree
        << ") to " << a->out << "\n";
  });
}

void add_energy_eval(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("energy-eval", "Evaluate a stored energy polynomial");
  struct Args {
    std::string energy, model, x;
    bool at_x0 = false, grad = false;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--energy", a->energy, "Coefficient file from energy-compute")->required();
  cmd->add_flag("--at-x0", a->at_x0, "Evaluate at the model's initial state");
  cmd->add_option("--model", a->model, "Model file (required with --at-x0)");
  cmd->add_option("--x", a->x, "Comma-separated state vector");
  cmd->add_flag("--grad", a->grad, "Also print the gradient");
  cmd->callback([a, &out]() {
    const EnergyPoly energy = load_energy(a->energy);
    Vector x;
    if (a->at_x0 != a->x.empty()) {
      // exactly one of --at-x0 / --x must be chosen
      throw ConfigError("energy-eval: pass either --at-x0 (with --model) or --x");
    }
    if (a->at_x0) {
      if (a->model.empty()) throw ConfigError("energy-eval: --at-x0 needs --model");
      x = load_model(a->model).x0;
    } else {
      const auto vals = parse_double_list(a->x);
      x = Eigen::Map<const Vector>(vals.data(), Index(vals.size()));
    }
    if (x.size() != energy.n)
      throw DimensionError("energy-eval: state has length " + std::to_string(x.size()) +
                           ", energy expects " + std::to_string(energy.n));
    out << std::setprecision(17) << energy.eval(x) << "\n";
    if (a->grad) {
      const Vector g = energy.grad(x);
      for (Index i = 0; i < g.size(); ++i) out << (i ? "," : "") << g[i];
      out << "\n";
    }
  });
}

void add_residual_check(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand(
      "residual-check", "Evaluate the Hamilton-Jacobi residual on a radial sample grid");
  struct Args {
    std::string model, energy, grid = "1e-3:1e-1:13";
    int directions = 8;
    std::uint64_t seed = 1;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--model", a->model, "Model file")->required();
  cmd->add_option("--energy", a->energy, "Coefficient file")->required();
  cmd->add_option("--eps-grid", a->grid, "Radii as min:max:count (log-spaced)");
  cmd->add_option("--directions", a->directions, "Random unit directions per radius")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a->seed, "Direction sampling seed");
  cmd->callback([a, &out, &err]() {
    const AssembledModel model = load_model(a->model);
    const EnergyPoly energy = load_energy(a->energy);
    if (energy.n != model.sys.n())
      throw DimensionError("residual-check: model and energy dimensions differ");
    const std::vector<double> grid = parse_eps_grid(a->grid);

    std::mt19937_64 rng(a->seed);
    std::normal_distribution<double> gauss;
    std::vector<Vector> dirs(std::size_t(a->directions));
    for (auto& u : dirs) {
      u.resize(model.sys.n());
      for (Index i = 0; i < u.size(); ++i) u[i] = gauss(rng);
      u.normalize();
    }

    out << "eps,max_residual\n" << std::setprecision(17);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const double eps : grid) {
      double worst = 0;
      for (const auto& u : dirs)
        worst = std::max(worst, std::abs(hjb_residual(model.sys, energy, eps * u)));
      out << eps << ',' << worst << "\n";
      const double lx = std::log(eps), ly = std::log(std::max(worst, 1e-300));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double m = double(grid.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    err << "fitted residual slope: " << std::setprecision(3) << slope
        << " (degree-" << energy.degree << " truncation predicts about "
        << energy.degree + 1 << ")\n";
  });
}

void add_bench(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("bench", "Time energy computation across dimensions/degrees");
  struct Args {
    std::string dims, degrees, kind = "future", path = "auto", out_file;
    double eta = 0.5;
    int reps = 1;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--dims", a->dims, "Comma-separated state dimensions")->required();
  cmd->add_option("--degrees", a->degrees, "Comma-separated polynomial degrees")->required();
  cmd->add_option("--eta", a->eta, "Gain parameter");
  cmd->add_option("--kind", a->kind, "past or future");
  cmd->add_option("--reps", a->reps, "Minimum repetitions per case")->check(CLI::PositiveNumber);
  cmd->add_option("--path", a->path, "auto, complex, or real");
  cmd->add_option("--out", a->out_file, "CSV output file (default: stdout)");
  cmd->callback([a, &out, &err]() {
    BenchSettings settings;
    for (const double v : parse_double_list(a->dims)) settings.dims.push_back(Index(v));
    for (const double v : parse_double_list(a->degrees)) settings.degrees.push_back(int(v));
    settings.eta = a->eta;
    settings.kind = parse_kind(a->kind);
    settings.reps = a->reps;
    settings.energy.path = parse_path(a->path);
    const auto records = run_benchmark(settings, &err);
    if (a->out_file.empty()) {
      write_csv(records, out);
    } else {
      std::ofstream f(a->out_file, std::ios::trunc);
      if (!f) throw IoError("cannot open " + a->out_file + " for writing");
      write_csv(records, f);
      err << "wrote " << records.size() << " record(s) to " << a->out_file << "\n";
    }
  });
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (const char* threads = std::getenv("POLYENERGY_NUM_THREADS")) {
    const int k = std::atoi(threads);
    if (k > 0) Eigen::setNbThreads(k);
  }
  CLI::App app{"Polynomial approximations of past/future energy functions for "
               "systems with polynomial drift"};
  app.require_subcommand(1);
  add_model_build(app, err);
  add_energy_compute(app, err);
  add_energy_eval(app, out);
  add_residual_check(app, out, err);
  add_bench(app, out, err);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, msg, msg);
    (code == 0 ? out : err) << msg.str();
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace polyenergy
