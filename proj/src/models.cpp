#include "polyenergy/models.hpp"

#include <Eigen/Eigenvalues>

#include <random>
#include <vector>

namespace polyenergy {

void HeatModelConfig::validate() const {
  if (elements < 2) throw ConfigError("heat model: need at least 2 elements");
  if (length <= 0.0) throw ConfigError("heat model: length must be positive");
  if (inputs < 1 || outputs < 1) throw ConfigError("heat model: inputs/outputs must be >= 1");
  if (elements % inputs != 0)
    throw ConfigError("heat model: element count must be a multiple of the input count");
  if (elements % outputs != 0)
    throw ConfigError("heat model: element count must be a multiple of the output count");
}

namespace {

// Indicator-actuator load: entry (a-1, j) is the integral of hat function a
// against the indicator of subinterval j; each adjacent element inside the
// subinterval contributes h/2.
Matrix indicator_load(Index N, Index parts, double h) {
  const Index n = N - 1;
  const Index span = N / parts;
  Matrix L = Matrix::Zero(n, parts);
  for (Index j = 0; j < parts; ++j) {
    const Index lo = j * span, hi = (j + 1) * span;  // element range [lo, hi)
    for (Index a = 1; a < N; ++a) {
      double w = 0.0;
      if (a - 1 >= lo && a - 1 < hi) w += 0.5 * h;
      if (a >= lo && a < hi) w += 0.5 * h;
      if (w != 0.0) L(a - 1, j) = w;
    }
  }
  return L;
}

}  // namespace

AssembledModel build_heat_fem(const HeatModelConfig& config) {
  config.validate();
  const Index N = config.elements;
  const Index n = N - 1;
  const double h = config.length / static_cast<double>(N);

  // Mass matrix (consistent, or its row-sum lumping h I) and the linear
  // Galerkin operator K = -S + conv D + react M.
  Matrix M = Matrix::Zero(n, n);
  Matrix K = Matrix::Zero(n, n);
  for (Index a = 0; a < n; ++a) {
    M(a, a) = 4.0 * h / 6.0;
    if (a + 1 < n) {
      M(a, a + 1) = h / 6.0;
      M(a + 1, a) = h / 6.0;
    }
  }
  if (config.lumped_mass) M = h * Matrix::Identity(n, n);
  for (Index a = 0; a < n; ++a) {
    K(a, a) = -2.0 / h + config.reaction * M(a, a);
    if (a + 1 < n) {
      K(a, a + 1) = 1.0 / h + 0.5 * config.convection + config.reaction * M(a, a + 1);
      K(a + 1, a) = 1.0 / h - 0.5 * config.convection + config.reaction * M(a + 1, a);
    }
  }

  auto mass_llt = std::make_shared<Eigen::LLT<Matrix>>(M);
  if (mass_llt->info() != Eigen::Success)
    throw FactorizationError("heat model: mass matrix not positive definite");

  PolyDynamics sys;
  sys.A = mass_llt->solve(K);
  sys.B = mass_llt->solve(indicator_load(N, config.inputs, h));
  sys.C = indicator_load(N, config.outputs, h).transpose();

  if (config.cubic != 0.0) {
    // Exact element integrals of products of four hat functions; tab[r] * h is
    // the integral with r factors on the right node of the element.
    const double tab[5] = {1.0 / 5.0, 1.0 / 20.0, 1.0 / 30.0, 1.0 / 20.0, 1.0 / 5.0};
    std::vector<Eigen::Triplet<double, std::int64_t>> trips;
    trips.reserve(static_cast<std::size_t>(16 * N));
    for (Index e = 0; e < N; ++e) {
      for (int mask = 0; mask < 16; ++mask) {
        const Index node[4] = {e + ((mask >> 3) & 1), e + ((mask >> 2) & 1),
                               e + ((mask >> 1) & 1), e + (mask & 1)};
        if (node[0] == 0 || node[0] == N || node[1] == 0 || node[1] == N ||
            node[2] == 0 || node[2] == N || node[3] == 0 || node[3] == N)
          continue;  // Dirichlet rows/columns
        const int rights = ((mask >> 3) & 1) + ((mask >> 2) & 1) + ((mask >> 1) & 1) + (mask & 1);
        const std::int64_t col =
            ((node[1] - 1) * n + (node[2] - 1)) * n + (node[3] - 1);
        trips.emplace_back(node[0] - 1, col, config.cubic * h * tab[rights]);
      }
    }
    SparseTensor G3(n, ipow(n, 3));
    G3.setFromTriplets(trips.begin(), trips.end());
    sys.drift.emplace(3, DriftTerm::mass_solve_sparse(3, std::move(G3), mass_llt));
  }

  AssembledModel model;
  model.mesh_width = h;
  model.mass = M;
  model.config = config;
  model.x0.resize(n);
  const double L = config.length;
  for (Index a = 1; a < N; ++a) {
    const double x = static_cast<double>(a) * h;
    model.x0[a - 1] = config.initial_amplitude * x * (x - L) * (x - 0.5 * L);
  }
  model.sys = std::move(sys);
  model.sys.validate();
  return model;
}

PolyDynamics build_scalar_cubic(double a, double b, double c, double f3) {
  PolyDynamics sys;
  sys.A = Matrix::Constant(1, 1, a);
  sys.B = Matrix::Constant(1, 1, b);
  sys.C = Matrix::Constant(1, 1, c);
  sys.drift.emplace(3, DriftTerm::dense(3, Matrix::Constant(1, 1, f3)));
  sys.validate();
  return sys;
}

PolyDynamics build_random_stable(Index n, Index m, Index p_out,
                                 int max_drift_order, std::uint64_t seed) {
  if (n < 1 || m < 1 || p_out < 1) throw ConfigError("random system: empty dimensions");
  if (max_drift_order < 1) throw ConfigError("random system: drift order must be >= 1");
  if (max_drift_order > 1 && ipow(n, max_drift_order + 1) > 10'000'000)
    throw ConfigError("random system: drift coefficients over the size limit");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](Index r, Index c) {
    Matrix X(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) X(i, j) = unit(rng);
    return X;
  };

  PolyDynamics sys;
  sys.A = fill(n, n);
  const Eigen::EigenSolver<Matrix> es(sys.A, false);
  if (es.info() != Eigen::Success)
    throw FactorizationError("random system: eigenvalue computation failed");
  sys.A -= (es.eigenvalues().real().maxCoeff() + 0.5) * Matrix::Identity(n, n);
  sys.B = fill(n, m);
  sys.C = fill(p_out, n);
  for (int p = 2; p <= max_drift_order; ++p) {
    Matrix F = fill(n, ipow(n, p));
    const double nrm = F.norm();
    if (nrm > 1.0) F /= nrm;
    sys.drift.emplace(p, DriftTerm::dense(p, std::move(F)));
  }
  sys.validate();
  return sys;
}

}  // namespace polyenergy
