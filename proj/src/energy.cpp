#include "polyenergy/energy.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace polyenergy {

namespace {

std::string fmt_sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SchurKind pick_path(const EnergyOptions& opts, Index n, int degree) {
  switch (opts.path) {
    case SchurPath::Complex:
      return SchurKind::Complex;
    case SchurPath::Real:
      return SchurKind::Real;
    case SchurPath::Auto:
      break;
  }
  const std::int64_t top = ipow(n, degree);
  return (top <= opts.complex_path_budget_bytes / 56) ? SchurKind::Complex
                                                      : SchurKind::Real;
}

}  // namespace

const KCoeff& EnergyPoly::coeff(int order) const {
  if (order < 2 || order > degree)
    throw ConfigError("energy: no coefficient of order " + std::to_string(order));
  return coeffs[static_cast<std::size_t>(order - 2)];
}

void EnergyPoly::validate() const {
  if (degree < 2) throw ConfigError("energy: degree must be >= 2");
  if (n < 1) throw DimensionError("energy: empty state");
  if (coeffs.size() != static_cast<std::size_t>(degree - 1))
    throw ConfigError("energy: expected coefficients of orders 2.." +
                      std::to_string(degree));
  for (int k = 2; k <= degree; ++k) {
    const KCoeff& c = coeffs[static_cast<std::size_t>(k - 2)];
    c.validate();
    if (c.order != k) throw ConfigError("energy: coefficient order out of sequence");
    if (c.dim != n) throw DimensionError("energy: coefficient dimension mismatch");
  }
  if (eta == 0.0 || eta > 1.0) throw ConfigError("energy: eta out of range");
}

Matrix closed_loop_matrix(const PolyDynamics& sys, const Matrix& X2,
                          EnergyKind kind, double eta) {
  if (X2.rows() != sys.n() || X2.cols() != sys.n())
    throw DimensionError("closed_loop_matrix: X2 must be n x n");
  if (kind == EnergyKind::Past) return sys.A + sys.B * (sys.B.transpose() * X2);
  return sys.A - eta * (sys.B * (sys.B.transpose() * X2));
}

namespace detail {

Vector assemble_degree_rhs(const PolyDynamics& sys, EnergyKind kind, double eta,
                           int k, const std::vector<KCoeff>& coeffs,
                           const std::vector<Matrix>& vtb, double sign) {
  const Index n = sys.n();
  const std::int64_t len = ipow(n, k);
  Vector rhs = Vector::Zero(len);

  // Drift interactions: order-p drift couples to the coefficient of order
  // i = k + 1 - p (present for i >= 2).
  for (const auto& [p, term] : sys.drift) {
    const int i = k + 1 - p;
    if (i < 2) continue;
    const KCoeff& vi = coeffs[static_cast<std::size_t>(i - 2)];
    add_lyap_mult_t(term.factor(), vi, -sign, rhs.data(), len);
  }

  // Gradient-squared interactions between pairs of cubic-and-higher
  // coefficients (the quadratic one already sits inside the closed loop).
  const double base = (kind == EnergyKind::Past ? -0.25 : 0.25 * eta) * sign;
  for (int i = 3; i <= k - 1; ++i) {
    const int j = k + 2 - i;
    if (j < 3 || j > k - 1) continue;
    const Matrix& Pi = vtb[static_cast<std::size_t>(i)];
    const Matrix& Pj = vtb[static_cast<std::size_t>(j)];
    Eigen::Map<Matrix> R(rhs.data(), ipow(n, j - 1), ipow(n, i - 1));
    R.noalias() += (base * i * j) * (Pj * Pi.transpose());
  }
  return rhs;
}

}  // namespace detail

namespace {

EnergyPoly compute_energy(const PolyDynamics& sys, double eta, int degree,
                          EnergyKind kind, const EnergyOptions& opts,
                          EnergyDiagnostics* diag) {
  sys.validate();
  if (degree < 2) throw ConfigError("energy: degree must be >= 2");
  const Index n = sys.n();
  if (ipow(n, degree) > (std::int64_t(1) << 34))
    throw ConfigError("energy: n^degree too large to hold a coefficient");

  EnergyDiagnostics local;
  EnergyDiagnostics& d = diag ? *diag : local;
  d = EnergyDiagnostics{};
  const auto t_start = std::chrono::steady_clock::now();

  auto t0 = std::chrono::steady_clock::now();
  const RiccatiSolution ric =
      kind == EnergyKind::Past
          ? solve_past_riccati(sys.A, sys.B, sys.C, eta, opts.riccati)
          : solve_future_riccati(sys.A, sys.B, sys.C, eta, opts.riccati);
  d.riccati_residual_abs = ric.residual_abs;
  d.riccati_residual_rel = ric.residual_rel;
  d.newton_steps = ric.newton_steps;

  EnergyPoly energy;
  energy.kind = kind;
  energy.eta = eta;
  energy.n = n;
  energy.degree = degree;
  energy.coeffs.emplace_back(
      2, n, Eigen::Map<const Vector>(ric.X.data(), n * n), true);
  d.degree_seconds.emplace_back(2, seconds_since(t0));

  if (degree > 2) {
    const SchurKind path = pick_path(opts, n, degree);
    d.path_used = path;
    const SchurCache cache(ric.closed_loop, path);
    for (int k = 3; k <= degree; ++k)
      if (!check_solvability(cache, k))
        throw ResonanceError("energy: closed-loop eigenvalue sums of order " +
                             std::to_string(k) + " are resonant");

    std::vector<Matrix> vtb(static_cast<std::size_t>(degree));
    KwaySettings solve_settings;
    solve_settings.verify_residual = false;  // verified below with 2 buffers
    solve_settings.tol_res = opts.kway_tol;

    for (int k = 3; k <= degree; ++k) {
      t0 = std::chrono::steady_clock::now();
      Vector rhs = detail::assemble_degree_rhs(sys, kind, eta, k, energy.coeffs,
                                               vtb, 1.0);
      const double bnorm = rhs.norm();
      Vector v = solve_kway(cache, k, std::move(rhs), nullptr, solve_settings);

      if (opts.verify_solves) {
        const DenseKronFactor cl_factor(cache.matrix());
        const auto residual_vec = [&]() {
          Vector acc = detail::assemble_degree_rhs(sys, kind, eta, k,
                                                   energy.coeffs, vtb, -1.0);
          for (int j = 1; j <= k; ++j)
            detail::add_kron_slot_t(cl_factor, v.data(), acc.data(),
                                    ipow(n, j - 1), ipow(n, k - j), 1.0);
          return acc;
        };
        const auto rel_of = [&](const Vector& acc) {
          const double rnorm = acc.norm();
          return bnorm > 0.0 ? rnorm / bnorm
                             : (rnorm == 0.0
                                    ? 0.0
                                    : std::numeric_limits<double>::infinity());
        };
        Vector acc = residual_vec();
        double rel = rel_of(acc);
        // Strongly non-normal closed loops (e.g. an anti-stabilizing branch
        // with a large solution norm) can leave the one-shot substitution with
        // a residual near eps * ||T|| / ||b||. Iterative refinement fixes
        // that; it needs a third tensor-sized buffer, so it is only attempted
        // while that fits the configured budget.
        for (int pass = 0;
             pass < 2 && !(rel <= opts.kway_tol) &&
             24 * ipow(n, k) <= opts.complex_path_budget_bytes;
             ++pass) {
          acc = -acc;
          Vector dv = solve_kway(cache, k, std::move(acc), nullptr, solve_settings);
          v += dv;
          dv.resize(0);
          acc = residual_vec();
          const double rel_new = rel_of(acc);
          const bool improved = rel_new < rel;
          rel = rel_new;  // always describes the v we would return
          if (!improved) break;
        }
        if (!(rel <= opts.kway_tol))
          throw AccuracyError("energy: degree-" + std::to_string(k) +
                              " solve has relative residual " + fmt_sci(rel));
        d.kway_residual_max = std::max(d.kway_residual_max, rel);
      }

      KCoeff ck(k, n, std::move(v));
      symmetrize_in_place(ck);
      if (k < degree)
        vtb[static_cast<std::size_t>(k)] = ck.matricized().transpose() * sys.B;
      energy.coeffs.push_back(std::move(ck));
      d.degree_seconds.emplace_back(k, seconds_since(t0));
    }
  }

  d.total_seconds = seconds_since(t_start);
  energy.validate();
  return energy;
}

}  // namespace

EnergyPoly compute_past_energy(const PolyDynamics& sys, double eta, int degree,
                               const EnergyOptions& opts, EnergyDiagnostics* diag) {
  return compute_energy(sys, eta, degree, EnergyKind::Past, opts, diag);
}

EnergyPoly compute_future_energy(const PolyDynamics& sys, double eta, int degree,
                                 const EnergyOptions& opts, EnergyDiagnostics* diag) {
  return compute_energy(sys, eta, degree, EnergyKind::Future, opts, diag);
}

double hjb_residual(const PolyDynamics& sys, const EnergyPoly& energy,
                    const Vector& x) {
  sys.validate();
  energy.validate();
  if (x.size() != sys.n()) throw DimensionError("hjb_residual: state dimension mismatch");
  if (energy.n != sys.n()) throw DimensionError("hjb_residual: energy dimension mismatch");
  const Vector grad = poly_grad(energy.coeffs, x);
  const Vector fx = sys.f(x);
  const double quad = (sys.B.transpose() * grad).squaredNorm();
  const double obs = (sys.C * x).squaredNorm();
  if (energy.kind == EnergyKind::Past)
    return grad.dot(fx) + 0.5 * quad - 0.5 * energy.eta * obs;
  return grad.dot(fx) - 0.5 * energy.eta * quad + 0.5 * obs;
}

}  // namespace polyenergy
