#include "polyenergy/kway_solver.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <sstream>

#include "polyenergy/kronpoly.hpp"

namespace polyenergy {

namespace {

using Complex = std::complex<double>;

std::string fmt_sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Index block_size_at(const Matrix& Tr, Index bi) {
  return (bi + 1 < Tr.rows() && Tr(bi + 1, bi) != 0.0) ? 2 : 1;
}

// Eigen data of one 2x2 quasi-triangular diagonal block: eigenvalues mu +- i nu,
// eigenvector for mu + i nu proportional to [q, lambda - p].
struct PairBlock {
  double p, q, mu, nu;
};

PairBlock pair_of_block(const Matrix& Tr, Index i) {
  const double p = Tr(i, i), q = Tr(i, i + 1);
  const double r = Tr(i + 1, i), s = Tr(i + 1, i + 1);
  const double mu = 0.5 * (p + s);
  const double disc = 0.25 * (p - s) * (p - s) + q * r;
  if (!(disc < 0.0))
    throw FactorizationError("quasi-triangular 2x2 block without a complex pair");
  return {p, q, mu, std::sqrt(-disc)};
}

// Applies (I_a (x) M (x) I_b) to `in`, writing `out`, where Mt = M^T (n x n).
// Layout: first Kronecker factor varies slowest.
template <class Scalar>
void mode_multiply(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& Mt,
                   const Scalar* in, Scalar* out, Index a, Index b) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = Mt.rows();
  if (b == 1) {
    Eigen::Map<const Mat> in_m(in, n, a);
    Eigen::Map<Mat> out_m(out, n, a);
    out_m.noalias() = Mt.transpose() * in_m;
    return;
  }
  for (Index alpha = 0; alpha < a; ++alpha) {
    Eigen::Map<const Mat> in_m(in + alpha * n * b, b, n);
    Eigen::Map<Mat> out_m(out + alpha * n * b, b, n);
    out_m.noalias() = in_m * Mt;
  }
}

[[noreturn]] void throw_resonance(double pivot_abs, double tol) {
  throw ResonanceError("solve_kway: eigenvalue-sum pivot of modulus " +
                       fmt_sci(pivot_abs) + " is within the singular tolerance " +
                       fmt_sci(tol));
}

// Substitution on the complex triangular form: solves (L~_j + s I) y = w in
// place, where L~_j is the j-way operator built from T^T (lower triangular).
void backsub_complex(const ComplexMatrix& T, int j, Index len, Complex s,
                     Complex* W, double tol) {
  const Index n = T.rows();
  if (j == 1) {
    Eigen::Map<ComplexVector> w(W, n);
    for (Index i = 0; i < n; ++i) {
      Complex acc = w[i];
      if (i > 0) acc -= (T.col(i).head(i).array() * w.head(i).array()).sum();
      const Complex pivot = T(i, i) + s;
      if (std::abs(pivot) <= tol) throw_resonance(std::abs(pivot), tol);
      w[i] = acc / pivot;
    }
    return;
  }
  const Index stride = len / n;
  Eigen::Map<ComplexMatrix> Y(W, stride, n);
  for (Index i = 0; i < n; ++i) {
    if (i > 0) Y.col(i).noalias() -= Y.leftCols(i) * T.col(i).head(i);
    backsub_complex(T, j - 1, stride, s + T(i, i), W + i * stride, tol);
  }
}

// Substitution on the real quasi-triangular form with complex data (entered
// after a complex-pair block has been decoupled higher up the recursion).
void backsub_real_cplx(const SchurCache& c, int j, Index len, Complex s,
                       Complex* W, double tol, double det_tol) {
  const Matrix& Tr = c.quasi_triangular();
  const ComplexMatrix& Tc = c.quasi_triangular_complex();
  const Index n = Tr.rows();
  if (j == 1) {
    Eigen::Map<ComplexVector> w(W, n);
    for (Index bi : c.block_starts()) {
      Complex r0 = w[bi];
      if (bi > 0) r0 -= (Tc.col(bi).head(bi).array() * w.head(bi).array()).sum();
      if (block_size_at(Tr, bi) == 1) {
        const Complex pivot = Tr(bi, bi) + s;
        if (std::abs(pivot) <= tol) throw_resonance(std::abs(pivot), tol);
        w[bi] = r0 / pivot;
      } else {
        Complex r1 = w[bi + 1];
        if (bi > 0) r1 -= (Tc.col(bi + 1).head(bi).array() * w.head(bi).array()).sum();
        const Complex a00 = Tr(bi, bi) + s, a01 = Tr(bi + 1, bi);
        const Complex a10 = Tr(bi, bi + 1), a11 = Tr(bi + 1, bi + 1) + s;
        const Complex det = a00 * a11 - a01 * a10;
        if (std::abs(det) <= det_tol) throw_resonance(std::abs(det), det_tol);
        w[bi] = (a11 * r0 - a01 * r1) / det;
        w[bi + 1] = (a00 * r1 - a10 * r0) / det;
      }
    }
    return;
  }
  const Index stride = len / n;
  Eigen::Map<ComplexMatrix> Y(W, stride, n);
  for (Index bi : c.block_starts()) {
    const Index size = block_size_at(Tr, bi);
    if (bi > 0)
      for (Index r = 0; r < size; ++r)
        Y.col(bi + r).noalias() -= Y.leftCols(bi) * Tc.col(bi + r).head(bi);
    if (size == 1) {
      backsub_real_cplx(c, j - 1, stride, s + Tr(bi, bi), W + bi * stride, tol,
                        det_tol);
    } else {
      const PairBlock pb = pair_of_block(Tr, bi);
      const Complex lam(pb.mu, pb.nu), lam_c(pb.mu, -pb.nu);
      const Complex vp = lam - pb.p, vp_c = lam_c - pb.p;
      Complex* z1 = W + bi * stride;
      Complex* z2 = z1 + stride;
      for (Index t = 0; t < stride; ++t) {
        const Complex a = z1[t], b = z2[t];
        z1[t] = pb.q * a + vp * b;
        z2[t] = pb.q * a + vp_c * b;
      }
      backsub_real_cplx(c, j - 1, stride, s + lam, z1, tol, det_tol);
      backsub_real_cplx(c, j - 1, stride, s + lam_c, z2, tol, det_tol);
      const Complex det = pb.q * (lam_c - lam);  // modulus 2 |q| nu > 0
      for (Index t = 0; t < stride; ++t) {
        const Complex t1 = z1[t], t2 = z2[t];
        z1[t] = (t1 * vp_c - t2 * vp) / det;
        z2[t] = pb.q * (t2 - t1) / det;
      }
    }
  }
}

// Substitution on the real quasi-triangular form with real data. A complex-pair
// block turns its two sub-tensors into one complex sub-problem (packed into
// `scratch`) solved by backsub_real_cplx, then maps the solution back; the
// working set stays at two real tensors plus one n^(k-1) complex scratch.
void backsub_real(const SchurCache& c, int j, Index len, double s, double* W,
                  double tol, double det_tol, Complex* scratch) {
  const Matrix& Tr = c.quasi_triangular();
  const Index n = Tr.rows();
  if (j == 1) {
    Eigen::Map<Vector> w(W, n);
    for (Index bi : c.block_starts()) {
      double r0 = w[bi];
      if (bi > 0) r0 -= Tr.col(bi).head(bi).dot(w.head(bi));
      if (block_size_at(Tr, bi) == 1) {
        const double pivot = Tr(bi, bi) + s;
        if (std::abs(pivot) <= tol) throw_resonance(std::abs(pivot), tol);
        w[bi] = r0 / pivot;
      } else {
        double r1 = w[bi + 1];
        if (bi > 0) r1 -= Tr.col(bi + 1).head(bi).dot(w.head(bi));
        const double a00 = Tr(bi, bi) + s, a01 = Tr(bi + 1, bi);
        const double a10 = Tr(bi, bi + 1), a11 = Tr(bi + 1, bi + 1) + s;
        const double det = a00 * a11 - a01 * a10;
        if (std::abs(det) <= det_tol) throw_resonance(std::abs(det), det_tol);
        w[bi] = (a11 * r0 - a01 * r1) / det;
        w[bi + 1] = (a00 * r1 - a10 * r0) / det;
      }
    }
    return;
  }
  const Index stride = len / n;
  Eigen::Map<Matrix> Y(W, stride, n);
  for (Index bi : c.block_starts()) {
    const Index size = block_size_at(Tr, bi);
    if (bi > 0)
      for (Index r = 0; r < size; ++r)
        Y.col(bi + r).noalias() -= Y.leftCols(bi) * Tr.col(bi + r).head(bi);
    if (size == 1) {
      backsub_real(c, j - 1, stride, s + Tr(bi, bi), W + bi * stride, tol,
                   det_tol, scratch);
    } else {
      const PairBlock pb = pair_of_block(Tr, bi);
      const Complex lam(pb.mu, pb.nu);
      double* y1 = W + bi * stride;
      double* y2 = y1 + stride;
      const double mp = pb.mu - pb.p;
      for (Index t = 0; t < stride; ++t)
        scratch[t] = Complex(pb.q * y1[t] + mp * y2[t], pb.nu * y2[t]);
      backsub_real_cplx(c, j - 1, stride, s + lam, scratch, tol, det_tol);
      for (Index t = 0; t < stride; ++t) {
        const double re = scratch[t].real(), im = scratch[t].imag();
        y2[t] = im / pb.nu;
        y1[t] = (pb.nu * re - mp * im) / (pb.nu * pb.q);
      }
    }
  }
}

}  // namespace

SchurCache::SchurCache(const Matrix& M, SchurKind kind)
    : M_(M), kind_(kind), n_(M.rows()) {
  if (M.rows() != M.cols()) throw DimensionError("schur_factor: matrix must be square");
  if (n_ < 1) throw DimensionError("schur_factor: empty matrix");
  if (!M.allFinite()) throw ConfigError("schur_factor: non-finite entries");
  if (kind_ == SchurKind::Complex) {
    Eigen::ComplexSchur<ComplexMatrix> cs(M.cast<Complex>());
    if (cs.info() != Eigen::Success)
      throw FactorizationError("complex Schur iteration failed to converge");
    U_ = cs.matrixU();
    T_ = cs.matrixT();
    eigenvalues_ = T_.diagonal();
  } else {
    Eigen::RealSchur<Matrix> rs(M);
    if (rs.info() != Eigen::Success)
      throw FactorizationError("real Schur iteration failed to converge");
    Ur_ = rs.matrixU();
    Tr_ = rs.matrixT();
    Tc_ = Tr_.cast<Complex>();
    eigenvalues_.resize(n_);
    Index i = 0;
    while (i < n_) {
      blocks_.push_back(i);
      if (block_size_at(Tr_, i) == 2) {
        const PairBlock pb = pair_of_block(Tr_, i);
        eigenvalues_[i] = Complex(pb.mu, pb.nu);
        eigenvalues_[i + 1] = Complex(pb.mu, -pb.nu);
        i += 2;
      } else {
        eigenvalues_[i] = Complex(Tr_(i, i), 0.0);
        i += 1;
      }
    }
  }
  max_abs_eig_ = eigenvalues_.cwiseAbs().maxCoeff();
}

const ComplexMatrix& SchurCache::unitary() const {
  if (kind_ != SchurKind::Complex) throw ConfigError("SchurCache: not a complex factorization");
  return U_;
}

const ComplexMatrix& SchurCache::triangular() const {
  if (kind_ != SchurKind::Complex) throw ConfigError("SchurCache: not a complex factorization");
  return T_;
}

const Matrix& SchurCache::orthogonal() const {
  if (kind_ != SchurKind::Real) throw ConfigError("SchurCache: not a real factorization");
  return Ur_;
}

const Matrix& SchurCache::quasi_triangular() const {
  if (kind_ != SchurKind::Real) throw ConfigError("SchurCache: not a real factorization");
  return Tr_;
}

const ComplexMatrix& SchurCache::quasi_triangular_complex() const {
  if (kind_ != SchurKind::Real) throw ConfigError("SchurCache: not a real factorization");
  return Tc_;
}

const std::vector<Index>& SchurCache::block_starts() const {
  if (kind_ != SchurKind::Real) throw ConfigError("SchurCache: not a real factorization");
  return blocks_;
}

SchurCache schur_factor(const Matrix& M, SchurKind kind) { return {M, kind}; }

bool check_solvability(const SchurCache& cache, int k) {
  if (k < 1) throw ConfigError("check_solvability: k must be >= 1");
  const ComplexVector& ev = cache.eigenvalues();
  const double tol = cache.resonance_tolerance(k);
  const double max_re = ev.real().maxCoeff();
  const double min_re = ev.real().minCoeff();
  if (max_re < 0.0 && static_cast<double>(k) * max_re < -tol) return true;
  if (min_re > 0.0 && static_cast<double>(k) * min_re > tol) return true;
  const Index n = ev.size();
  double combos = 1.0;
  for (int t = 1; t <= k; ++t)
    combos *= static_cast<double>(n + t - 1) / static_cast<double>(t);
  if (combos > 1e8)
    throw ConfigError("check_solvability: " + fmt_sci(combos) +
                      " eigenvalue combinations exceed the enumeration limit; "
                      "spectrum spans both half planes");
  struct Enumerator {
    const ComplexVector& ev;
    double tol;
    int k;
    bool resonant = false;
    void walk(Index start, int depth, Complex sum) {
      if (resonant) return;
      if (depth == k) {
        if (std::abs(sum) <= tol) resonant = true;
        return;
      }
      for (Index i = start; i < ev.size(); ++i) walk(i, depth + 1, sum + ev[i]);
    }
  } e{ev, tol, k};
  e.walk(0, 0, Complex(0.0, 0.0));
  return !e.resonant;
}

Vector solve_kway(const SchurCache& cache, int k, Vector b, KwaySolveInfo* info,
                  const KwaySettings& settings) {
  if (k < 1) throw ConfigError("solve_kway: k must be >= 1");
  const Index n = cache.dim();
  const std::int64_t len = ipow(n, k);
  if (b.size() != len)
    throw DimensionError("solve_kway: rhs length " + std::to_string(b.size()) +
                         " != n^k = " + std::to_string(len));
  if (!b.allFinite()) throw ConfigError("solve_kway: rhs has non-finite entries");
  const double tol = cache.resonance_tolerance(k);
  const double det_tol = tol * static_cast<double>(k) * cache.max_abs_eigenvalue();
  const double bnorm = b.norm();

  Vector x;
  Vector b_keep;  // rhs retained for verification when the real path consumes b
  if (cache.kind() == SchurKind::Complex) {
    ComplexVector w1 = b.cast<Complex>();
    ComplexVector w2(len);
    const ComplexMatrix& U = cache.unitary();
    for (int j = 1; j <= k; ++j) {
      mode_multiply<Complex>(U, w1.data(), w2.data(), ipow(n, j - 1), ipow(n, k - j));
      w1.swap(w2);
    }
    backsub_complex(cache.triangular(), k, len, Complex(0.0, 0.0), w1.data(), tol);
    const ComplexMatrix U_adj = U.adjoint();
    for (int j = 1; j <= k; ++j) {
      mode_multiply<Complex>(U_adj, w1.data(), w2.data(), ipow(n, j - 1), ipow(n, k - j));
      w1.swap(w2);
    }
    const double imag_norm = w1.imag().norm();
    const double full_norm = w1.norm();
    if (imag_norm > settings.imag_tol * full_norm)
      throw AccuracyError("solve_kway: imaginary leakage " + fmt_sci(imag_norm) +
                          " relative to " + fmt_sci(full_norm));
    x = w1.real();
    b_keep = std::move(b);
  } else {
    if (settings.verify_residual) b_keep = b;
    Vector w1 = std::move(b);
    Vector w2(len);
    const Matrix& Ur = cache.orthogonal();
    for (int j = 1; j <= k; ++j) {
      mode_multiply<double>(Ur, w1.data(), w2.data(), ipow(n, j - 1), ipow(n, k - j));
      w1.swap(w2);
    }
    bool has_pair = false;
    for (Index bi : cache.block_starts())
      if (block_size_at(cache.quasi_triangular(), bi) == 2) has_pair = true;
    ComplexVector scratch;
    if (has_pair && k >= 2) scratch.resize(ipow(n, k - 1));
    backsub_real(cache, k, len, 0.0, w1.data(), tol, det_tol, scratch.data());
    const Matrix Ur_t = Ur.transpose();
    for (int j = 1; j <= k; ++j) {
      mode_multiply<double>(Ur_t, w1.data(), w2.data(), ipow(n, j - 1), ipow(n, k - j));
      w1.swap(w2);
    }
    x = std::move(w1);
  }

  double rel = std::numeric_limits<double>::quiet_NaN();
  if (settings.verify_residual) {
    Vector acc = -b_keep;
    const DenseKronFactor factor(cache.matrix());
    for (int j = 1; j <= k; ++j)
      detail::add_kron_slot_t(factor, x.data(), acc.data(), ipow(n, j - 1),
                              ipow(n, k - j), 1.0);
    const double rnorm = acc.norm();
    rel = bnorm > 0.0 ? rnorm / bnorm
                      : (rnorm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (!(rel <= settings.tol_res))
      throw AccuracyError("solve_kway: relative residual " + fmt_sci(rel) +
                          " exceeds tolerance " + fmt_sci(settings.tol_res));
  }
  if (info) info->rel_residual = rel;
  return x;
}

}  // namespace polyenergy
