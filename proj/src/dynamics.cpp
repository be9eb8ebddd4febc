#include "polyenergy/dynamics.hpp"

namespace polyenergy {

namespace {

class MassSolveSparseFactor final : public KronFactor {
 public:
  MassSolveSparseFactor(SparseTensor G, std::shared_ptr<const Eigen::LLT<Matrix>> mass)
      : G_(std::move(G)), mass_(std::move(mass)) {
    if (!mass_ || mass_->info() != Eigen::Success)
      throw FactorizationError("drift term: mass matrix is not positive definite");
    if (G_.rows() != mass_->matrixLLT().rows())
      throw DimensionError("drift term: tensor row count != mass dimension");
  }

  Index rows() const override { return G_.rows(); }
  Index cols() const override { return G_.cols(); }

  // out += scale * W * (M^{-1} G): one mass solve, then a sparse contraction.
  void add_right_product(Eigen::Ref<Matrix> out, const Eigen::Ref<const Matrix>& W,
                         double scale) const override {
    const Matrix S = mass_->solve(W.transpose()).transpose();  // W M^{-1}
    for (Index r = 0; r < G_.outerSize(); ++r)
      for (SparseTensor::InnerIterator it(G_, r); it; ++it)
        out.col(it.col()) += (scale * it.value()) * S.col(r);
  }

  // out += scale * G^T M^{-1} W.
  void add_left_tproduct(Eigen::Ref<Matrix> out, const Eigen::Ref<const Matrix>& W,
                         double scale) const override {
    const Matrix Y = mass_->solve(W);
    for (Index r = 0; r < G_.outerSize(); ++r)
      for (SparseTensor::InnerIterator it(G_, r); it; ++it)
        out.row(it.col()) += (scale * it.value()) * Y.row(r);
  }

  Vector apply(const Vector& v) const override {
    if (v.size() != G_.cols()) throw DimensionError("drift term: power length mismatch");
    Vector g = Vector::Zero(G_.rows());
    for (Index r = 0; r < G_.outerSize(); ++r)
      for (SparseTensor::InnerIterator it(G_, r); it; ++it)
        g[r] += it.value() * v[it.col()];
    return mass_->solve(g);
  }

  Matrix dense() const override { return mass_->solve(Matrix(G_)); }

  const SparseTensor& gram() const { return G_; }

 private:
  SparseTensor G_;
  std::shared_ptr<const Eigen::LLT<Matrix>> mass_;
};

}  // namespace

DriftTerm DriftTerm::dense(int order, Matrix F) {
  if (order < 2) throw ConfigError("drift term: order must be >= 2");
  if (F.rows() < 1) throw DimensionError("drift term: empty coefficient");
  if (F.cols() != ipow(F.rows(), order))
    throw DimensionError("drift term: coefficient must be n x n^p");
  return {order, std::make_shared<DenseKronFactor>(std::move(F))};
}

DriftTerm DriftTerm::mass_solve_sparse(int order, SparseTensor G,
                                       std::shared_ptr<const Eigen::LLT<Matrix>> mass) {
  if (order < 2) throw ConfigError("drift term: order must be >= 2");
  if (G.cols() != ipow(G.rows(), order))
    throw DimensionError("drift term: coefficient must be n x n^p");
  return {order, std::make_shared<MassSolveSparseFactor>(std::move(G), std::move(mass))};
}

Vector DriftTerm::apply_power(const Vector& xp) const { return factor_->apply(xp); }

Matrix DriftTerm::dense_matrix(std::int64_t max_entries) const {
  if (factor_->rows() * factor_->cols() > max_entries)
    throw ConfigError("drift term: dense materialization over the entry limit");
  return factor_->dense();
}

const SparseTensor* DriftTerm::sparse_gram() const {
  const auto* p = dynamic_cast<const MassSolveSparseFactor*>(factor_.get());
  return p ? &p->gram() : nullptr;
}

int PolyDynamics::max_drift_order() const {
  return drift.empty() ? 1 : drift.rbegin()->first;
}

void PolyDynamics::validate() const {
  if (A.rows() != A.cols()) throw DimensionError("dynamics: A must be square");
  if (A.rows() < 1) throw DimensionError("dynamics: empty state");
  if (B.rows() != A.rows()) throw DimensionError("dynamics: B row count != n");
  if (C.cols() != A.rows()) throw DimensionError("dynamics: C column count != n");
  if (B.cols() < 1 || C.rows() < 1) throw DimensionError("dynamics: empty B or C");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite())
    throw ConfigError("dynamics: non-finite entries");
  for (const auto& [p, term] : drift) {
    if (p < 2) throw ConfigError("dynamics: drift order below 2");
    if (term.order() != p) throw ConfigError("dynamics: drift order key mismatch");
    if (term.state_dim() != A.rows())
      throw DimensionError("dynamics: drift term state dimension mismatch");
  }
}

Vector PolyDynamics::f(const Vector& x) const {
  if (x.size() != n()) throw DimensionError("dynamics: state dimension mismatch");
  Vector out = A * x;
  if (drift.empty()) return out;
  Vector xp = x;
  int current = 1;
  for (const auto& [p, term] : drift) {
    for (; current < p; ++current) {
      Vector next(xp.size() * x.size());
      for (Index i = 0; i < xp.size(); ++i) next.segment(i * x.size(), x.size()) = xp[i] * x;
      xp.swap(next);
    }
    out += term.apply_power(xp);
  }
  return out;
}

}  // namespace polyenergy
