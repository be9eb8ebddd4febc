#include "polyenergy/kronpoly.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace polyenergy {

KCoeff::KCoeff(int k, Index n, Vector values, bool is_sym)
    : order(k), dim(n), data(std::move(values)), symmetric(is_sym) {
  validate();
}

void KCoeff::validate() const {
  if (order < 1) throw ConfigError("KCoeff: order must be >= 1");
  if (dim < 1) throw ConfigError("KCoeff: dim must be >= 1");
  const std::int64_t expect = ipow(dim, order);
  if (data.size() != expect)
    throw DimensionError("KCoeff: data length " + std::to_string(data.size()) +
                         " does not match dim^order = " + std::to_string(expect));
}

Eigen::Map<const Matrix> KCoeff::matricized() const {
  return {data.data(), dim, data.size() / dim};
}

std::int64_t linearize_index(const std::vector<int>& idx, Index n) {
  std::int64_t a = 0;
  for (int digit : idx) {
    if (digit < 0 || digit >= n) throw DimensionError("linearize_index: digit out of range");
    a = a * n + digit;
  }
  return a;
}

std::vector<int> unlinearize_index(std::int64_t a, int k, Index n) {
  if (k < 1) throw ConfigError("unlinearize_index: k must be >= 1");
  if (a < 0 || a >= ipow(n, k)) throw DimensionError("unlinearize_index: index out of range");
  std::vector<int> idx(k);
  for (int j = k - 1; j >= 0; --j) {
    idx[j] = static_cast<int>(a % n);
    a /= n;
  }
  return idx;
}

Vector kron_power(const Vector& x, int k) {
  if (k < 1) throw ConfigError("kron_power: k must be >= 1");
  const Index n = x.size();
  if (n < 1) throw DimensionError("kron_power: empty vector");
  Vector r = x;
  for (int step = 2; step <= k; ++step) {
    const std::int64_t len = r.size();
    Vector next(ipow(n, step));
    for (std::int64_t i = 0; i < len; ++i) next.segment(i * n, n) = r[i] * x;
    r.swap(next);
  }
  return r;
}

std::vector<std::int64_t> perfect_shuffle(Index p, Index q) {
  if (p < 1 || q < 1) throw ConfigError("perfect_shuffle: p, q must be >= 1");
  std::vector<std::int64_t> perm(static_cast<std::size_t>(p * q));
  for (std::int64_t i = 0; i < p * q; ++i)
    perm[static_cast<std::size_t>(i)] = (i / q) + (i % q) * p;
  return perm;
}

namespace {

// Applies fn to every distinct permutation of the sorted multi-index `orbit`,
// passing the linear position of each permutation.
template <class Fn>
void for_each_orbit_position(std::vector<int>& perm, Index n, Fn&& fn) {
  do {
    std::int64_t a = 0;
    for (int digit : perm) a = a * n + digit;
    fn(a);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

}  // namespace

void symmetrize_in_place(KCoeff& v) {
  v.validate();
  const int k = v.order;
  const Index n = v.dim;
  if (k == 1 || n == 1) {
    v.symmetric = true;
    return;
  }
  double* data = v.data.data();
  std::vector<int> idx(k, 0);  // current canonical (non-decreasing) multi-index
  std::vector<int> perm(k);
  while (true) {
    perm.assign(idx.begin(), idx.end());
    double sum = 0.0;
    std::int64_t count = 0;
    bool all_equal = true;
    const double first = data[linearize_index(idx, n)];
    for_each_orbit_position(perm, n, [&](std::int64_t a) {
      const double val = data[a];
      sum += val;
      ++count;
      if (val != first) all_equal = false;
    });
    if (!all_equal) {
      const double mean = sum / static_cast<double>(count);
      perm.assign(idx.begin(), idx.end());
      for_each_orbit_position(perm, n, [&](std::int64_t a) { data[a] = mean; });
    }
    // Advance to the next non-decreasing tuple.
    int pos = k - 1;
    while (pos >= 0 && idx[pos] == n - 1) --pos;
    if (pos < 0) break;
    const int next_digit = idx[pos] + 1;
    for (int t = pos; t < k; ++t) idx[t] = next_digit;
  }
  v.symmetric = true;
}

KCoeff symmetrize(const KCoeff& v) {
  KCoeff out = v;
  symmetrize_in_place(out);
  return out;
}

bool is_symmetric(const KCoeff& v, int checks, std::uint64_t seed, double tol) {
  v.validate();
  const int k = v.order;
  const Index n = v.dim;
  if (k == 1 || n == 1) return true;
  const double scale = v.data.size() > 0 ? v.data.cwiseAbs().maxCoeff() : 0.0;
  const double bound = tol * std::max(scale, 1e-300);
  if (checks <= 0) {
    if (v.data.size() > 10'000'000)
      throw ConfigError("is_symmetric: tensor too large for exhaustive check");
    std::vector<int> idx(k, 0);
    std::vector<int> perm(k);
    bool ok = true;
    while (ok) {
      perm.assign(idx.begin(), idx.end());
      const double first = v.data[linearize_index(idx, n)];
      for_each_orbit_position(perm, n, [&](std::int64_t a) {
        if (std::abs(v.data[a] - first) > bound) ok = false;
      });
      int pos = k - 1;
      while (pos >= 0 && idx[pos] == n - 1) --pos;
      if (pos < 0) break;
      const int next_digit = idx[pos] + 1;
      for (int t = pos; t < k; ++t) idx[t] = next_digit;
    }
    return ok;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> digit(0, static_cast<int>(n) - 1);
  std::vector<int> idx(k), shuffled(k);
  for (int c = 0; c < checks; ++c) {
    for (int t = 0; t < k; ++t) idx[t] = digit(rng);
    shuffled = idx;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double a = v.data[linearize_index(idx, n)];
    const double b = v.data[linearize_index(shuffled, n)];
    if (std::abs(a - b) > bound) return false;
  }
  return true;
}

namespace detail {

Vector contract_last_mode(const Vector& w, Index n, const Vector& x) {
  if (x.size() != n) throw DimensionError("contract_last_mode: x size mismatch");
  if (w.size() % n != 0) throw DimensionError("contract_last_mode: length not divisible by n");
  const Index blocks = w.size() / n;
  Eigen::Map<const Matrix> W(w.data(), n, blocks);
  return W.transpose() * x;
}

void add_kron_slot_t(const KronFactor& F, const double* w, double* out, Index a,
                     Index b, double scale) {
  const Index n = F.rows();
  const Index q = F.cols();
  if (b == 1) {
    Eigen::Map<const Matrix> W(w, n, a);
    Eigen::Map<Matrix> O(out, q, a);
    F.add_left_tproduct(O, W, scale);
    return;
  }
  for (Index alpha = 0; alpha < a; ++alpha) {
    Eigen::Map<const Matrix> W(w + alpha * n * b, b, n);
    Eigen::Map<Matrix> O(out + alpha * q * b, b, q);
    F.add_right_product(O, W, scale);
  }
}

void add_lyap_mult_t(const KronFactor& F, const KCoeff& v, double scale,
                     double* out, std::int64_t out_size) {
  const Index n = F.rows();
  const int i = v.order;
  if (v.dim != n) throw DimensionError("lyap_mult_t: factor row count != coefficient dim");
  const std::int64_t expect = (v.data.size() / n) * F.cols();
  if (out_size != expect) throw DimensionError("lyap_mult_t: output size mismatch");
  for (int j = 1; j <= i; ++j) {
    const Index a = static_cast<Index>(ipow(n, j - 1));
    const Index b = static_cast<Index>(ipow(n, i - j));
    add_kron_slot_t(F, v.data.data(), out, a, b, scale);
  }
}

}  // namespace detail

void DenseKronFactor::add_right_product(Eigen::Ref<Matrix> out,
                                        const Eigen::Ref<const Matrix>& W,
                                        double scale) const {
  out.noalias() += scale * (W * F_);
}

void DenseKronFactor::add_left_tproduct(Eigen::Ref<Matrix> out,
                                        const Eigen::Ref<const Matrix>& W,
                                        double scale) const {
  out.noalias() += scale * (F_.transpose() * W);
}

namespace {

int infer_kron_order(Index n, Index q, const char* who) {
  if (n == 1) {
    if (q != 1) throw DimensionError(std::string(who) + ": column count must be n^p");
    return 2;
  }
  std::int64_t power = n;
  for (int p = 1; p < 63; ++p) {
    if (power == q) return p;
    if (power > q) break;
    power *= n;
  }
  throw DimensionError(std::string(who) + ": column count " + std::to_string(q) +
                       " is not a power of n = " + std::to_string(n));
}

}  // namespace

Vector lyap_mult_t(const KronFactor& F, const KCoeff& v) {
  v.validate();
  const int i = v.order;
  if (i < 2) throw ConfigError("lyap_mult_t: coefficient order must be >= 2");
  const int p = infer_kron_order(F.rows(), F.cols(), "lyap_mult_t");
  if (F.rows() > 1 && p < 2) throw ConfigError("lyap_mult_t: factor must map degree p >= 2");
  const std::int64_t out_size = (v.data.size() / F.rows()) * F.cols();
  Vector out = Vector::Zero(out_size);
  detail::add_lyap_mult_t(F, v, 1.0, out.data(), out_size);
  return out;
}

Vector lyap_mult_t(const Matrix& F, const KCoeff& v) {
  return lyap_mult_t(DenseKronFactor(F), v);
}

namespace {

Matrix dense_kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

}  // namespace

Matrix dense_kway_lyap(const Matrix& M, int k, std::int64_t max_entries) {
  if (k < 1) throw ConfigError("dense_kway_lyap: k must be >= 1");
  const Index n = M.rows();
  if (n < 1) throw DimensionError("dense_kway_lyap: empty matrix");
  const std::int64_t rows = ipow(n, k);
  const std::int64_t cols = ipow(n, k - 1) * M.cols();
  if (rows * cols > max_entries)
    throw ConfigError("dense_kway_lyap: result would have " +
                      std::to_string(rows * cols) + " entries (limit " +
                      std::to_string(max_entries) + ")");
  Matrix L = Matrix::Zero(rows, cols);
  for (int j = 1; j <= k; ++j) {
    Matrix term = Matrix::Identity(ipow(n, j - 1), ipow(n, j - 1));
    term = dense_kron(term, M);
    const Index tail = static_cast<Index>(ipow(n, k - j));
    term = dense_kron(term, Matrix::Identity(tail, tail));
    L += term;
  }
  return L;
}

double poly_eval(const std::vector<KCoeff>& coeffs, const Vector& x) {
  double total = 0.0;
  for (const KCoeff& c : coeffs) {
    c.validate();
    if (c.dim != x.size()) throw DimensionError("poly_eval: x dimension mismatch");
    Vector w = c.data;
    for (int j = c.order; j >= 1; --j) w = detail::contract_last_mode(w, c.dim, x);
    total += 0.5 * w[0];
  }
  return total;
}

Vector poly_grad(const std::vector<KCoeff>& coeffs, const Vector& x) {
  const Index n = x.size();
  Vector grad = Vector::Zero(n);
  for (const KCoeff& c : coeffs) {
    c.validate();
    if (c.dim != n) throw DimensionError("poly_grad: x dimension mismatch");
    if (c.order >= 2 && !c.symmetric)
      throw ConfigError("poly_grad: coefficient of order " + std::to_string(c.order) +
                        " is not flagged symmetric");
    Vector w = c.data;
    for (int j = c.order; j >= 2; --j) w = detail::contract_last_mode(w, n, x);
    grad += (0.5 * c.order) * w;
  }
  return grad;
}

}  // namespace polyenergy
