#include "rlcov/oracle.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "rlcov/error.hpp"

namespace rlcov::oracle {

DenseMatrix::DenseMatrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_eigen(const Eigen::MatrixXd& m) {
  DenseMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

Eigen::MatrixXd DenseMatrix::to_eigen() const {
  Eigen::MatrixXd m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("oracle::multiply: shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vector multiply(const DenseMatrix& a, const Vector& x) {
  if (a.cols() != static_cast<int>(x.size())) throw InvalidArgument("oracle::multiply: shape mismatch");
  Vector y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InvalidArgument("oracle::dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("oracle::max_rel_diff: shape mismatch");
  double diff = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    diff = std::max(diff, std::abs(a.data()[k] - b.data()[k]));
    scale = std::max(scale, std::abs(b.data()[k]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

namespace {

void check_guard(int n, const char* who) {
  if (n > kGuard) throw InvalidArgument(std::string(who) + ": n exceeds the dense guard of 4096");
}

// In-place LU with partial pivoting: a = P^T L U, returns the row swaps.
struct LU {
  DenseMatrix lu;
  std::vector<int> piv;
  int swaps = 0;
};

LU factor(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("oracle: matrix is not square");
  const int n = a.rows();
  LU f{a, std::vector<int>(n), 0};
  DenseMatrix& m = f.lu;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > std::abs(m(p, k))) p = i;
    f.piv[k] = p;
    if (p != k) {
      ++f.swaps;
      for (int j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
    }
    const double pivot = m(k, k);
    if (pivot == 0.0) continue;
    for (int i = k + 1; i < n; ++i) {
      const double l = m(i, k) / pivot;
      m(i, k) = l;
      for (int j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
    }
  }
  return f;
}

void require_nonsingular(const LU& f) {
  const int n = f.lu.rows();
  double big = 0.0;
  for (int k = 0; k < n; ++k) big = std::max(big, std::abs(f.lu(k, k)));
  for (int k = 0; k < n; ++k)
    if (!(std::abs(f.lu(k, k)) > n * 1e-16 * big)) throw NumericalError("oracle: matrix is singular");
}

DenseMatrix lu_solve(const LU& f, DenseMatrix b) {
  const int n = f.lu.rows();
  if (b.rows() != n) throw InvalidArgument("oracle::dense_solve: shape mismatch");
  for (int k = 0; k < n; ++k)
    if (f.piv[k] != k)
      for (int j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(f.piv[k], j));
  for (int j = 0; j < b.cols(); ++j) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < i; ++k) b(i, j) -= f.lu(i, k) * b(k, j);
    for (int i = n - 1; i >= 0; --i) {
      for (int k = i + 1; k < n; ++k) b(i, j) -= f.lu(i, k) * b(k, j);
      b(i, j) /= f.lu(i, i);
    }
  }
  return b;
}

DenseMatrix column(const Vector& v) {
  DenseMatrix m(static_cast<int>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<int>(i), 0) = v[i];
  return m;
}

Vector row_vector(const DenseMatrix& m) {
  Vector v(m.rows() * m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(i) * m.cols() + j] = m(i, j);
  return v;
}

DenseMatrix kernel_block(const KernelSpec& spec, PointsView X, PointsView Y) {
  DenseMatrix m(X.size(), Y.size());
  for (int i = 0; i < X.size(); ++i)
    for (int j = 0; j < Y.size(); ++j) m(i, j) = spec(X[i], Y[j]);
  return m;
}

Vector kernel_row(const KernelSpec& spec, SiteView x, PointsView Y) {
  Vector v(Y.size());
  for (int j = 0; j < Y.size(); ++j) v[j] = spec(x, Y[j]);
  return v;
}

}  // namespace

DenseMatrix dense_kh(const HCov& h) {
  const int n = h.n();
  check_guard(n, "oracle::dense_kh");
  const PointSet& X = h.tree().sites();
  DenseMatrix K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      K(i, j) = kh_eval(h, X[i], X[j]);
      K(j, i) = K(i, j);
    }
  return K;
}

Vector kh_column(const HCov& h, SiteView x) {
  const PointSet& X = h.tree().sites();
  Vector v(X.size());
  for (int i = 0; i < X.size(); ++i) v[i] = kh_eval(h, X[i], x);
  return v;
}

DenseMatrix dense_chol(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("oracle::dense_chol: matrix is not square");
  const int n = a.rows();
  DenseMatrix L(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0)) throw NumericalError("oracle::dense_chol: nonpositive pivot at row " + std::to_string(j));
    L(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

DenseMatrix dense_solve(const DenseMatrix& a, const DenseMatrix& b) {
  const LU f = factor(a);
  require_nonsingular(f);
  return lu_solve(f, b);
}

Vector dense_solve(const DenseMatrix& a, const Vector& b) { return row_vector(dense_solve(a, column(b))); }

DenseMatrix dense_inverse(const DenseMatrix& a) { return dense_solve(a, DenseMatrix::identity(a.rows())); }

LogDet dense_logdet(const DenseMatrix& a) {
  const LU f = factor(a);
  LogDet d{0.0, f.swaps % 2 == 0 ? 1 : -1};
  for (int k = 0; k < a.rows(); ++k) {
    const double u = f.lu(k, k);
    if (u == 0.0) return LogDet::zero();
    d.log_abs += std::log(std::abs(u));
    if (u < 0.0) d.sign = -d.sign;
  }
  return d;
}

DenseKrige dense_krige(const HCov& h, const Vector& z, double mean, SiteView x0) {
  check_guard(h.n(), "oracle::dense_krige");
  if (static_cast<int>(z.size()) != h.n()) throw InvalidArgument("oracle::dense_krige: length mismatch");
  const DenseMatrix K = dense_kh(h);
  const Vector k0 = kh_column(h, x0);
  Vector r(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) r[i] = z[i] - mean;
  const LU f = factor(K);
  require_nonsingular(f);
  const Vector w = row_vector(lu_solve(f, column(r)));
  const Vector v = row_vector(lu_solve(f, column(k0)));
  return {mean + dot(k0, w), h.spec().sill() - dot(k0, v)};
}

double dense_loglik(const HCov& h, const DenseMatrix& z, double mean) {
  const int n = h.n();
  check_guard(n, "oracle::dense_loglik");
  if (z.rows() != n) throw InvalidArgument("oracle::dense_loglik: row count mismatch");
  const DenseMatrix K = dense_kh(h);
  const DenseMatrix L = dense_chol(K);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
  double total = 0.0;
  for (int c = 0; c < z.cols(); ++c) {
    // Forward substitution L y = z - mean; the quadratic form is |y|^2.
    Vector y(n);
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = z(i, c) - mean;
      for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
      y[i] = s / L(i, i);
      q += y[i] * y[i];
    }
    total += -0.5 * q - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
  }
  return total;
}

namespace {

// psi^{(i)}(x, L_i) for every ancestor i of `leaf`, keyed by node id.
std::vector<std::pair<int, Vector>> psi_chain(const HCov& h, SiteView x, int leaf) {
  const PartitionTree& tree = h.tree();
  const KernelSpec& spec = h.spec();
  std::vector<std::pair<int, Vector>> out;
  int j = tree.node(leaf).parent;
  if (j < 0) return out;
  Vector psi = kernel_row(spec, x, tree.node(j).landmarks.view());
  out.emplace_back(j, psi);
  while (tree.node(j).parent >= 0) {
    const int p = tree.node(j).parent;
    const PointsView Lj = tree.node(j).landmarks.view();
    const PointsView Lp = tree.node(p).landmarks.view();
    // psi_p = psi_j K_jj^{-1} K_jp
    const Vector a = dense_solve(kernel_block(spec, Lj, Lj), psi);
    psi = multiply(kernel_block(spec, Lp, Lj), a);
    out.emplace_back(p, psi);
    j = p;
  }
  return out;
}

const Vector* find_psi(const std::vector<std::pair<int, Vector>>& chain, int node) {
  for (const auto& [id, v] : chain)
    if (id == node) return &v;
  return nullptr;
}

}  // namespace

double telescoping_kh(const HCov& h, SiteView x, SiteView y) {
  const PartitionTree& tree = h.tree();
  const KernelSpec& spec = h.spec();
  const int a = tree.locate_leaf(x);
  const int b = tree.locate_leaf(y);
  const auto px = psi_chain(h, x, a);
  const auto py = psi_chain(h, y, b);

  double total = 0.0;
  if (a == b) {
    const int p = tree.node(a).parent;
    double xi = spec(x, y);
    if (p >= 0) {
      const PointsView Lp = tree.node(p).landmarks.view();
      xi -= dot(kernel_row(spec, x, Lp), dense_solve(kernel_block(spec, Lp, Lp), kernel_row(spec, y, Lp)));
    }
    total += xi;
  }
  // Every nonleaf node whose subdomain holds both points.
  for (const auto& [i, psix] : px) {
    const Vector* psiy = find_psi(py, i);
    if (!psiy) continue;
    const PointsView Li = tree.node(i).landmarks.view();
    const DenseMatrix Kii = kernel_block(spec, Li, Li);
    const Vector u = dense_solve(Kii, psix);
    const Vector v = dense_solve(Kii, *psiy);
    const int p = tree.node(i).parent;
    if (p < 0) {
      total += dot(u, *psiy);
      continue;
    }
    const PointsView Lp = tree.node(p).landmarks.view();
    const DenseMatrix Kip = kernel_block(spec, Li, Lp);
    const DenseMatrix S = dense_solve(kernel_block(spec, Lp, Lp), Kip.transpose());
    const DenseMatrix KipKppKpi = multiply(Kip, S);
    DenseMatrix middle = Kii;
    for (int r = 0; r < middle.rows(); ++r)
      for (int c = 0; c < middle.cols(); ++c) middle(r, c) -= KipKppKpi(r, c);
    total += dot(u, multiply(middle, v));
  }
  return total;
}

}  // namespace rlcov::oracle
