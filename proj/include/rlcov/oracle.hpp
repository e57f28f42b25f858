#pragma once

#include <cstddef>
#include <vector>

#include "rlcov/hcov.hpp"
#include "rlcov/points.hpp"
#include "rlcov/rlr.hpp"

/// Brute-force dense references. Written with plain loops on row-major
/// storage so that they share no linear algebra with the fast path.
namespace rlcov::oracle {

constexpr int kGuard = 4096;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols, double fill = 0.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const std::vector<double>& data() const { return data_; }

  static DenseMatrix identity(int n);
  static DenseMatrix from_eigen(const Eigen::MatrixXd& m);
  Eigen::MatrixXd to_eigen() const;

  DenseMatrix transpose() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

using Vector = std::vector<double>;

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
Vector multiply(const DenseMatrix& a, const Vector& x);
double dot(const Vector& a, const Vector& b);
/// max |a_ij - b_ij| / max |b_ij|
double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b);

/// k_h(x_i, x_j) over all site pairs in tree order, via kh_eval on i <= j.
DenseMatrix dense_kh(const HCov& h);
/// Column k_h(X, x) in tree order.
Vector kh_column(const HCov& h, SiteView x);

/// Lower-triangular L with A = L L^T, unpivoted. Throws NumericalError on a
/// nonpositive pivot.
DenseMatrix dense_chol(const DenseMatrix& a);
/// Solves A X = B by LU with partial pivoting. Throws NumericalError when A
/// is singular.
DenseMatrix dense_solve(const DenseMatrix& a, const DenseMatrix& b);
Vector dense_solve(const DenseMatrix& a, const Vector& b);
DenseMatrix dense_inverse(const DenseMatrix& a);
LogDet dense_logdet(const DenseMatrix& a);

/// Kriging with k_h in place of k everywhere, both for K and for k_0.
/// `z` is in tree order. var0 uses the prior variance without the nugget.
struct DenseKrige {
  double mu0;
  double var0;
};
DenseKrige dense_krige(const HCov& h, const Vector& z, double mean, SiteView x0);

/// Gaussian log-likelihood summed over replicate columns of `z` (tree order,
/// n x N row-major).
double dense_loglik(const HCov& h, const DenseMatrix& z, double mean = 0.0);

/// k_h(x, y) as the sum over tree nodes of the Schur-complement pieces xi_i.
/// Membership of x and y in a node's subdomain is decided by the node's leaf
/// of x and y.
double telescoping_kh(const HCov& h, SiteView x, SiteView y);

}  // namespace rlcov::oracle
