#include "rlcov/grf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "random.hpp"
#include "rlcov/error.hpp"

namespace rlcov {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::MatrixXd values_in_tree_order(const PartitionTree& tree, const FieldData& data) {
  const int n = tree.n();
  if (data.sites.size() != n || data.sites.dim() != tree.dim())
    throw InvalidArgument("field data: sites do not match the tree");
  if (data.values.rows() != n || data.values.cols() < 1)
    throw InvalidArgument("field data: need one row of values per site and at least one column");
  if (!data.values.allFinite()) throw InvalidArgument("field data: values must be finite");
  MatrixXd out(n, data.values.cols());
  for (int i = 0; i < n; ++i) {
    const int pos = tree.perm()[i];
    if (!bitwise_equal(data.sites[i], tree.sites()[pos]))
      throw InvalidArgument("field data: site " + std::to_string(i) + " differs from the tree's site");
    out.row(pos) = data.values.row(i);
  }
  return out;
}

KrigeWorkspace krige_prepare(std::shared_ptr<const HCov> h, const FieldData& data, Exec exec) {
  if (!h) throw InvalidArgument("krige_prepare: null covariance");
  const VectorXd z = values_in_tree_order(h->tree(), data).col(0).array() - data.mean;
  Inverse inv = invert(h->Kh(), exec);
  KrigeWorkspace work;
  work.h = h;
  work.mean = data.mean;
  work.logdet = inv.logdet;
  work.inverse = std::make_shared<const RLRMatrix>(std::move(inv.matrix));
  work.weights = matvec(*work.inverse, z, exec);
  work.inner = inner_preprocess(h, work.weights, exec);
  work.quad = quad_preprocess(h, work.inverse, exec);
  return work;
}

KrigeResult krige(const KrigeWorkspace& work, SiteView x0) {
  if (!work.prepared()) throw InvalidArgument("krige: workspace is not prepared");
  KrigeResult r;
  r.mu0 = work.mean + oos_inner(work.inner, x0);
  r.var0_raw = work.h->spec().sill() - oos_quad(work.quad, x0);
  r.var0 = r.var0_raw;
  if (r.var0 < 0.0) {
    r.var0 = 0.0;
    work.clamped->fetch_add(1, std::memory_order_relaxed);
  }
  return r;
}

std::vector<KrigeResult> krige(const KrigeWorkspace& work, PointsView x0, Exec exec) {
  if (!work.prepared()) throw InvalidArgument("krige: workspace is not prepared");
  // Targets in the same leaf share their whole root path, so visiting them
  // together keeps the per-level factors in cache. Each result depends only
  // on its own target; the order does not change any bits.
  const PartitionTree& tree = work.h->tree();
  const Topology& t = *tree.topology();
  std::vector<int> key(x0.size());
  for (int k = 0; k < x0.size(); ++k) key[k] = t.begin(tree.locate_leaf(x0[k]));
  std::vector<int> order(x0.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] < key[b]; });
  std::vector<KrigeResult> out(x0.size());
  parallel_for(x0.size(), exec, [&](int k) { out[order[k]] = krige(work, x0[order[k]]); });
  return out;
}

Eigen::VectorXd standard_normals(std::uint64_t seed, int n, std::uint64_t offset) {
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double u = detail::counter_uniform(seed, offset + static_cast<std::uint64_t>(i));
    y(i) = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
  }
  return y;
}

Eigen::VectorXd sample_with(const HCov& h, const RLRMatrix& G, const Eigen::VectorXd& y, double mean, Exec exec) {
  if (y.size() != h.n()) throw InvalidArgument("sample: y length does not match the sites");
  const VectorXd z = matvec(G, y, exec);
  VectorXd out = h.tree().to_original_order(z);
  out.array() += mean;
  return out;
}

Eigen::VectorXd sample(const HCov& h, std::uint64_t seed, double mean, Exec exec) {
  const RLRMatrix G = cholesky_like(h.Kh(), exec);
  return sample_with(h, G, standard_normals(seed, h.n()), mean, exec);
}

namespace {

double gaussian_loglik(const HCov& h, const MatrixXd& Z, Exec exec) {
  const Inverse inv = invert(h.Kh(), exec);
  if (inv.logdet.sign != 1 || !inv.positive_definite)
    throw NumericalError("loglik: covariance matrix is not numerically positive definite");
  const MatrixXd KZ = matvec(inv.matrix, Z, exec);
  const double quad = (Z.array() * KZ.array()).sum();
  if (!(quad >= 0.0)) throw NumericalError("loglik: negative quadratic form; covariance is not numerically positive definite");
  const double N = static_cast<double>(Z.cols());
  const double n = static_cast<double>(Z.rows());
  return -0.5 * quad - 0.5 * N * inv.logdet.log_abs - 0.5 * N * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double loglik(const HCov& h, const FieldData& data, Exec exec) {
  const MatrixXd Z = values_in_tree_order(h.tree(), data).col(0).array() - data.mean;
  return gaussian_loglik(h, Z, exec);
}

double loglik_reps(const HCov& h, const FieldData& data, Exec exec) {
  const MatrixXd Z = values_in_tree_order(h.tree(), data).array() - data.mean;
  return gaussian_loglik(h, Z, exec);
}

}  // namespace rlcov
