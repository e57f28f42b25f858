#pragma once

#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rlcov/kernels.hpp"
#include "rlcov/parallel.hpp"
#include "rlcov/partition.hpp"
#include "rlcov/rlr.hpp"

namespace rlcov {

/// The hierarchical covariance k_h bound to a site set: base kernel, tree,
/// the symmetric RLR matrix K_h = k_h(X, X), and per-node factorizations of
/// the landmark Grams k(L_p, L_p) reused by every out-of-sample query.
class HCov {
 public:
  HCov(KernelSpec spec, std::shared_ptr<const PartitionTree> tree, RLRMatrix kh,
       std::vector<Eigen::LLT<Eigen::MatrixXd>> gram_factors, std::vector<Eigen::MatrixXd> up_grams);

  const KernelSpec& spec() const { return spec_; }
  const PartitionTree& tree() const { return *tree_; }
  const std::shared_ptr<const PartitionTree>& tree_ptr() const { return tree_; }
  const RLRMatrix& Kh() const { return kh_; }
  int n() const { return kh_.n(); }
  int rank() const { return kh_.rank(); }

  /// Cholesky factor of k(L_p, L_p) for nonleaf p.
  const Eigen::LLT<Eigen::MatrixXd>& gram_factor(int p) const { return gram_factors_[p]; }
  /// k(L_q, L_parent(q)) for nonleaf nonroot q.
  const Eigen::MatrixXd& up_gram(int q) const { return up_grams_[q]; }

  /// k(L_p, L_p)^{-1} k(L_p, x) for the parent p of the leaf holding x.
  Eigen::VectorXd landmark_weights(int p, SiteView x) const;

 private:
  KernelSpec spec_;
  std::shared_ptr<const PartitionTree> tree_;
  RLRMatrix kh_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> gram_factors_;
  std::vector<Eigen::MatrixXd> up_grams_;
};

/// Assembles K_h:
///   A_ii = k(X_i, X_i),  U_i = k(X_i, L_p) k(L_p, L_p)^{-1},
///   Sigma_p = k(L_p, L_p),  W_q = k(L_q, L_parent) k(L_parent, L_parent)^{-1}.
/// Throws NumericalError naming the node when a landmark Gram is not
/// numerically positive definite.
std::shared_ptr<const HCov> build_hcov(const KernelSpec& spec, std::shared_ptr<const PartitionTree> tree,
                                       Exec exec = Exec::Parallel);

/// k_h(x, y). Points that are sites use their own leaf; other points descend
/// the tree by box containment (nearest box when outside).
double kh_eval(const HCov& h, SiteView x, SiteView y);

/// Precomputed sums for w^T k_h(X, x) with fixed w.
struct InnerProdCache {
  std::shared_ptr<const HCov> h;
  Eigen::VectorXd w;                // tree order
  std::vector<Eigen::VectorXd> c;   // per nonroot node, length r
};

InnerProdCache inner_preprocess(std::shared_ptr<const HCov> h, const Eigen::VectorXd& w, Exec exec = Exec::Parallel);

/// w^T k_h(X, x) along the single root-to-leaf path of x. Throws
/// InvalidArgument when x is bitwise equal to a site.
double oos_inner(const InnerProdCache& cache, SiteView x);

/// Precomputed products for v^T At v with v = k_h(X, x) and symmetric At on
/// the tree of h. Only the twisted forms are kept:
///   theta[i] = Theta_i Sigma_p,   xi[i] = Sigma_p^T Xi_i Sigma_p
/// for every nonroot i with parent p.
struct QuadCache {
  std::shared_ptr<const HCov> h;
  std::shared_ptr<const RLRMatrix> At;
  std::vector<Eigen::MatrixXd> theta;
  std::vector<Eigen::MatrixXd> xi;
};

QuadCache quad_preprocess(std::shared_ptr<const HCov> h, std::shared_ptr<const RLRMatrix> At,
                          Exec exec = Exec::Parallel);

/// k_h(X, x)^T At k_h(X, x). Same out-of-sample rule as oos_inner.
double oos_quad(const QuadCache& cache, SiteView x);

}  // namespace rlcov
