#include "rlcov/hcov.hpp"

#include "rlcov/error.hpp"

namespace rlcov {

using Eigen::MatrixXd;
using Eigen::VectorXd;

HCov::HCov(KernelSpec spec, std::shared_ptr<const PartitionTree> tree, RLRMatrix kh,
           std::vector<Eigen::LLT<MatrixXd>> gram_factors, std::vector<MatrixXd> up_grams)
    : spec_(std::move(spec)),
      tree_(std::move(tree)),
      kh_(std::move(kh)),
      gram_factors_(std::move(gram_factors)),
      up_grams_(std::move(up_grams)) {}

Eigen::VectorXd HCov::landmark_weights(int p, SiteView x) const {
  return gram_factors_[p].solve(kernel_column(spec_, tree_->node(p).landmarks.view(), x));
}

std::shared_ptr<const HCov> build_hcov(const KernelSpec& spec, std::shared_ptr<const PartitionTree> tree_ptr,
                                       Exec exec) {
  if (!tree_ptr) throw InvalidArgument("build_hcov: null tree");
  const PartitionTree& tree = *tree_ptr;
  const Topology& t = *tree.topology();
  if (spec.family() == Family::SphereMatern && tree.dim() != 2)
    throw InvalidArgument("build_hcov: the sphere kernel needs (lat, lon) sites");
  RLRMatrix kh(tree.topology(), true);
  std::vector<Eigen::LLT<MatrixXd>> factors(t.size());
  std::vector<MatrixXd> up(t.size());

  std::vector<int> nonleaf, rest;
  for (int i = 0; i < t.size(); ++i) (t.is_leaf(i) ? rest : nonleaf).push_back(i);
  for (int i = 0; i < t.size(); ++i)
    if (!t.is_leaf(i) && !t.is_root(i)) rest.push_back(i);

  parallel_for(static_cast<int>(nonleaf.size()), exec, [&](int k) {
    const int p = nonleaf[k];
    kh.Sigma(p) = kernel_matrix(spec, tree.node(p).landmarks.view(), Exec::Serial);
    factors[p].compute(kh.Sigma(p));
    if (factors[p].info() != Eigen::Success)
      throw NumericalError(
          "build_hcov: landmark Gram k(L_p, L_p) is not numerically positive definite; "
          "use a larger nugget or fewer landmarks",
          p);
  });
  parallel_for(static_cast<int>(rest.size()), exec, [&](int k) {
    const int i = rest[k];
    if (t.is_leaf(i)) {
      const PointsView X = tree.sites().view(t.begin(i), t.end(i));
      kh.A(i) = kernel_matrix(spec, X, Exec::Serial);
      if (t.is_root(i)) return;
      const int p = t.parent(i);
      kh.U(i) = factors[p].solve(kernel_matrix(spec, tree.node(p).landmarks.view(), X, Exec::Serial)).transpose();
      return;
    }
    const int p = t.parent(i);
    up[i] = kernel_matrix(spec, tree.node(i).landmarks.view(), tree.node(p).landmarks.view(), Exec::Serial);
    kh.W(i) = factors[p].solve(up[i].transpose()).transpose();
  });
  return std::make_shared<const HCov>(spec, std::move(tree_ptr), std::move(kh), std::move(factors), std::move(up));
}

double kh_eval(const HCov& h, SiteView x, SiteView y) {
  const PartitionTree& tree = h.tree();
  if (static_cast<int>(x.size()) != tree.dim() || static_cast<int>(y.size()) != tree.dim())
    throw InvalidArgument("kh_eval: site dimension does not match the tree");
  const Topology& t = *tree.topology();
  int a = tree.locate_leaf(x);
  int b = tree.locate_leaf(y);
  if (a == b) return h.spec()(x, y);
  // Lift each point to the child of the common ancestor p, carrying
  // k(L_q, L_q)^{-1} psi_q(L_q, .) and changing basis with W_q^T.
  const int pa = t.parent(a), pb = t.parent(b);
  VectorXd wa = h.landmark_weights(pa, x);
  VectorXd wb = h.landmark_weights(pb, y);
  a = pa;
  b = pb;
  while (a != b) {
    if (t.node(a).depth >= t.node(b).depth) {
      wa = h.Kh().W(a).transpose() * wa;
      a = t.parent(a);
    } else {
      wb = h.Kh().W(b).transpose() * wb;
      b = t.parent(b);
    }
  }
  return wa.dot(h.Kh().Sigma(a) * wb);
}

}  // namespace rlcov
