#include "rlcov/error.hpp"
#include "rlcov/hcov.hpp"

namespace rlcov {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void require_out_of_sample(const PartitionTree& tree, SiteView x, const char* who) {
  if (static_cast<int>(x.size()) != tree.dim())
    throw InvalidArgument(std::string(who) + ": point dimension does not match the sites");
  if (tree.find_site(x) >= 0)
    throw InvalidArgument(std::string(who) + ": the point coincides with a site; only out-of-sample points are allowed");
}

}  // namespace

InnerProdCache inner_preprocess(std::shared_ptr<const HCov> h, const Eigen::VectorXd& w, Exec exec) {
  if (!h) throw InvalidArgument("inner_preprocess: null covariance");
  if (w.size() != h->n()) throw InvalidArgument("inner_preprocess: weight length does not match the sites");
  const Topology& t = *h->tree().topology();
  const RLRMatrix& K = h->Kh();
  InnerProdCache cache{h, w, std::vector<VectorXd>(t.size())};
  std::vector<VectorXd> e(t.size());
  walk_up(t, exec, [&](int i) {
    if (t.is_leaf(i)) {
      if (!t.is_root(i)) e[i].noalias() = K.U(i).transpose() * w.segment(t.begin(i), t.count(i));
      return;
    }
    const auto& ch = t.children(i);
    if (!t.is_root(i)) {
      VectorXd s = e[ch[0]];
      for (std::size_t k = 1; k < ch.size(); ++k) s += e[ch[k]];
      e[i].noalias() = K.W(i).transpose() * s;
    }
    for (int l : ch) {
      VectorXd s = VectorXd::Zero(t.rank());
      for (int j : ch)
        if (j != l) s += e[j];
      cache.c[l].noalias() = K.Sigma(i).transpose() * s;
    }
  });
  return cache;
}

double oos_inner(const InnerProdCache& cache, SiteView x) {
  if (!cache.h) throw InvalidArgument("oos_inner: cache is not prepared");
  const HCov& h = *cache.h;
  const PartitionTree& tree = h.tree();
  require_out_of_sample(tree, x, "oos_inner");
  const Topology& t = *tree.topology();
  const int l = tree.locate_leaf(x);
  const VectorXd kx = kernel_column(h.spec(), tree.sites().view(t.begin(l), t.end(l)), x);
  double z = cache.w.segment(t.begin(l), t.count(l)).dot(kx);
  if (t.is_root(l)) return z;
  VectorXd d = h.landmark_weights(t.parent(l), x);
  z += cache.c[l].dot(d);
  for (int i = t.parent(l); !t.is_root(i); i = t.parent(i)) {
    d = h.Kh().W(i).transpose() * d;
    z += cache.c[i].dot(d);
  }
  return z;
}

QuadCache quad_preprocess(std::shared_ptr<const HCov> h, std::shared_ptr<const RLRMatrix> At, Exec exec) {
  if (!h || !At) throw InvalidArgument("quad_preprocess: null input");
  const Topology& t = *h->tree().topology();
  if (!At->topology().same_shape(t)) throw InvalidArgument("quad_preprocess: matrix is on a different tree");
  if (!At->symmetric()) throw InvalidArgument("quad_preprocess: matrix must be symmetric");
  const RLRMatrix& K = h->Kh();
  const RLRMatrix& T = *At;
  QuadCache cache{h, At, std::vector<MatrixXd>(t.size()), std::vector<MatrixXd>(t.size())};
  std::vector<MatrixXd> theta(t.size()), xi(t.size());
  walk_up(t, exec, [&](int i) {
    if (t.is_root(i)) return;
    const int p = t.parent(i);
    if (t.is_leaf(i)) {
      theta[i].noalias() = T.U(i).transpose() * K.U(i);
      xi[i].noalias() = K.U(i).transpose() * T.A(i) * K.U(i);
    } else {
      const auto& ch = t.children(i);
      MatrixXd st = theta[ch[0]];
      MatrixXd sx = xi[ch[0]];
      for (std::size_t k = 1; k < ch.size(); ++k) {
        st += theta[ch[k]];
        sx += xi[ch[k]];
      }
      for (int j : ch)
        for (int k : ch)
          if (j != k) sx.noalias() += theta[j].transpose() * T.Sigma(i) * theta[k];
      theta[i].noalias() = T.W(i).transpose() * st * K.W(i);
      xi[i].noalias() = K.W(i).transpose() * sx * K.W(i);
      for (int j : ch) {
        theta[j].resize(0, 0);
        xi[j].resize(0, 0);
      }
    }
    cache.theta[i].noalias() = theta[i] * K.Sigma(p);
    cache.xi[i].noalias() = K.Sigma(p).transpose() * xi[i] * K.Sigma(p);
  });
  return cache;
}

double oos_quad(const QuadCache& cache, SiteView x) {
  if (!cache.h || !cache.At) throw InvalidArgument("oos_quad: cache is not prepared");
  const HCov& h = *cache.h;
  const PartitionTree& tree = h.tree();
  require_out_of_sample(tree, x, "oos_quad");
  const Topology& t = *tree.topology();
  const RLRMatrix& K = h.Kh();
  const RLRMatrix& T = *cache.At;
  const int l = tree.locate_leaf(x);
  const VectorXd kx = kernel_column(h.spec(), tree.sites().view(t.begin(l), t.end(l)), x);
  double z = kx.dot(T.A(l) * kx);
  if (t.is_root(l)) return z;
  VectorXd d = h.landmark_weights(t.parent(l), x);
  VectorXd c = T.U(l).transpose() * kx;
  std::vector<VectorXd> cs;
  for (int i = l;;) {
    const int p = t.parent(i);
    const MatrixXd& S = T.Sigma(p);
    cs.clear();
    for (int s : t.children(p)) {
      if (s == i) continue;
      cs.push_back(cache.theta[s] * d);
      z += d.dot(cache.xi[s] * d) + 2.0 * cs.back().dot(S * c);
    }
    for (std::size_t a = 0; a < cs.size(); ++a)
      for (std::size_t b = a + 1; b < cs.size(); ++b) z += 2.0 * cs[a].dot(S * cs[b]);
    if (t.is_root(p)) break;
    for (const VectorXd& v : cs) c += v;
    c = T.W(p).transpose() * c;
    d = K.W(p).transpose() * d;
    i = p;
  }
  return z;
}

}  // namespace rlcov
