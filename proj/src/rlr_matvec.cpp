#include "rlcov/error.hpp"
#include "rlcov/rlr.hpp"

namespace rlcov {

using Eigen::MatrixXd;

Eigen::MatrixXd matvec(const RLRMatrix& A, const Eigen::MatrixXd& B, Exec exec) {
  const Topology& t = A.topology();
  if (B.rows() != t.n()) throw InvalidArgument("matvec: vector length does not match the matrix");
  const Eigen::Index m = B.cols();
  MatrixXd Y(t.n(), m);
  if (t.size() == 1) {
    Y.noalias() = A.A(0) * B;
    return Y;
  }
  // c_i: coefficients of b restricted to I_i in the basis of node i's parent.
  // d_i: the incoming far-field coefficients, in the same basis.
  std::vector<MatrixXd> c(t.size()), d(t.size());
  walk_up(t, exec, [&](int i) {
    if (t.is_root(i)) return;
    if (t.is_leaf(i)) {
      c[i].noalias() = A.V(i).transpose() * B.middleRows(t.begin(i), t.count(i));
      return;
    }
    MatrixXd s = c[t.children(i)[0]];
    for (std::size_t k = 1; k < t.children(i).size(); ++k) s += c[t.children(i)[k]];
    c[i].noalias() = A.Z(i).transpose() * s;
  });
  walk_down(t, exec, [&](int i) {
    if (t.is_leaf(i)) {
      auto y = Y.middleRows(t.begin(i), t.count(i));
      y.noalias() = A.A(i) * B.middleRows(t.begin(i), t.count(i));
      y.noalias() += A.U(i) * d[i];
      return;
    }
    const auto& ch = t.children(i);
    MatrixXd down;
    if (!t.is_root(i)) down.noalias() = A.W(i) * d[i];
    for (int j : ch) {
      MatrixXd s = MatrixXd::Zero(t.rank(), m);
      for (int l : ch)
        if (l != j) s += c[l];
      d[j].noalias() = A.Sigma(i) * s;
      if (!t.is_root(i)) d[j] += down;
    }
  });
  return Y;
}

Eigen::VectorXd matvec(const RLRMatrix& A, const Eigen::VectorXd& b, Exec exec) {
  return matvec(A, MatrixXd(b), exec).col(0);
}

}  // namespace rlcov
