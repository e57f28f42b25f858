#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "rlcov/error.hpp"
#include "rlcov/rlr.hpp"

namespace rlcov {

using Eigen::MatrixXd;

RLRMatrix cholesky_like(const RLRMatrix& A, Exec exec) {
  if (!A.symmetric()) throw InvalidArgument("cholesky_like: the matrix must carry the symmetric flag");
  const Topology& t = A.topology();
  const int r = t.rank();
  RLRMatrix G(A.topology_ptr(), false);
  std::vector<MatrixXd> theta(t.size()), xi(t.size());

  walk_up(t, exec, [&](int i) {
    if (t.is_leaf(i)) {
      MatrixXd B = A.A(i);
      if (!t.is_root(i)) B.noalias() -= A.U(i) * A.Sigma(t.parent(i)) * A.U(i).transpose();
      Eigen::LLT<MatrixXd> llt(B);
      if (llt.info() != Eigen::Success)
        throw NumericalError("cholesky_like: leaf block A_ii - U_i Sigma_p U_i^T is not positive definite", i);
      G.A(i) = llt.matrixL();
      if (t.is_root(i)) return;
      G.U(i) = A.U(i);
      G.V(i) = llt.matrixL().solve(A.U(i));
      theta[i].noalias() = G.V(i).transpose() * G.V(i);
      return;
    }
    const auto& ch = t.children(i);
    xi[i] = theta[ch[0]];
    for (std::size_t k = 1; k < ch.size(); ++k) xi[i] += theta[ch[k]];
    xi[i] = 0.5 * (xi[i] + xi[i].transpose()).eval();
    MatrixXd Lambda = A.Sigma(i);
    if (!t.is_root(i)) Lambda.noalias() -= A.W(i) * A.Sigma(t.parent(i)) * A.W(i).transpose();
    Lambda = 0.5 * (Lambda + Lambda.transpose()).eval();
    try {
      G.Sigma(i) = riccati_solve(Lambda, xi[i]);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("cholesky_like: ") + e.what(), i);
    }
    if (t.is_root(i)) return;
    MatrixXd M = MatrixXd::Identity(r, r);
    M.noalias() += G.Sigma(i) * xi[i];
    G.W(i) = A.W(i);
    G.Z(i) = M.partialPivLu().solve(A.W(i));
    theta[i].noalias() = G.Z(i).transpose() * xi[i] * G.Z(i);
  });

  walk_down(t, exec, [&](int i) {
    if (t.is_root(i)) return;
    const int p = t.parent(i);
    if (t.is_leaf(i))
      G.A(i).noalias() += G.U(i) * G.Sigma(p) * G.V(i).transpose();
    else
      G.Sigma(i).noalias() += G.W(i) * G.Sigma(p) * G.Z(i).transpose();
  });
  return G;
}

}  // namespace rlcov
