#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "rlcov/error.hpp"
#include "rlcov/rlr.hpp"

namespace rlcov {

using Eigen::MatrixXd;

namespace {

// LU with partial pivoting that refuses numerically singular input.
Eigen::PartialPivLU<MatrixXd> checked_lu(const MatrixXd& M, int node, const char* what, LogDet& det) {
  Eigen::PartialPivLU<MatrixXd> lu(M);
  const MatrixXd& LU = lu.matrixLU();
  const Eigen::Index n = M.rows();
  double umax = 0.0, umin = std::numeric_limits<double>::infinity();
  det = {0.0, static_cast<int>(lu.permutationP().determinant())};
  for (Eigen::Index k = 0; k < n; ++k) {
    const double u = LU(k, k);
    umax = std::max(umax, std::abs(u));
    umin = std::min(umin, std::abs(u));
    det.log_abs += std::log(std::abs(u));
    if (u < 0) det.sign = -det.sign;
  }
  if (!M.allFinite() || !(umin > n * std::numeric_limits<double>::epsilon() * umax))
    throw NumericalError(std::string("invert: ") + what + " is numerically singular", node);
  return lu;
}

void symmetrize(MatrixXd& M) { M = 0.5 * (M + M.transpose()).eval(); }

// Whether every eigenvalue of I + Lambda Xi is positive, for Xi positive
// semidefinite. Those eigenvalues are 1 + eig(Xi^{1/2} Lambda Xi^{1/2}), so
//   - Lambda + I / (2 |Xi|_F) > 0 bounds them below by 1/2 (the usual case,
//     Lambda being a Schur complement of landmark Grams);
//   - otherwise Xi + Xi Lambda Xi > 0 is equivalent when Xi is nonsingular;
//   - otherwise a symmetric eigendecomposition with Xi clipped at zero decides.
bool pencil_positive(const MatrixXd& Lambda, const MatrixXd& Xi) {
  const int r = static_cast<int>(Xi.rows());
  MatrixXd L = Lambda;
  symmetrize(L);
  const double nx = Xi.norm();
  if (nx == 0.0) return true;
  if (Eigen::LLT<MatrixXd>(L + MatrixXd::Identity(r, r) / (2.0 * nx)).info() == Eigen::Success) return true;
  MatrixXd S = Xi;
  S.noalias() += Xi * L * Xi;
  symmetrize(S);
  if (Eigen::LLT<MatrixXd>(S).info() == Eigen::Success) return true;
  MatrixXd X = Xi;
  symmetrize(X);
  Eigen::SelfAdjointEigenSolver<MatrixXd> ex(X);
  const MatrixXd R = ex.eigenvectors() * ex.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  MatrixXd M = R.transpose() * L * R;
  symmetrize(M);
  M.diagonal().array() += 1.0;
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() > 0.0;
}

// Shared traversal of invert and logdet. When `out` is null only the
// determinant is accumulated. For symmetric A, `definite` reports whether the
// traversal certified A as positive definite.
LogDet invert_impl(const RLRMatrix& A, RLRMatrix* out, Exec exec, bool* definite = nullptr) {
  const Topology& t = A.topology();
  const int r = t.rank();
  const bool sym = A.symmetric();
  std::vector<LogDet> det(t.size());
  std::vector<char> certified(t.size(), sym ? 1 : 0);
  std::vector<MatrixXd> theta(t.size()), xi(t.size());
  std::vector<MatrixXd> local_u(out ? 0 : t.size()), local_w(out ? 0 : t.size()), local_pi(out ? 0 : t.size());
  auto Ut = [&](int i) -> MatrixXd& { return out ? out->U(i) : local_u[i]; };
  auto Wt = [&](int i) -> MatrixXd& { return out ? out->W(i) : local_w[i]; };
  auto Pi = [&](int i) -> MatrixXd& { return out ? out->Sigma(i) : local_pi[i]; };

  walk_up(t, exec, [&](int i) {
    if (t.is_leaf(i)) {
      MatrixXd B = A.A(i);
      if (!t.is_root(i)) B.noalias() -= A.U(i) * A.Sigma(t.parent(i)) * A.V(i).transpose();
      auto lu = checked_lu(B, i, t.is_root(i) ? "the matrix" : "leaf block A_ii - U_i Sigma_p V_i^T", det[i]);
      if (sym && Eigen::LLT<MatrixXd>(B).info() != Eigen::Success) certified[i] = 0;
      if (t.is_root(i)) {
        if (out) {
          out->A(i) = lu.inverse();
          if (sym) symmetrize(out->A(i));
        }
        return;
      }
      MatrixXd& U = Ut(i);
      U = lu.solve(A.U(i));
      if (sym) {
        theta[i].noalias() = A.U(i).transpose() * U;
        symmetrize(theta[i]);
      } else {
        theta[i].noalias() = A.V(i).transpose() * U;
      }
      if (out) {
        out->A(i) = lu.inverse();
        if (sym) symmetrize(out->A(i));
        else out->V(i).noalias() = out->A(i).transpose() * A.V(i);
      }
      return;
    }
    const auto& ch = t.children(i);
    xi[i] = theta[ch[0]];
    for (std::size_t k = 1; k < ch.size(); ++k) xi[i] += theta[ch[k]];
    MatrixXd Lambda = A.Sigma(i);
    if (!t.is_root(i)) Lambda.noalias() -= A.W(i) * A.Sigma(t.parent(i)) * A.Z(i).transpose();
    MatrixXd M = MatrixXd::Identity(r, r);
    M.noalias() += Lambda * xi[i];
    LogDet d;
    auto lu = checked_lu(M, i, "I + Lambda Xi", d);
    if (sym && !pencil_positive(Lambda, xi[i])) certified[i] = 0;
    det[i] = d;
    for (int j : ch) det[i] += det[j];
    MatrixXd& P = Pi(i);
    P = -lu.solve(Lambda);
    if (sym) symmetrize(P);
    if (t.is_root(i)) return;
    MatrixXd IPX = MatrixXd::Identity(r, r);
    IPX.noalias() += P * xi[i];
    MatrixXd& Wn = Wt(i);
    Wn.noalias() = IPX * A.W(i);
    if (sym) {
      theta[i].noalias() = A.W(i).transpose() * xi[i] * Wn;
      symmetrize(theta[i]);
    } else {
      if (out) {
        MatrixXd IPXt = MatrixXd::Identity(r, r);
        IPXt.noalias() += P.transpose() * xi[i].transpose();
        out->Z(i).noalias() = IPXt * A.Z(i);
      }
      theta[i].noalias() = A.Z(i).transpose() * xi[i] * Wn;
    }
  });

  if (definite) *definite = sym && std::all_of(certified.begin(), certified.end(), [](char c) { return c != 0; });
  if (!out) return det[0];

  RLRMatrix& R = *out;
  walk_down(t, exec, [&](int i) {
    if (t.is_root(i)) return;
    const int p = t.parent(i);
    if (t.is_leaf(i)) {
      R.A(i).noalias() += R.U(i) * R.Sigma(p) * R.V(i).transpose();
      if (sym) symmetrize(R.A(i));
      return;
    }
    R.Sigma(i).noalias() += R.W(i) * R.Sigma(p) * R.Z(i).transpose();
    if (sym) symmetrize(R.Sigma(i));
  });
  return det[0];
}

}  // namespace

Inverse invert(const RLRMatrix& A, Exec exec) {
  Inverse result{RLRMatrix(A.topology_ptr(), A.symmetric()), {}};
  result.logdet = invert_impl(A, &result.matrix, exec, &result.positive_definite);
  return result;
}

LogDet logdet(const RLRMatrix& A, Exec exec) { return invert_impl(A, nullptr, exec); }

}  // namespace rlcov
