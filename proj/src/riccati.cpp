#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "rlcov/error.hpp"
#include "rlcov/rlr.hpp"

namespace rlcov {

namespace {

using Eigen::MatrixXd;

double residual(const MatrixXd& D, const MatrixXd& Lambda, const MatrixXd& Xi) {
  return (D + D.transpose() + D * Xi * D.transpose() - Lambda).norm();
}

// Swaps the adjacent 1x1 diagonal blocks k and k+1 of the upper-triangular T,
// updating the Schur vectors Q so that M = Q T Q^T still holds.
void swap_adjacent(MatrixXd& T, MatrixXd& Q, int k) {
  const double a = T(k, k), b = T(k, k + 1), c = T(k + 1, k + 1);
  if (a == c) return;
  // v = [b, c - a] is the eigenvector of [[a, b], [0, c]] for c.
  const double h = std::hypot(b, c - a);
  const double cs = b / h, sn = (c - a) / h;
  const int m = static_cast<int>(T.rows());
  for (int j = k; j < m; ++j) {
    const double x = T(k, j), y = T(k + 1, j);
    T(k, j) = cs * x + sn * y;
    T(k + 1, j) = -sn * x + cs * y;
  }
  for (int i = 0; i <= k + 1; ++i) {
    const double x = T(i, k), y = T(i, k + 1);
    T(i, k) = cs * x + sn * y;
    T(i, k + 1) = -sn * x + cs * y;
  }
  for (int i = 0; i < m; ++i) {
    const double x = Q(i, k), y = Q(i, k + 1);
    Q(i, k) = cs * x + sn * y;
    Q(i, k + 1) = -sn * x + cs * y;
  }
  T(k + 1, k) = 0.0;
}

// Invariant-subspace solution D = Q21 Q11^{-1} after moving the eigenvalues
// selected by `first` to the leading r positions.
bool subspace_solution(MatrixXd T, MatrixXd Q, int r, bool negative_first, MatrixXd& D) {
  const int m = 2 * r;
  auto wanted = [&](double lambda) { return negative_first ? lambda < 0.0 : lambda > 0.0; };
  for (int pass = 0; pass < m; ++pass) {
    bool moved = false;
    for (int k = 0; k + 1 < m; ++k)
      if (!wanted(T(k, k)) && wanted(T(k + 1, k + 1))) {
        swap_adjacent(T, Q, k);
        moved = true;
      }
    if (!moved) break;
  }
  for (int k = 0; k < r; ++k)
    if (!wanted(T(k, k))) return false;
  Eigen::PartialPivLU<MatrixXd> lu(Q.topLeftCorner(r, r));
  const auto& U = lu.matrixLU();
  double umax = 0.0, umin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < r; ++k) {
    umax = std::max(umax, std::abs(U(k, k)));
    umin = std::min(umin, std::abs(U(k, k)));
  }
  if (!(umin > r * std::numeric_limits<double>::epsilon() * umax)) return false;
  // D Q11 = Q21  <=>  Q11^T D^T = Q21^T
  MatrixXd Dt = lu.transpose().solve(Q.bottomLeftCorner(r, r).transpose());
  D = 0.5 * (Dt + Dt.transpose());
  return true;
}

// For PSD Xi = R R^T and M = R^T Lambda R, the solution on the Lambda -> 0
// branch is D = Lambda/2 - Lambda R (I + sqrt(I + M))^{-2} R^T Lambda / 2, the
// matrix form of d = l / (1 + sqrt(1 + x l)). Only symmetric eigenproblems are
// involved, so clustered eigenvalues cause no trouble. `min_eig` receives the
// smallest eigenvalue of I + M, which has the spectrum of I + Xi Lambda.
MatrixXd spectral_solution(const MatrixXd& Lambda, const MatrixXd& Xi, double& min_eig) {
  const int r = static_cast<int>(Lambda.rows());
  const MatrixXd L = 0.5 * (Lambda + Lambda.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> ex(0.5 * (Xi + Xi.transpose()));
  const MatrixXd R = ex.eigenvectors() * ex.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const MatrixXd M = R.transpose() * L * R;
  Eigen::SelfAdjointEigenSolver<MatrixXd> em(MatrixXd::Identity(r, r) + 0.5 * (M + M.transpose()));
  min_eig = em.eigenvalues().minCoeff();
  if (!(min_eig > 0.0)) return {};
  const Eigen::VectorXd f = (1.0 + em.eigenvalues().array().sqrt()).square().inverse().matrix();
  const MatrixXd LR = L * R * em.eigenvectors();
  MatrixXd D = 0.5 * L - 0.5 * LR * f.asDiagonal() * LR.transpose();
  return 0.5 * (D + D.transpose());
}

}  // namespace

Eigen::MatrixXd riccati_solve(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& Xi, RiccatiInfo* info,
                              bool check_both) {
  const int r = static_cast<int>(Lambda.rows());
  if (Lambda.cols() != r || Xi.rows() != r || Xi.cols() != r)
    throw InvalidArgument("riccati_solve: Lambda and Xi must be square of the same size");
  if (!Lambda.allFinite() || !Xi.allFinite()) throw NumericalError("riccati_solve: non-finite input");

  const double nl = Lambda.norm(), nx = Xi.norm();
  RiccatiInfo local;
  RiccatiInfo& out = info ? *info : local;
  out = {};
  if (nl == 0.0) return MatrixXd::Zero(r, r);
  if (nx == 0.0) return 0.5 * (Lambda + Lambda.transpose()) * 0.5;

  // Xi is PSD in every use inside the factorization; the spectral form then
  // decides solvability exactly and serves as the fallback.
  Eigen::SelfAdjointEigenSolver<MatrixXd> exi(0.5 * (Xi + Xi.transpose()), Eigen::EigenvaluesOnly);
  const bool psd = exi.eigenvalues().minCoeff() >= -1e-12 * nx;
  const double tol = 1e-10 * (1.0 + nl);
  MatrixXd Dspec;
  double res_spec = std::numeric_limits<double>::infinity();
  if (psd) {
    double min_eig = 0.0;
    Dspec = spectral_solution(Lambda, Xi, min_eig);
    if (!(min_eig > 1e3 * std::numeric_limits<double>::epsilon()))
      throw NumericalError("riccati_solve: I + Xi Lambda has a nonpositive eigenvalue, no symmetric solution");
    res_spec = residual(Dspec, Lambda, Xi);
  }
  auto use_spectral = [&]() {
    out.residual = res_spec;
    out.spectral = true;
    return Dspec;
  };

  // With D = D'/s the equation becomes 2D' + D'(Xi/s)D' = s Lambda; s balances
  // the two blocks of the Hamiltonian.
  const double s = std::sqrt(nx / nl);
  MatrixXd M(2 * r, 2 * r);
  M.topLeftCorner(r, r) = -MatrixXd::Identity(r, r);
  M.topRightCorner(r, r) = -Xi / s;
  M.bottomLeftCorner(r, r) = -s * Lambda;
  M.bottomRightCorner(r, r) = MatrixXd::Identity(r, r);

  Eigen::RealSchur<MatrixXd> schur(M);
  if (schur.info() != Eigen::Success) {
    if (psd) return use_spectral();
    throw NumericalError("riccati_solve: Schur decomposition did not converge");
  }
  const MatrixXd& T = schur.matrixT();
  int negatives = 0;
  const double tiny = 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + M.norm());
  for (int k = 0; k < 2 * r; ++k) {
    if (k + 1 < 2 * r && T(k + 1, k) != 0.0) {
      // A computed complex pair; with PSD Xi the true spectrum is real and
      // the pair comes from a cluster.
      if (psd) return use_spectral();
      throw NumericalError("riccati_solve: I + Xi Lambda has complex eigenvalues, no symmetric solution");
    }
    if (std::abs(T(k, k)) <= tiny) throw NumericalError("riccati_solve: I + Xi Lambda is singular, no symmetric solution");
    if (T(k, k) < 0.0) ++negatives;
  }
  if (negatives != r) throw NumericalError("riccati_solve: I + Xi Lambda has a negative eigenvalue");

  auto attempt = [&](bool negative_first, MatrixXd& D, double& res) {
    MatrixXd Dp;
    if (!subspace_solution(T, schur.matrixU(), r, negative_first, Dp)) return false;
    D = Dp / s;
    res = residual(D, Lambda, Xi);
    return std::isfinite(res);
  };

  MatrixXd D, D2;
  double res = std::numeric_limits<double>::infinity(), res2 = res;
  const bool ok = attempt(true, D, res);
  if (check_both) {
    const bool ok2 = attempt(false, D2, res2);
    out.both_orderings_valid = ok && ok2 && res <= tol && res2 <= tol;
  }
  if (ok && res <= tol) {
    out.residual = res;
    return D;
  }
  if (!check_both) attempt(false, D2, res2);
  if (res_spec <= std::min(res, res2)) return use_spectral();
  if (res2 < res) {
    out.residual = res2;
    out.complementary = true;
    return D2;
  }
  if (!ok) throw NumericalError("riccati_solve: invariant subspace is not a graph, no symmetric solution");
  out.residual = res;
  return D;
}

}  // namespace rlcov
