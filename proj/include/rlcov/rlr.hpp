#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "rlcov/parallel.hpp"
#include "rlcov/topology.hpp"

namespace rlcov {

/// Factors stored on one tree node. Which members are populated depends on
/// the node kind:
///   leaf:                 A (n_i x n_i), U, V (n_i x r)
///   nonleaf:              Sigma (r x r)
///   nonleaf and nonroot:  W, Z (r x r)
/// A leaf that is also the root only has A.
struct NodeFactors {
  Eigen::MatrixXd A;
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
  Eigen::MatrixXd Sigma;
  Eigen::MatrixXd W;
  Eigen::MatrixXd Z;
};

/// A recursively low-rank matrix on a partitioning tree. Sibling blocks are
/// A(I_i, I_j) = U_i Sigma_p V_j^T and bases nest as U_p(I_i,:) = U_i W_p.
///
/// When `symmetric()` is set, V and Z are not stored: V(i) and Z(i) return U(i)
/// and W(i). All vectors are indexed in tree order.
class RLRMatrix {
 public:
  RLRMatrix() = default;
  /// Allocates zero factors of the right shapes.
  RLRMatrix(std::shared_ptr<const Topology> topology, bool symmetric);

  const Topology& topology() const { return *topology_; }
  const std::shared_ptr<const Topology>& topology_ptr() const { return topology_; }
  int n() const { return topology_->n(); }
  int rank() const { return topology_->rank(); }
  bool symmetric() const { return symmetric_; }

  Eigen::MatrixXd& A(int i) { return f_[i].A; }
  const Eigen::MatrixXd& A(int i) const { return f_[i].A; }
  Eigen::MatrixXd& U(int i) { return f_[i].U; }
  const Eigen::MatrixXd& U(int i) const { return f_[i].U; }
  Eigen::MatrixXd& V(int i) { return symmetric_ ? f_[i].U : f_[i].V; }
  const Eigen::MatrixXd& V(int i) const { return symmetric_ ? f_[i].U : f_[i].V; }
  Eigen::MatrixXd& Sigma(int i) { return f_[i].Sigma; }
  const Eigen::MatrixXd& Sigma(int i) const { return f_[i].Sigma; }
  Eigen::MatrixXd& W(int i) { return f_[i].W; }
  const Eigen::MatrixXd& W(int i) const { return f_[i].W; }
  Eigen::MatrixXd& Z(int i) { return symmetric_ ? f_[i].W : f_[i].Z; }
  const Eigen::MatrixXd& Z(int i) const { return symmetric_ ? f_[i].W : f_[i].Z; }

  /// Checks factor shapes, and symmetry of A_ii and Sigma_p for symmetric
  /// matrices (to `tol` relative). Throws InvalidArgument.
  void validate(double tol = 0.0) const;

 private:
  std::shared_ptr<const Topology> topology_;
  bool symmetric_ = false;
  std::vector<NodeFactors> f_;
};

/// A determinant as log|det| and its sign. sign == 0 means det == 0 and
/// log_abs == -inf.
struct LogDet {
  double log_abs = 0.0;
  int sign = 1;

  static LogDet zero() { return {-std::numeric_limits<double>::infinity(), 0}; }
  LogDet& operator+=(const LogDet& o) {
    log_abs += o.log_abs;
    sign *= o.sign;
    return *this;
  }
};

/// y = A b, with b and y in tree order. B may hold several columns.
Eigen::MatrixXd matvec(const RLRMatrix& A, const Eigen::MatrixXd& B, Exec exec = Exec::Parallel);
Eigen::VectorXd matvec(const RLRMatrix& A, const Eigen::VectorXd& b, Exec exec = Exec::Parallel);

struct Inverse {
  RLRMatrix matrix;
  LogDet logdet;
  /// Symmetric input only: every leaf block passed a Cholesky test and every
  /// I + Lambda_p Xi_p has positive eigenvalues, which together imply A is
  /// positive definite.
  bool positive_definite = false;
};

/// A^{-1} on the same tree and rank, and det(A) as a byproduct. Throws
/// NumericalError naming the node when a leaf block A_ii - U_i Sigma_p V_i^T or
/// a matrix I + Lambda_p Xi_p is numerically singular.
Inverse invert(const RLRMatrix& A, Exec exec = Exec::Parallel);

/// det(A); the same traversal as invert with the factors discarded.
LogDet logdet(const RLRMatrix& A, Exec exec = Exec::Parallel);

/// G with A = G G^T for symmetric positive definite A. G shares U_i and W_q
/// with A and is not symmetric. Throws NumericalError naming the node on a
/// leaf Cholesky failure or an unsolvable Riccati equation.
RLRMatrix cholesky_like(const RLRMatrix& A, Exec exec = Exec::Parallel);

struct RiccatiInfo {
  double residual = 0.0;           // ||D + D^T + D Xi D^T - Lambda||_F
  bool complementary = false;      // the first ordering failed and the other was used
  bool both_orderings_valid = false;  // only filled when check_both is set
  bool spectral = false;           // the Schur route failed and the symmetric eigenvalue form was used
};

/// Symmetric D with D + D^T + D Xi D^T = Lambda, on the branch that tends to
/// Lambda/2 as Xi -> 0, by the Schur method on the 2r x 2r Hamiltonian. For
/// PSD Xi a closed form built from symmetric eigendecompositions checks
/// solvability and replaces the Schur result when that fails or is less
/// accurate. Requires every eigenvalue of I + Xi Lambda to be positive;
/// throws NumericalError otherwise.
Eigen::MatrixXd riccati_solve(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& Xi, RiccatiInfo* info = nullptr,
                              bool check_both = false);

/// Materializes A. Throws InvalidArgument when n > 4096.
Eigen::MatrixXd to_dense(const RLRMatrix& A);

constexpr int kDenseGuard = 4096;

/// Binary dump of all factors: little-endian doubles, header (n, r, node
/// count, symmetric flag), then parent and range of every node, then factors
/// in node-id order.
void save_factors(std::ostream& out, const RLRMatrix& A);
RLRMatrix load_factors(std::istream& in);

}  // namespace rlcov
