#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "rlcov/hcov.hpp"
#include "rlcov/partition.hpp"
#include "rlcov/points.hpp"
#include "rlcov/rlr.hpp"

namespace testing {

inline rlcov::PointSet uniform_points(int n, int d, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> c(static_cast<std::size_t>(n) * d);
  for (double& v : c) v = u(gen);
  return rlcov::PointSet(d, std::move(c));
}

/// nx x ny grid on [0,1]^2 at cell centers, x varying fastest.
inline rlcov::PointSet grid_points(int nx, int ny) {
  std::vector<double> c;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      c.push_back((i + 0.5) / nx);
      c.push_back((j + 0.5) / ny);
    }
  return rlcov::PointSet(2, std::move(c));
}

/// Random RLR matrix. Nonsymmetric ones get a diagonal shift of `shift` on
/// the leaf blocks. Symmetric ones are built positive definite: each Sigma and
/// leaf block is the part inherited from the parent plus a random SPD term.
inline rlcov::RLRMatrix random_rlr(std::shared_ptr<const rlcov::Topology> topo, bool symmetric, std::uint64_t seed,
                                   double shift = 4.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto rnd = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) m(i, j) = g(gen) / std::sqrt(static_cast<double>(std::max(1, c)));
    return m;
  };
  auto spd = [&](int m) {
    const Eigen::MatrixXd a = rnd(m, m);
    return Eigen::MatrixXd(a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(m, m));
  };
  rlcov::RLRMatrix A(topo, symmetric);
  const int r = topo->rank();
  for (int i = 0; i < topo->size(); ++i) {
    const int p = topo->parent(i);
    if (topo->is_leaf(i)) {
      const int m = topo->count(i);
      if (symmetric) {
        A.A(i) = spd(m);
        if (p >= 0) {
          A.U(i) = rnd(m, r);
          A.A(i) += A.U(i) * A.Sigma(p) * A.U(i).transpose();
        }
      } else {
        A.A(i) = rnd(m, m) + shift * Eigen::MatrixXd::Identity(m, m);
        if (p >= 0) {
          A.U(i) = rnd(m, r);
          A.V(i) = rnd(m, r);
        }
      }
    } else if (symmetric) {
      A.Sigma(i) = spd(r);
      if (p >= 0) {
        A.W(i) = rnd(r, r);
        A.Sigma(i) += A.W(i) * A.Sigma(p) * A.W(i).transpose();
      }
    } else {
      A.Sigma(i) = rnd(r, r);
      if (p >= 0) {
        A.W(i) = rnd(r, r);
        A.Z(i) = rnd(r, r);
      }
    }
  }
  return A;
}

/// Dense form assembled block by block from the definition, independently of
/// rlcov::to_dense.
inline Eigen::MatrixXd assemble_dense(const rlcov::RLRMatrix& A) {
  const rlcov::Topology& t = A.topology();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(A.n(), A.n());
  const std::vector<int>& leaves = t.leaves();
  for (int a : leaves)
    for (int b : leaves) {
      if (a == b) {
        D.block(t.begin(a), t.begin(a), t.count(a), t.count(a)) = A.A(a);
        continue;
      }
      // Lowest common ancestor and the two lifted bases.
      std::vector<int> pa, pb;
      for (int q = a; q >= 0; q = t.parent(q)) pa.push_back(q);
      for (int q = b; q >= 0; q = t.parent(q)) pb.push_back(q);
      int lca = -1;
      for (int q : pa)
        if (std::find(pb.begin(), pb.end(), q) != pb.end()) {
          lca = q;
          break;
        }
      Eigen::MatrixXd left = A.U(a), right = A.V(b);
      for (int q = t.parent(a); q != lca; q = t.parent(q)) left = (left * A.W(q)).eval();
      for (int q = t.parent(b); q != lca; q = t.parent(q)) right = (right * A.Z(q)).eval();
      D.block(t.begin(a), t.begin(b), t.count(a), t.count(b)) = left * A.Sigma(lca) * right.transpose();
    }
  return D;
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

inline double max_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

inline std::shared_ptr<const rlcov::PartitionTree> make_tree(const rlcov::PointSet& X, int r,
                                                             rlcov::LandmarkStrategy s = rlcov::LandmarkStrategy::RegularGrid,
                                                             std::uint64_t seed = 0) {
  return std::make_shared<const rlcov::PartitionTree>(rlcov::build_tree(X, r, s, seed));
}

}  // namespace testing

namespace testing {

struct RiccatiCase {
  Eigen::MatrixXd Lambda;
  Eigen::MatrixXd Xi;
};

/// Random symmetric Lambda and PSD Xi with every eigenvalue of I + Xi Lambda
/// at least `margin`. Scales are log-uniform over two decades.
inline RiccatiCase random_riccati(int r, std::mt19937_64& gen, double margin = 1e-2) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    Eigen::MatrixXd a(r, r), b(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        a(i, j) = g(gen);
        b(i, j) = g(gen);
      }
    const double sl = std::pow(10.0, u(gen)), sx = std::pow(10.0, u(gen));
    RiccatiCase c{sl * (a + a.transpose()) / (2.0 * std::sqrt(r)), sx * b * b.transpose() / r};
    // Xi Lambda is similar to the symmetric Xi^{1/2} Lambda Xi^{1/2}.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.Xi);
    const Eigen::MatrixXd h = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                              es.eigenvectors().transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> m(h * c.Lambda * h);
    if (1.0 + m.eigenvalues().minCoeff() >= margin) return c;
  }
}

inline double riccati_residual(const Eigen::MatrixXd& D, const RiccatiCase& c) {
  return (D + D.transpose() + D * c.Xi * D.transpose() - c.Lambda).norm();
}

}  // namespace testing
