#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "rlcov/hcov.hpp"
#include "rlcov/parallel.hpp"
#include "rlcov/points.hpp"
#include "rlcov/rlr.hpp"

namespace rlcov {

/// Observations at a site set. `values` is n x N in the caller's site order:
/// one column per replicate.
struct FieldData {
  PointSet sites;
  Eigen::MatrixXd values;
  double mean = 0.0;

  int n() const { return sites.size(); }
  int replicates() const { return static_cast<int>(values.cols()); }
};

struct KrigeResult {
  double mu0 = 0.0;
  double var0 = 0.0;      // clamped at 0
  double var0_raw = 0.0;  // before clamping
};

/// Everything the per-site kriging loop needs, built once per (h, data).
/// Read-only after construction except for the clamp counter, which is
/// atomic; krige may be called concurrently.
struct KrigeWorkspace {
  std::shared_ptr<const HCov> h;
  double mean = 0.0;
  std::shared_ptr<const RLRMatrix> inverse;
  LogDet logdet;
  Eigen::VectorXd weights;  // K_h^{-1} (z - mu), tree order
  InnerProdCache inner;
  QuadCache quad;
  std::shared_ptr<std::atomic<std::int64_t>> clamped = std::make_shared<std::atomic<std::int64_t>>(0);

  bool prepared() const { return h != nullptr && inverse != nullptr; }
  std::int64_t clamp_count() const { return clamped->load(); }
};

/// Uses the first column of data.values. Throws InvalidArgument unless the
/// data sites match the tree sites in the caller's order.
KrigeWorkspace krige_prepare(std::shared_ptr<const HCov> h, const FieldData& data, Exec exec = Exec::Parallel);

/// Predicts the latent (noise-free) field at x0:
///   mu0  = mu + w^T k_h(X, x0)
///   var0 = k(x0, x0) - k_h(X, x0)^T K_h^{-1} k_h(X, x0),  nugget excluded from k(x0, x0)
/// Negative variances are clamped to zero and counted.
KrigeResult krige(const KrigeWorkspace& work, SiteView x0);
std::vector<KrigeResult> krige(const KrigeWorkspace& work, PointsView x0, Exec exec = Exec::Parallel);

/// n standard normal deviates: inverse normal CDF of a counter-based 64-bit
/// generator, so the draw for index i depends only on (seed, i).
Eigen::VectorXd standard_normals(std::uint64_t seed, int n, std::uint64_t offset = 0);

/// z = mu + G y with K_h = G G^T and y = standard_normals(seed, n); the result is in
/// the caller's site order.
Eigen::VectorXd sample(const HCov& h, std::uint64_t seed, double mean = 0.0, Exec exec = Exec::Parallel);
/// Same with an explicit y (tree order). Lets tests force y.
Eigen::VectorXd sample_with(const HCov& h, const RLRMatrix& G, const Eigen::VectorXd& y, double mean = 0.0,
                            Exec exec = Exec::Parallel);

/// Gaussian log-likelihood of the first column of data.values.
double loglik(const HCov& h, const FieldData& data, Exec exec = Exec::Parallel);
/// Sum over all replicate columns with a shared inversion.
double loglik_reps(const HCov& h, const FieldData& data, Exec exec = Exec::Parallel);

/// Reorders the caller's values into tree order; checks that the sites agree.
Eigen::MatrixXd values_in_tree_order(const PartitionTree& tree, const FieldData& data);

}  // namespace rlcov
