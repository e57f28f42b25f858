#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "rlcov/parallel.hpp"
#include "rlcov/points.hpp"

namespace rlcov {

enum class Family { Matern, SquaredExponential, SphereMatern };

std::string to_string(Family family);
/// Accepts "matern", "sqexp" / "squared_exponential", "sphere" / "sphere_matern".
Family parse_family(const std::string& name);

/// Covariance parameters. Sill and nugget are carried as base-10 logarithms:
/// the sill is 10^alpha and the nugget 10^tau (no nugget when tau is empty).
struct KernelParams {
  double alpha = 0.0;
  double ell = 1.0;
  double nu = 0.5;
  std::optional<double> tau;

  double sill() const;
  double nugget() const;
  void validate() const;

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

/// A base covariance function k. Construction validates the parameters and
/// precomputes the constants used by every evaluation.
///
///   Matern:        10^a 2^(1-nu)/Gamma(nu) t^nu K_nu(t),  t = sqrt(2 nu) |x-y| / ell
///   SqExp:         10^a exp(-|x-y|^2 / (2 ell^2))          (nu ignored)
///   SphereMatern:  Matern of the chordal distance between (lat, lon) sites
///
/// plus 10^tau when x and y are bitwise-identical.
class KernelSpec {
 public:
  KernelSpec(Family family, KernelParams params);

  Family family() const { return family_; }
  const KernelParams& params() const { return params_; }
  double sill() const { return sill_; }
  double nugget() const { return nugget_; }

  /// Distance used by the family: Euclidean, or chordal for the sphere.
  double distance(SiteView x, SiteView y) const;
  /// Covariance at a distance, without the nugget term.
  double at_distance(double r) const;
  double operator()(SiteView x, SiteView y) const;

 private:
  double matern_correlation(double t) const;

  Family family_;
  KernelParams params_;
  double sill_;
  double nugget_;
  double scale_;       // sqrt(2 nu)/ell for Matern, 1/(2 ell^2) for SqExp
  double log_norm_;    // log(2^(1-nu)/Gamma(nu))
  int half_integer_;   // p when nu = p + 1/2 with small p, else -1
};

/// k(x, y). Throws InvalidArgument on dimension mismatch.
double kernel_eval(const KernelSpec& spec, SiteView x, SiteView y);

/// Matrix with entries k(X_i, Y_j).
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, PointsView X, PointsView Y, Exec exec = Exec::Parallel);
/// k(X, X): evaluates the upper triangle and mirrors it, so the result is
/// exactly symmetric with the nugget on the diagonal.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, PointsView X, Exec exec = Exec::Parallel);
/// Column k(X, x).
Eigen::VectorXd kernel_column(const KernelSpec& spec, PointsView X, SiteView x);

/// Chord length between two (lat, lon) points on the unit sphere, in [0, 2].
double chordal_distance(SiteView x, SiteView y);

bool bitwise_equal(SiteView x, SiteView y);

}  // namespace rlcov
