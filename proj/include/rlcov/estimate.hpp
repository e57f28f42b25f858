#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rlcov/grf.hpp"
#include "rlcov/kernels.hpp"
#include "rlcov/partition.hpp"

namespace rlcov {

enum class Param { Alpha = 0, Ell = 1, Nu = 2, Tau = 3 };

std::string to_string(Param p);
Param parse_param(const std::string& name);

double get_param(const KernelParams& theta, Param p);
void set_param(KernelParams& theta, Param p, double value);

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

/// Which parameters are optimized, their box, and the values of the rest.
struct ParamSpace {
  std::vector<Param> free;
  std::array<Bounds, 4> bounds{{{-3.0, 3.0}, {1e-3, 10.0}, {0.1, 5.0}, {-8.0, 1.0}}};
  KernelParams fixed;

  Bounds& bound(Param p) { return bounds[static_cast<int>(p)]; }
  const Bounds& bound(Param p) const { return bounds[static_cast<int>(p)]; }
  void validate() const;
};

struct TraceEntry {
  KernelParams theta;
  double loglik = 0.0;  // -inf when the evaluation failed
};

struct FitResult {
  KernelParams theta_hat;
  double loglik_at_opt = 0.0;
  std::vector<Param> free;
  std::vector<double> std_errors;  // one per free parameter; empty when not computed
  std::string se_error;            // why std_errors is empty, if it is
  std::vector<TraceEntry> trace;
  bool converged = false;
  int evaluations = 0;
};

struct FitOptions {
  int max_evaluations = 1500;
  double x_tol = 1e-4;   // simplex diameter in transformed units
  double f_tol = 1e-6;   // spread of L over the simplex
  double initial_step = 0.5;
  bool restart = true;
  bool standard_errors = true;
  Exec exec = Exec::Parallel;
};

/// L(theta); may throw, which the optimizer records as -inf.
using Objective = std::function<double(const KernelParams&)>;

/// Log-likelihood of `data` under k_h with the given family on `tree`.
/// Uses all replicate columns.
Objective likelihood_objective(const FieldData& data, Family family, std::shared_ptr<const PartitionTree> tree,
                               Exec exec = Exec::Parallel);

/// Nelder-Mead maximization in logit-transformed bound space, restarted once
/// from the optimum. Throws when L(init) cannot be evaluated.
FitResult fit_mle(const Objective& L, const ParamSpace& space, const KernelParams& init, const FitOptions& opts = {});
FitResult fit_mle(const FieldData& data, Family family, std::shared_ptr<const PartitionTree> tree,
                  const ParamSpace& space, const KernelParams& init, const FitOptions& opts = {});

/// Optimizes with nu fixed at each value in turn; one result per value.
std::vector<FitResult> fit_nu_sweep(const Objective& L, ParamSpace space, const KernelParams& init,
                                    const std::vector<double>& nus, const FitOptions& opts = {});

/// Square roots of the diagonal of the inverse negated Hessian of L at
/// theta_hat, with central differences of step 1e-3 (1 + |theta_j|). Throws
/// NumericalError when the Hessian is not negative definite.
std::vector<double> std_errors(const Objective& L, const std::vector<Param>& free, const KernelParams& theta_hat);
std::vector<double> std_errors(const FieldData& data, Family family, std::shared_ptr<const PartitionTree> tree,
                               const std::vector<Param>& free, const KernelParams& theta_hat);

/// The symmetrized finite-difference Hessian used by std_errors.
Eigen::MatrixXd fd_hessian(const Objective& L, const std::vector<Param>& free, const KernelParams& theta);

struct Slice {
  Param row_axis;
  Param col_axis;
  std::vector<double> row_values;
  std::vector<double> col_values;
  Eigen::MatrixXd L;  // NaN where the evaluation failed
};

/// L on the outer product of two grids with the other parameters at `center`.
Slice loglik_slice(const Objective& L, const KernelParams& center, Param row_axis, Param col_axis,
                   const std::vector<double>& row_values, const std::vector<double>& col_values,
                   Exec exec = Exec::Serial);

/// n evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, int n);

/// Two header lines (axis names; column grid values) then one row per row
/// value, led by that value.
void write_slice_csv(std::ostream& out, const Slice& s);

}  // namespace rlcov
