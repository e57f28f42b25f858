#include "rlcov/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Cholesky>

#include "rlcov/error.hpp"
#include "rlcov/hcov.hpp"
#include "rlcov/io.hpp"

namespace rlcov {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Param p) {
  switch (p) {
    case Param::Alpha: return "alpha";
    case Param::Ell: return "ell";
    case Param::Nu: return "nu";
    case Param::Tau: return "tau";
  }
  return "?";
}

Param parse_param(const std::string& name) {
  if (name == "alpha") return Param::Alpha;
  if (name == "ell") return Param::Ell;
  if (name == "nu") return Param::Nu;
  if (name == "tau") return Param::Tau;
  throw InvalidArgument("unknown parameter '" + name + "' (expected alpha, ell, nu or tau)");
}

double get_param(const KernelParams& theta, Param p) {
  switch (p) {
    case Param::Alpha: return theta.alpha;
    case Param::Ell: return theta.ell;
    case Param::Nu: return theta.nu;
    case Param::Tau:
      if (!theta.tau) throw InvalidArgument("parameter tau is not set");
      return *theta.tau;
  }
  return 0.0;
}

void set_param(KernelParams& theta, Param p, double value) {
  switch (p) {
    case Param::Alpha: theta.alpha = value; break;
    case Param::Ell: theta.ell = value; break;
    case Param::Nu: theta.nu = value; break;
    case Param::Tau: theta.tau = value; break;
  }
}

void ParamSpace::validate() const {
  if (free.empty()) throw InvalidArgument("parameter space: no free parameters");
  for (std::size_t a = 0; a < free.size(); ++a)
    for (std::size_t b = a + 1; b < free.size(); ++b)
      if (free[a] == free[b]) throw InvalidArgument("parameter space: " + to_string(free[a]) + " listed twice");
  for (Param p : free) {
    const Bounds& b = bound(p);
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi))
      throw InvalidArgument("parameter space: bounds of " + to_string(p) + " must be finite with lo < hi");
    if ((p == Param::Ell || p == Param::Nu) && b.lo <= 0.0)
      throw InvalidArgument("parameter space: bounds of " + to_string(p) + " must be positive");
  }
}

Objective likelihood_objective(const FieldData& data, Family family, std::shared_ptr<const PartitionTree> tree,
                               Exec exec) {
  return [&data, family, tree = std::move(tree), exec](const KernelParams& theta) {
    const auto h = build_hcov(KernelSpec(family, theta), tree, exec);
    return loglik_reps(*h, data, exec);
  };
}

namespace {

double to_unbounded(double x, const Bounds& b) {
  const double s = (x - b.lo) / (b.hi - b.lo);
  return std::log(s / (1.0 - s));
}

double to_bounded(double u, const Bounds& b) { return b.lo + (b.hi - b.lo) / (1.0 + std::exp(-u)); }

class Search {
 public:
  Search(const Objective& L, const ParamSpace& space, KernelParams base, FitResult& result, const FitOptions& opts)
      : L_(L), space_(space), base_(std::move(base)), result_(result), opts_(opts) {}

  KernelParams theta(const VectorXd& u) const {
    KernelParams t = base_;
    for (std::size_t j = 0; j < space_.free.size(); ++j)
      set_param(t, space_.free[j], to_bounded(u(j), space_.bound(space_.free[j])));
    return t;
  }

  VectorXd unbounded(const KernelParams& t) const {
    VectorXd u(space_.free.size());
    for (std::size_t j = 0; j < space_.free.size(); ++j)
      u(j) = to_unbounded(get_param(t, space_.free[j]), space_.bound(space_.free[j]));
    return u;
  }

  // Negated log-likelihood; failed evaluations count as +inf.
  double f(const VectorXd& u) {
    const KernelParams t = theta(u);
    double value = -std::numeric_limits<double>::infinity();
    try {
      value = L_(t);
      if (!std::isfinite(value)) value = -std::numeric_limits<double>::infinity();
    } catch (const Error&) {
    }
    result_.trace.push_back({t, value});
    ++result_.evaluations;
    return -value;
  }

  bool budget_left() const { return result_.evaluations < opts_.max_evaluations; }

  // Nelder-Mead from u0. Returns true on convergence; `best` holds the best
  // vertex and its value.
  bool run(const VectorXd& u0, VectorXd& best, double& fbest) {
    const int m = static_cast<int>(u0.size());
    std::vector<VectorXd> x(m + 1, u0);
    std::vector<double> fx(m + 1);
    fx[0] = f(u0);
    for (int j = 0; j < m; ++j) {
      x[j + 1](j) += opts_.initial_step;
      fx[j + 1] = f(x[j + 1]);
    }
    std::vector<int> order(m + 1);
    bool converged = false;
    while (true) {
      for (int k = 0; k <= m; ++k) order[k] = k;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
      const int lo = order[0], hi = order[m], nh = order[m - 1];
      double diameter = 0.0;
      for (int k = 1; k <= m; ++k) diameter = std::max(diameter, (x[order[k]] - x[lo]).cwiseAbs().maxCoeff());
      const double spread = fx[hi] - fx[lo];
      if (std::isfinite(fx[hi]) && diameter < opts_.x_tol && spread < opts_.f_tol) {
        converged = true;
        break;
      }
      if (!budget_left()) break;

      VectorXd centroid = VectorXd::Zero(m);
      for (int k = 0; k < m; ++k) centroid += x[order[k]];
      centroid /= m;
      const VectorXd xr = centroid + (centroid - x[hi]);
      const double fr = f(xr);
      if (fr < fx[lo]) {
        const VectorXd xe = centroid + 2.0 * (centroid - x[hi]);
        const double fe = f(xe);
        if (fe < fr) {
          x[hi] = xe;
          fx[hi] = fe;
        } else {
          x[hi] = xr;
          fx[hi] = fr;
        }
        continue;
      }
      if (fr < fx[nh]) {
        x[hi] = xr;
        fx[hi] = fr;
        continue;
      }
      const bool outside = fr < fx[hi];
      const VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                  : VectorXd(centroid + 0.5 * (x[hi] - centroid));
      const double fc = f(xc);
      if (fc < (outside ? fr : fx[hi])) {
        x[hi] = xc;
        fx[hi] = fc;
        continue;
      }
      for (int k = 1; k <= m; ++k) {
        const int v = order[k];
        x[v] = x[lo] + 0.5 * (x[v] - x[lo]);
        fx[v] = f(x[v]);
      }
    }
    int b = 0;
    for (int k = 1; k <= m; ++k)
      if (fx[k] < fx[b]) b = k;
    best = x[b];
    fbest = fx[b];
    return converged;
  }

 private:
  const Objective& L_;
  const ParamSpace& space_;
  KernelParams base_;
  FitResult& result_;
  const FitOptions& opts_;
};

}  // namespace

FitResult fit_mle(const Objective& L, const ParamSpace& space, const KernelParams& init, const FitOptions& opts) {
  space.validate();
  for (Param p : space.free) {
    const double v = get_param(init, p);
    const Bounds& b = space.bound(p);
    if (!(v > b.lo && v < b.hi))
      throw InvalidArgument("fit_mle: initial " + to_string(p) + " must lie strictly inside its bounds");
  }
  FitResult result;
  result.free = space.free;
  KernelParams base = space.fixed;
  for (Param p : space.free) set_param(base, p, get_param(init, p));
  Search search(L, space, base, result, opts);

  const VectorXd u0 = search.unbounded(base);
  if (!std::isfinite(search.f(u0))) throw NumericalError("fit_mle: the log-likelihood cannot be evaluated at init");

  VectorXd best;
  double fbest = 0.0;
  bool converged = search.run(u0, best, fbest);
  if (opts.restart && search.budget_left()) {
    VectorXd best2;
    double fbest2 = 0.0;
    converged = search.run(best, best2, fbest2);
    if (fbest2 <= fbest) {
      best = best2;
      fbest = fbest2;
    }
  }
  result.converged = converged;
  result.theta_hat = search.theta(best);
  result.loglik_at_opt = -fbest;
  // Report the value exactly as recorded in the trace for theta_hat.
  for (const TraceEntry& e : result.trace)
    if (e.theta == result.theta_hat) {
      result.loglik_at_opt = e.loglik;
      break;
    }
  if (opts.standard_errors) {
    try {
      result.std_errors = std_errors(L, space.free, result.theta_hat);
    } catch (const Error& e) {
      result.se_error = e.what();
    }
  }
  return result;
}

FitResult fit_mle(const FieldData& data, Family family, std::shared_ptr<const PartitionTree> tree,
                  const ParamSpace& space, const KernelParams& init, const FitOptions& opts) {
  return fit_mle(likelihood_objective(data, family, std::move(tree), opts.exec), space, init, opts);
}

std::vector<FitResult> fit_nu_sweep(const Objective& L, ParamSpace space, const KernelParams& init,
                                    const std::vector<double>& nus, const FitOptions& opts) {
  std::erase(space.free, Param::Nu);
  std::vector<FitResult> out;
  for (double nu : nus) {
    space.fixed.nu = nu;
    KernelParams start = init;
    start.nu = nu;
    out.push_back(fit_mle(L, space, start, opts));
  }
  return out;
}

Eigen::MatrixXd fd_hessian(const Objective& L, const std::vector<Param>& free, const KernelParams& theta) {
  const int m = static_cast<int>(free.size());
  std::vector<double> h(m);
  for (int j = 0; j < m; ++j) h[j] = 1e-3 * (1.0 + std::abs(get_param(theta, free[j])));
  auto at = [&](int j, double sj, int k, double sk) {
    KernelParams t = theta;
    if (j >= 0) set_param(t, free[j], get_param(theta, free[j]) + sj * h[j]);
    if (k >= 0) set_param(t, free[k], get_param(t, free[k]) + sk * h[k]);
    return L(t);
  };
  const double f0 = L(theta);
  MatrixXd H(m, m);
  for (int j = 0; j < m; ++j) {
    H(j, j) = (at(j, 1, -1, 0) - 2.0 * f0 + at(j, -1, -1, 0)) / (h[j] * h[j]);
    for (int k = j + 1; k < m; ++k) {
      const double v = (at(j, 1, k, 1) - at(j, 1, k, -1) - at(j, -1, k, 1) + at(j, -1, k, -1)) / (4.0 * h[j] * h[k]);
      H(j, k) = v;
      H(k, j) = v;
    }
  }
  return H;
}

std::vector<double> std_errors(const Objective& L, const std::vector<Param>& free, const KernelParams& theta_hat) {
  const MatrixXd info = -fd_hessian(L, free, theta_hat);
  Eigen::LLT<MatrixXd> llt(info);
  if (!info.allFinite() || llt.info() != Eigen::Success)
    throw NumericalError(
        "std_errors: the Hessian is not negative definite; the optimum is on the boundary or L is not locally "
        "concave there");
  const MatrixXd cov = llt.solve(MatrixXd::Identity(info.rows(), info.cols()));
  std::vector<double> se(free.size());
  for (std::size_t j = 0; j < free.size(); ++j) se[j] = std::sqrt(cov(j, j));
  return se;
}

std::vector<double> std_errors(const FieldData& data, Family family, std::shared_ptr<const PartitionTree> tree,
                               const std::vector<Param>& free, const KernelParams& theta_hat) {
  return std_errors(likelihood_objective(data, family, std::move(tree)), free, theta_hat);
}

Slice loglik_slice(const Objective& L, const KernelParams& center, Param row_axis, Param col_axis,
                   const std::vector<double>& row_values, const std::vector<double>& col_values, Exec exec) {
  if (row_axis == col_axis) throw InvalidArgument("loglik_slice: the two axes must differ");
  if (row_values.empty() || col_values.empty()) throw InvalidArgument("loglik_slice: empty grid");
  Slice s{row_axis, col_axis, row_values, col_values, MatrixXd(row_values.size(), col_values.size())};
  const int rows = static_cast<int>(row_values.size()), cols = static_cast<int>(col_values.size());
  parallel_for(rows * cols, exec, [&](int k) {
    const int a = k / cols, b = k % cols;
    KernelParams t = center;
    set_param(t, row_axis, row_values[a]);
    set_param(t, col_axis, col_values[b]);
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
      v = L(t);
    } catch (const Error&) {
    }
    s.L(a, b) = v;
  });
  return s;
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw InvalidArgument("linspace: need at least one point");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (int k = 0; k < n; ++k) v[k] = k == n - 1 ? hi : lo + (hi - lo) * k / (n - 1);
  return v;
}

void write_slice_csv(std::ostream& out, const Slice& s) {
  out << to_string(s.row_axis) << ',' << to_string(s.col_axis) << '\n';
  for (double c : s.col_values) out << ',' << format_double(c);
  out << '\n';
  for (std::size_t a = 0; a < s.row_values.size(); ++a) {
    out << format_double(s.row_values[a]);
    for (std::size_t b = 0; b < s.col_values.size(); ++b) out << ',' << format_double(s.L(a, b));
    out << '\n';
  }
}

}  // namespace rlcov
