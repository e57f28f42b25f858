#include "rlcov/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>

#include "rlcov/error.hpp"

namespace rlcov {

namespace {

constexpr int kMaxClosedForm = 12;

// log K_nu(nu z) by the uniform asymptotic expansion, five terms.
double log_bessel_k_debye(double nu, double t) {
  const double z = t / nu;
  const double s = std::sqrt(1.0 + z * z);
  const double p = 1.0 / s;
  const double p2 = p * p;
  const double eta = s + std::log(z / (1.0 + s));
  const double u1 = p * (3.0 - 5.0 * p2) / 24.0;
  const double u2 = p2 * (81.0 + p2 * (-462.0 + p2 * 385.0)) / 1152.0;
  const double u3 = p * p2 * (30375.0 + p2 * (-369603.0 + p2 * (765765.0 - p2 * 425425.0))) / 414720.0;
  const double u4 =
      p2 * p2 * (4465125.0 + p2 * (-94121676.0 + p2 * (349922430.0 + p2 * (-446185740.0 + p2 * 185910725.0)))) /
      39813120.0;
  const double inv = 1.0 / nu;
  const double series = 1.0 - u1 * inv + u2 * inv * inv - u3 * inv * inv * inv + u4 * inv * inv * inv * inv;
  return 0.5 * std::log(std::numbers::pi / (2.0 * nu)) - nu * eta - 0.5 * std::log(s) + std::log(series);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::Matern: return "matern";
    case Family::SquaredExponential: return "sqexp";
    case Family::SphereMatern: return "sphere";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  const std::string s = lower(name);
  if (s == "matern") return Family::Matern;
  if (s == "sqexp" || s == "squared_exponential" || s == "squaredexponential") return Family::SquaredExponential;
  if (s == "sphere" || s == "sphere_matern" || s == "spherematern") return Family::SphereMatern;
  throw InvalidArgument("unknown kernel family '" + name + "' (expected matern, sqexp or sphere)");
}

double KernelParams::sill() const { return std::pow(10.0, alpha); }
double KernelParams::nugget() const { return tau ? std::pow(10.0, *tau) : 0.0; }

void KernelParams::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(ell) || !std::isfinite(nu) || (tau && !std::isfinite(*tau)))
    throw InvalidArgument("kernel parameters must be finite");
  if (ell <= 0.0) throw InvalidArgument("kernel range ell must be positive");
  if (nu <= 0.0) throw InvalidArgument("kernel smoothness nu must be positive");
  if (!(sill() > 0.0) || !std::isfinite(sill())) throw InvalidArgument("sill 10^alpha out of floating-point range");
  if (tau && (!(nugget() > 0.0) || !std::isfinite(nugget())))
    throw InvalidArgument("nugget 10^tau out of floating-point range");
}

KernelSpec::KernelSpec(Family family, KernelParams params)
    : family_(family), params_(params), sill_(0), nugget_(0), scale_(0), log_norm_(0), half_integer_(-1) {
  params_.validate();
  sill_ = params_.sill();
  nugget_ = params_.nugget();
  if (family_ == Family::SquaredExponential) {
    scale_ = 1.0 / (2.0 * params_.ell * params_.ell);
    return;
  }
  const double nu = params_.nu;
  scale_ = std::sqrt(2.0 * nu) / params_.ell;
  log_norm_ = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu);
  const double p = nu - 0.5;
  if (p >= 0.0 && p == std::floor(p) && p <= kMaxClosedForm) half_integer_ = static_cast<int>(p);
}

double KernelSpec::distance(SiteView x, SiteView y) const {
  if (x.size() != y.size()) throw InvalidArgument("kernel: site dimensions differ");
  if (family_ == Family::SphereMatern) return chordal_distance(x, y);
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double KernelSpec::matern_correlation(double t) const {
  if (t == 0.0) return 1.0;
  if (half_integer_ >= 0) {
    // exp(-t) p!/(2p)! sum_i (p+i)!/(i!(p-i)!) (2t)^(p-i). The constant term
    // (i = p) is 1; c_{i-1} = c_i i / ((p+i)(p-i+1)).
    const int p = half_integer_;
    double c[kMaxClosedForm + 1];
    c[p] = 1.0;
    for (int i = p; i >= 1; --i) c[i - 1] = c[i] * i / (static_cast<double>(p + i) * (p - i + 1));
    const double u = 2.0 * t;
    double poly = c[0];
    for (int i = 1; i <= p; ++i) poly = poly * u + c[i];
    return std::exp(-t) * poly;
  }
  const double nu = params_.nu;
  double log_k = std::numeric_limits<double>::quiet_NaN();
  double k = std::numeric_limits<double>::infinity();
  try {
    k = std::cyl_bessel_k(nu, t);
  } catch (const std::exception&) {
  }
  if (std::isfinite(k) && k > 0.0 && k >= std::numeric_limits<double>::min()) {
    log_k = std::log(k);
  } else if (nu >= 10.0) {
    log_k = log_bessel_k_debye(nu, t);
  } else if (k == 0.0 || (std::isfinite(k) && k < std::numeric_limits<double>::min())) {
    return 0.0;
  }
  if (!std::isfinite(log_k))
    throw NumericalError("Matern: Bessel K_nu overflows at nu = " + std::to_string(nu) +
                         "; use the SquaredExponential family for very smooth fields");
  return std::exp(log_norm_ + nu * std::log(t) + log_k);
}

double KernelSpec::at_distance(double r) const {
  if (family_ == Family::SquaredExponential) return sill_ * std::exp(-r * r * scale_);
  return sill_ * matern_correlation(scale_ * r);
}

double KernelSpec::operator()(SiteView x, SiteView y) const {
  const double v = at_distance(distance(x, y));
  return nugget_ != 0.0 && bitwise_equal(x, y) ? v + nugget_ : v;
}

double kernel_eval(const KernelSpec& spec, SiteView x, SiteView y) { return spec(x, y); }

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, PointsView X, PointsView Y, Exec exec) {
  if (X.dim != Y.dim) throw InvalidArgument("kernel_matrix: site dimensions differ");
  Eigen::MatrixXd K(X.size(), Y.size());
  parallel_for(Y.size(), exec, [&](int j) {
    for (int i = 0; i < X.size(); ++i) K(i, j) = spec(X[i], Y[j]);
  });
  return K;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, PointsView X, Exec exec) {
  const int n = X.size();
  Eigen::MatrixXd K(n, n);
  parallel_for(n, exec, [&](int j) {
    for (int i = 0; i <= j; ++i) K(i, j) = spec(X[i], X[j]);
  });
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) K(i, j) = K(j, i);
  return K;
}

Eigen::VectorXd kernel_column(const KernelSpec& spec, PointsView X, SiteView x) {
  Eigen::VectorXd v(X.size());
  for (int i = 0; i < X.size(); ++i) v(i) = spec(X[i], x);
  return v;
}

double chordal_distance(SiteView x, SiteView y) {
  if (x.size() != 2 || y.size() != 2) throw InvalidArgument("chordal_distance: sites must be (lat, lon) pairs");
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (std::abs(x[0]) > half_pi || std::abs(y[0]) > half_pi)
    throw InvalidArgument("chordal_distance: latitude outside [-pi/2, pi/2]");
  const double a = std::sin(0.5 * (x[0] - y[0]));
  const double b = std::sin(0.5 * (x[1] - y[1]));
  const double s = a * a + std::cos(x[0]) * std::cos(y[0]) * b * b;
  return std::min(2.0, 2.0 * std::sqrt(s));
}

bool bitwise_equal(SiteView x, SiteView y) {
  if (x.size() != y.size()) return false;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (std::bit_cast<std::uint64_t>(x[k]) != std::bit_cast<std::uint64_t>(y[k])) return false;
  return true;
}

}  // namespace rlcov
