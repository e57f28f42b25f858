#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "rlcov/estimate.hpp"
#include "support.hpp"

using namespace rlcov;

namespace {

// Concave quadratic with its maximum at alpha = 0.3, ell = 0.5.
double quadratic(const KernelParams& t) {
  return 1.0 - (t.alpha - 0.3) * (t.alpha - 0.3) - 10.0 * (t.ell - 0.5) * (t.ell - 0.5) - 0.5 * (t.alpha - 0.3) * (t.ell - 0.5);
}

ParamSpace alpha_ell() {
  ParamSpace s;
  s.free = {Param::Alpha, Param::Ell};
  s.fixed = {0.0, 1.0, 1.5, std::nullopt};
  return s;
}

}  // namespace

TEST_CASE("parameter names") {
  for (Param p : {Param::Alpha, Param::Ell, Param::Nu, Param::Tau}) CHECK(parse_param(to_string(p)) == p);
  CHECK_THROWS_AS(parse_param("sigma"), InvalidArgument);
  KernelParams t;
  CHECK_THROWS_AS(get_param(t, Param::Tau), InvalidArgument);
  set_param(t, Param::Tau, -3.0);
  CHECK(get_param(t, Param::Tau) == -3.0);
}

TEST_CASE("parameter space validation") {
  ParamSpace s;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.free = {Param::Alpha, Param::Alpha};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.free = {Param::Ell};
  s.bound(Param::Ell) = {-1.0, 1.0};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("Nelder-Mead finds the maximum of a quadratic") {
  const FitResult r = fit_mle(quadratic, alpha_ell(), {0.0, 1.0, 1.5, std::nullopt});
  CHECK(r.converged);
  CHECK(r.theta_hat.alpha == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(r.theta_hat.ell == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(r.theta_hat.nu == 1.5);
  CHECK(r.loglik_at_opt == quadratic(r.theta_hat));
  CHECK(r.evaluations == static_cast<int>(r.trace.size()));
  // Information matrix [[2, 0.5], [0.5, 20]]; its inverse has diagonal
  // 20 / 39.75 and 2 / 39.75.
  REQUIRE(r.std_errors.size() == 2);
  CHECK(r.std_errors[0] == doctest::Approx(std::sqrt(20.0 / 39.75)).epsilon(1e-6));
  CHECK(r.std_errors[1] == doctest::Approx(std::sqrt(2.0 / 39.75)).epsilon(1e-6));
}

TEST_CASE("failed evaluations are recorded and avoided") {
  auto L = [](const KernelParams& t) {
    if (t.ell > 0.8) throw NumericalError("refused");
    return quadratic(t);
  };
  const FitResult r = fit_mle(L, alpha_ell(), {0.0, 0.6, 1.5, std::nullopt});
  CHECK(r.theta_hat.ell == doctest::Approx(0.5).epsilon(1e-3));
  bool saw_failure = false;
  for (const TraceEntry& e : r.trace)
    if (e.loglik == -std::numeric_limits<double>::infinity()) saw_failure = true;
  CHECK(saw_failure);
}

TEST_CASE("fit_mle needs a valid start") {
  auto bad = [](const KernelParams&) -> double { throw NumericalError("no"); };
  CHECK_THROWS_AS(fit_mle(bad, alpha_ell(), {0.0, 1.0, 1.5, std::nullopt}), NumericalError);
  CHECK_THROWS_AS(fit_mle(quadratic, alpha_ell(), {5.0, 1.0, 1.5, std::nullopt}), InvalidArgument);
}

TEST_CASE("the evaluation budget is respected") {
  FitOptions o;
  o.max_evaluations = 20;
  o.standard_errors = false;
  const FitResult r = fit_mle(quadratic, alpha_ell(), {0.0, 1.0, 1.5, std::nullopt}, o);
  CHECK_FALSE(r.converged);
  CHECK(r.evaluations <= 20 + 4);
}

TEST_CASE("a boundary optimum reports why standard errors are missing") {
  auto L = [](const KernelParams& t) { return t.alpha; };
  ParamSpace s;
  s.free = {Param::Alpha};
  const FitResult r = fit_mle(L, s, {0.0, 1.0, 1.5, std::nullopt});
  CHECK(r.theta_hat.alpha > 2.9);
  CHECK(r.std_errors.empty());
  CHECK_FALSE(r.se_error.empty());
}

TEST_CASE("single-site likelihood has a closed-form optimum") {
  // L(alpha) = -z^2 10^-alpha / 2 - alpha ln(10) / 2 - ln(2 pi) / 2 peaks at
  // 10^alpha = z^2 with standard error sqrt(2) / ln(10).
  FieldData d;
  d.sites = PointSet(2, {0.5, 0.5});
  d.values = Eigen::VectorXd::Constant(1, 1.7);
  const auto tree = testing::make_tree(d.sites, 1);
  ParamSpace s;
  s.free = {Param::Alpha};
  FitOptions o;
  o.x_tol = 1e-7;
  o.f_tol = 1e-12;
  const FitResult r = fit_mle(d, Family::Matern, tree, s, {0.0, 1.0, 1.5, std::nullopt}, o);
  CHECK(r.theta_hat.alpha == doctest::Approx(2.0 * std::log10(1.7)).epsilon(1e-5));
  const double expect = -0.5 - std::log(1.7) - 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(r.loglik_at_opt == doctest::Approx(expect).epsilon(1e-10));
  REQUIRE(r.std_errors.size() == 1);
  CHECK(r.std_errors[0] == doctest::Approx(std::sqrt(2.0) / std::log(10.0)).epsilon(1e-5));
}

TEST_CASE("nu sweep fixes nu per fit") {
  ParamSpace s = alpha_ell();
  s.free.push_back(Param::Nu);
  FitOptions o;
  o.standard_errors = false;
  const auto fits = fit_nu_sweep(quadratic, s, {0.0, 1.0, 1.5, std::nullopt}, {0.5, 1.0, 2.0}, o);
  REQUIRE(fits.size() == 3);
  CHECK(fits[0].theta_hat.nu == 0.5);
  CHECK(fits[2].theta_hat.nu == 2.0);
  CHECK(fits[1].free.size() == 2);
}

TEST_CASE("log-likelihood slice") {
  auto L = [](const KernelParams& t) {
    if (t.alpha > 0.55) throw NumericalError("refused");
    return quadratic(t);
  };
  const Slice s = loglik_slice(L, {0.0, 1.0, 1.5, std::nullopt}, Param::Alpha, Param::Ell, linspace(0.1, 0.6, 3),
                               linspace(0.4, 0.6, 5));
  CHECK(s.L(0, 1) == quadratic({0.1, 0.45, 1.5, std::nullopt}));
  CHECK(std::isnan(s.L(2, 0)));
  std::ostringstream out;
  write_slice_csv(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "alpha,ell");
  std::getline(in, line);
  CHECK(line == ",0.40000000000000002,0.45000000000000001,0.5,0.55000000000000004,0.59999999999999998");
  std::getline(in, line);
  CHECK(line.rfind("0.10000000000000001,", 0) == 0);
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line.find("nan") != std::string::npos);
  CHECK_THROWS_AS(loglik_slice(L, {}, Param::Nu, Param::Nu, {1.0}, {1.0}), InvalidArgument);
}

TEST_CASE("linspace") {
  CHECK(linspace(0.0, 1.0, 5) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(linspace(2.0, 3.0, 1) == std::vector<double>{2.0});
  CHECK_THROWS_AS(linspace(0.0, 1.0, 0), InvalidArgument);
}
