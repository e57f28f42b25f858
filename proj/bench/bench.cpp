// Serial vs parallel timings of the tree walks.
//   rlcov_bench [n ...]      (default 8192 32768)
// Prints CSV: n,op,serial_seconds,parallel_seconds,threads,identical

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "rlcov/grf.hpp"
#include "rlcov/hcov.hpp"
#include "rlcov/partition.hpp"
#include "rlcov/rlr.hpp"

using namespace rlcov;

namespace {

PointSet uniform_square(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> c(2 * static_cast<std::size_t>(n));
  for (double& v : c) v = u(gen);
  return PointSet(2, std::move(c));
}

double median_time(int reps, const std::function<void()>& f) {
  std::vector<double> t;
  for (int k = 0; k < reps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

// Factor-by-factor bitwise comparison.
bool same_factors(const RLRMatrix& a, const RLRMatrix& b) {
  const Topology& t = a.topology();
  for (int i = 0; i < t.size(); ++i)
    if (a.A(i) != b.A(i) || a.U(i) != b.U(i) || a.V(i) != b.V(i) || a.Sigma(i) != b.Sigma(i) ||
        a.W(i) != b.W(i) || a.Z(i) != b.Z(i))
      return false;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> sizes;
  for (int i = 1; i < argc; ++i) sizes.push_back(std::atoi(argv[i]));
  if (sizes.empty()) sizes = {8192, 32768};
  const int reps = 3;
  const KernelSpec spec(Family::Matern, {0.0, 0.1, 1.5, -2.0});

  std::printf("n,op,serial_seconds,parallel_seconds,threads,identical\n");
  for (int n : sizes) {
    FieldData data{uniform_square(n, 7), Eigen::VectorXd(n)};
    data.values.col(0) = standard_normals(11, n);
    auto tree = std::make_shared<const PartitionTree>(build_tree(data.sites, 125));

    std::shared_ptr<const HCov> hs, hp;
    Inverse is, ip;
    RLRMatrix gs, gp;
    double ls = 0, lp = 0;
    auto row = [&](const char* op, double ts, double tp, bool same) {
      std::printf("%d,%s,%.6f,%.6f,%d,%d\n", n, op, ts, tp, max_threads(), same ? 1 : 0);
    };

    const double bs = median_time(reps, [&] { hs = build_hcov(spec, tree, Exec::Serial); });
    const double bp = median_time(reps, [&] { hp = build_hcov(spec, tree, Exec::Parallel); });
    row("build_hcov", bs, bp, same_factors(hs->Kh(), hp->Kh()));
    const double vs = median_time(reps, [&] { is = invert(hs->Kh(), Exec::Serial); });
    const double vp = median_time(reps, [&] { ip = invert(hs->Kh(), Exec::Parallel); });
    row("invert", vs, vp, same_factors(is.matrix, ip.matrix) && is.logdet.log_abs == ip.logdet.log_abs);
    const double cs = median_time(reps, [&] { gs = cholesky_like(hs->Kh(), Exec::Serial); });
    const double cp = median_time(reps, [&] { gp = cholesky_like(hs->Kh(), Exec::Parallel); });
    row("cholesky_like", cs, cp, same_factors(gs, gp));
    const double ts = median_time(reps, [&] { ls = loglik(*hs, data, Exec::Serial); });
    const double tp = median_time(reps, [&] { lp = loglik(*hs, data, Exec::Parallel); });
    row("loglik", ts, tp, ls == lp);
  }
  return 0;
}
