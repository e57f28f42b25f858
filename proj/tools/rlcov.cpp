// Command-line front end: partition, simulate, krige, loglik, mle, slice, bench.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rlcov/error.hpp"
#include "rlcov/estimate.hpp"
#include "rlcov/grf.hpp"
#include "rlcov/hcov.hpp"
#include "rlcov/io.hpp"
#include "rlcov/partition.hpp"
#include "rlcov/rlr.hpp"

using namespace rlcov;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Config {
  // kernel
  std::string kernel = "matern";
  double alpha = 0.0;
  double ell = 0.2;
  double nu = 2.5;
  std::optional<double> tau;
  // tree
  int rank = 125;
  std::string landmarks = "grid";
  std::string tree_path;
  // run
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  // data
  std::string sites;
  std::string targets;
  std::string holdout;
  std::vector<int> grid;
  std::vector<double> domain{0.0, 1.0, 0.0, 1.0};
  std::string field = "gp";
  double noise = 0.0;
  int replicates = 1;
  double mean = 0.0;
  // factors
  std::string save_factors;
  std::string load_factors;
  // krige
  bool sort_by_variance = false;
  // mle
  std::vector<std::string> free{"alpha", "ell", "nu"};
  int max_evals = 1500;
  bool nu_sweep = false;
  // slice
  std::string row_axis = "alpha";
  std::string col_axis = "ell";
  std::vector<double> rows{-0.5, 0.5, 5};
  std::vector<double> cols{0.1, 0.3, 5};
  // bench
  std::vector<int> sizes{1 << 12, 1 << 13};
  int reps = 5;
  int krige_sites = 1000;
};

KernelSpec make_spec(const Config& c) {
  return KernelSpec(parse_family(c.kernel), {c.alpha, c.ell, c.nu, c.tau});
}

KernelParams make_params(const Config& c) { return {c.alpha, c.ell, c.nu, c.tau}; }

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw InvalidArgument("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

FieldData load_sites(const Config& c) {
  if (c.sites.empty()) throw InvalidArgument("--sites is required");
  return read_sites_csv(c.sites);
}

std::shared_ptr<const PartitionTree> make_tree(const Config& c, const PointSet& sites) {
  if (!c.tree_path.empty()) {
    std::ifstream in(c.tree_path);
    if (!in) throw InvalidArgument("cannot open tree file '" + c.tree_path + "'");
    auto tree = std::make_shared<const PartitionTree>(read_tree(in));
    if (tree->n() != sites.size()) throw InvalidArgument("tree file does not match the sites");
    for (int i = 0; i < sites.size(); ++i)
      if (!bitwise_equal(tree->sites()[tree->perm()[i]], sites[i]))
        throw InvalidArgument("tree file does not match the sites");
    return tree;
  }
  return std::make_shared<const PartitionTree>(
      build_tree(sites, c.rank, parse_landmark_strategy(c.landmarks), c.seed));
}

RLRMatrix read_factors(const std::string& path, const PartitionTree& tree) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open factor file '" + path + "'");
  RLRMatrix m = load_factors(in);
  if (!m.topology().same_shape(*tree.topology())) throw InvalidArgument("factor file was built on another tree");
  return m;
}

void write_factors(const std::string& path, const RLRMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open factor file '" + path + "'");
  save_factors(out, m);
}

// Inclusive grid with nx points along x1 and ny along x2.
PointSet grid_sites(const Config& c) {
  if (c.grid.size() != 2 || c.grid[0] < 1 || c.grid[1] < 1) throw InvalidArgument("--grid needs two positive counts");
  if (c.domain.size() != 4) throw InvalidArgument("--domain needs x1lo,x1hi,x2lo,x2hi");
  const std::vector<double> xs = linspace(c.domain[0], c.domain[1], c.grid[0]);
  const std::vector<double> ys = linspace(c.domain[2], c.domain[3], c.grid[1]);
  PointSet X(2);
  X.reserve(c.grid[0] * c.grid[1]);
  for (double y : ys)
    for (double x : xs) X.push_back(std::vector<double>{x, y});
  return X;
}

// Smooth test surface on the unit square.
double test_function(SiteView x) {
  return std::exp(1.4 * x[0]) * std::cos(3.5 * std::numbers::pi * x[0]) *
         (std::sin(2.0 * std::numbers::pi * x[1]) + 0.2 * std::sin(8.0 * std::numbers::pi * x[1]));
}

// A seeded random half of [0, n): the first n/2 entries of a shuffle.
std::vector<int> random_half(int n, std::uint64_t seed) {
  const Eigen::VectorXd key = standard_normals(seed ^ 0x5a17ULL, n);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return key[a] < key[b]; });
  idx.resize(n / 2);
  std::sort(idx.begin(), idx.end());
  return idx;
}

int cmd_partition(const Config& c) {
  const FieldData data = load_sites(c);
  const auto tree = make_tree(c, data.sites);
  Output out(c.out);
  write_tree(out.stream(), *tree);
  return 0;
}

int cmd_simulate(const Config& c) {
  PointSet sites;
  if (!c.grid.empty())
    sites = grid_sites(c);
  else
    sites = load_sites(c).sites;
  const int n = sites.size();
  if (c.replicates < 1) throw InvalidArgument("--replicates must be at least 1");

  Eigen::MatrixXd values(n, c.replicates);
  if (c.field == "gp") {
    const auto tree = make_tree(c, sites);
    const auto h = build_hcov(make_spec(c), tree);
    const RLRMatrix G = c.load_factors.empty() ? cholesky_like(h->Kh()) : read_factors(c.load_factors, *tree);
    if (!c.save_factors.empty()) write_factors(c.save_factors, G);
    for (int j = 0; j < c.replicates; ++j)
      values.col(j) = sample_with(*h, G, standard_normals(c.seed, n, static_cast<std::uint64_t>(j) * n), c.mean);
  } else if (c.field == "testfn") {
    if (sites.dim() != 2) throw InvalidArgument("the test function needs two-dimensional sites");
    for (int j = 0; j < c.replicates; ++j) {
      const Eigen::VectorXd eps = standard_normals(c.seed, n, static_cast<std::uint64_t>(j) * n);
      for (int i = 0; i < n; ++i) values(i, j) = c.mean + test_function(sites[i]) + c.noise * eps[i];
    }
  } else {
    throw InvalidArgument("--field must be gp or testfn");
  }

  if (c.holdout.empty()) {
    Output out(c.out);
    write_sites_csv(out.stream(), sites, values);
    return 0;
  }
  const std::vector<int> keep = random_half(n, c.seed);
  std::vector<char> in_keep(n, 0);
  for (int i : keep) in_keep[i] = 1;
  PointSet a(2), b(2);
  Eigen::MatrixXd va(keep.size(), c.replicates), vb(n - keep.size(), c.replicates);
  for (int i = 0, ia = 0, ib = 0; i < n; ++i) {
    if (in_keep[i]) {
      a.push_back(sites[i]);
      va.row(ia++) = values.row(i);
    } else {
      b.push_back(sites[i]);
      vb.row(ib++) = values.row(i);
    }
  }
  Output out(c.out);
  write_sites_csv(out.stream(), a, va);
  std::ofstream hold(c.holdout, std::ios::binary);
  if (!hold) throw InvalidArgument("cannot open holdout file '" + c.holdout + "'");
  write_sites_csv(hold, b, vb);
  return 0;
}

int cmd_krige(const Config& c) {
  FieldData data = load_sites(c);
  if (data.replicates() < 1) throw InvalidArgument("the sites file has no value column");
  data.mean = c.mean;
  if (c.targets.empty()) throw InvalidArgument("--targets is required");
  const PointSet targets = read_sites_csv(c.targets).sites;
  const auto tree = make_tree(c, data.sites);
  const auto h = build_hcov(make_spec(c), tree);

  KrigeWorkspace work;
  if (c.load_factors.empty()) {
    work = krige_prepare(h, data);
  } else {
    // Reuse a stored K_h^{-1}: rebuild only the caches that depend on z.
    auto inv = std::make_shared<const RLRMatrix>(read_factors(c.load_factors, *tree));
    work.h = h;
    work.mean = data.mean;
    work.inverse = inv;
    const Eigen::VectorXd z = values_in_tree_order(*tree, data).col(0).array() - data.mean;
    work.weights = matvec(*inv, z);
    work.inner = inner_preprocess(h, work.weights);
    work.quad = quad_preprocess(h, inv);
  }
  if (!c.save_factors.empty()) write_factors(c.save_factors, *work.inverse);

  std::vector<KrigeResult> res = krige(work, targets.view());
  std::vector<int> order(res.size());
  std::iota(order.begin(), order.end(), 0);
  if (c.sort_by_variance)
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return res[a].var0 < res[b].var0; });
  PointSet sorted(targets.dim());
  std::vector<KrigeResult> sorted_res;
  for (int k : order) {
    sorted.push_back(targets[k]);
    sorted_res.push_back(res[k]);
  }
  Output out(c.out);
  write_predictions_csv(out.stream(), sorted.view(), sorted_res);
  if (work.clamp_count() > 0)
    std::cerr << "warning: " << work.clamp_count() << " negative kriging variances clamped to zero\n";
  return 0;
}

int cmd_loglik(const Config& c) {
  FieldData data = load_sites(c);
  if (data.replicates() < 1) throw InvalidArgument("the sites file has no value column");
  data.mean = c.mean;
  const auto tree = make_tree(c, data.sites);
  const auto h = build_hcov(make_spec(c), tree);
  double L;
  if (c.load_factors.empty()) {
    if (!c.save_factors.empty()) write_factors(c.save_factors, invert(h->Kh()).matrix);
    L = loglik_reps(*h, data);
  } else {
    // log det K_h = -log det K_h^{-1}
    const RLRMatrix inv = read_factors(c.load_factors, *tree);
    const LogDet ld = logdet(inv);
    if (ld.sign != 1) throw NumericalError("stored inverse is not positive definite");
    const Eigen::MatrixXd z = values_in_tree_order(*tree, data).array() - data.mean;
    const Eigen::MatrixXd w = matvec(inv, z);
    const double n = data.n();
    L = 0.0;
    for (int j = 0; j < z.cols(); ++j)
      L += -0.5 * z.col(j).dot(w.col(j)) + 0.5 * ld.log_abs - 0.5 * n * std::log(2.0 * std::numbers::pi);
  }
  Output out(c.out);
  out.stream() << format_double(L) << '\n';
  return 0;
}

ParamSpace make_space(const Config& c) {
  ParamSpace s;
  for (const std::string& name : c.free) s.free.push_back(parse_param(name));
  s.fixed = make_params(c);
  if (std::find(s.free.begin(), s.free.end(), Param::Tau) != s.free.end() && !s.fixed.tau) s.fixed.tau = -2.0;
  s.validate();
  return s;
}

int cmd_mle(const Config& c) {
  FieldData data = load_sites(c);
  if (data.replicates() < 1) throw InvalidArgument("the sites file has no value column");
  data.mean = c.mean;
  const auto tree = make_tree(c, data.sites);
  const ParamSpace space = make_space(c);
  FitOptions opts;
  opts.max_evaluations = c.max_evals;
  const Objective L = likelihood_objective(data, parse_family(c.kernel), tree);
  Output out(c.out);
  if (c.nu_sweep) {
    nlohmann::json all = nlohmann::json::array();
    for (const FitResult& r : fit_nu_sweep(L, space, space.fixed, {0.5, 1.0, 1.5, 2.0}, opts)) all.push_back(to_json(r));
    out.stream() << all.dump(2) << '\n';
  } else {
    out.stream() << to_json(fit_mle(L, space, space.fixed, opts)).dump(2) << '\n';
  }
  return 0;
}

std::vector<double> axis_values(const std::vector<double>& spec, const char* flag) {
  if (spec.size() != 3 || spec[2] < 1 || spec[2] != std::floor(spec[2]))
    throw InvalidArgument(std::string(flag) + " needs lo,hi,count");
  return linspace(spec[0], spec[1], static_cast<int>(spec[2]));
}

int cmd_slice(const Config& c) {
  FieldData data = load_sites(c);
  if (data.replicates() < 1) throw InvalidArgument("the sites file has no value column");
  data.mean = c.mean;
  const auto tree = make_tree(c, data.sites);
  KernelParams center = make_params(c);
  const Param row = parse_param(c.row_axis), col = parse_param(c.col_axis);
  if ((row == Param::Tau || col == Param::Tau) && !center.tau) center.tau = -2.0;
  const Objective L = likelihood_objective(data, parse_family(c.kernel), tree);
  const Slice s = loglik_slice(L, center, row, col, axis_values(c.rows, "--rows"), axis_values(c.cols, "--cols"));
  Output out(c.out);
  write_slice_csv(out.stream(), s);
  return 0;
}

template <class F>
double median_seconds(int reps, F&& f) {
  std::vector<double> t;
  for (int k = 0; k < reps; ++k) {
    const auto a = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

int cmd_bench(const Config& c) {
  Output out(c.out);
  std::ostream& os = out.stream();
  os << "n,op,median_seconds\n";
  const KernelSpec spec = make_spec(c);
  for (int n : c.sizes) {
    if (n < c.rank) throw InvalidArgument("--sizes entries must be at least --rank");
    FieldData data;
    data.sites = PointSet(2);
    data.sites.reserve(n);
    const Eigen::VectorXd u = standard_normals(c.seed, 2 * n);
    for (int i = 0; i < n; ++i)
      data.sites.push_back(std::vector<double>{0.5 + 0.5 * std::erf(u[2 * i] / std::sqrt(2.0)),
                                               0.5 + 0.5 * std::erf(u[2 * i + 1] / std::sqrt(2.0))});
    data.values = standard_normals(c.seed + 1, n);
    const auto tree = std::make_shared<const PartitionTree>(
        build_tree(data.sites, c.rank, parse_landmark_strategy(c.landmarks), c.seed));
    // One log-likelihood evaluation as done inside the optimizer.
    const double t_loglik = median_seconds(c.reps, [&] {
      const auto h = build_hcov(spec, tree);
      volatile double L = loglik(*h, data);
      (void)L;
    });
    os << n << ",loglik," << format_double(t_loglik) << '\n';

    const auto h = build_hcov(spec, tree);
    const KrigeWorkspace work = krige_prepare(h, data);
    const Eigen::VectorXd v = standard_normals(c.seed + 2, 2 * c.krige_sites);
    PointSet targets(2);
    for (int i = 0; i < c.krige_sites; ++i)
      targets.push_back(std::vector<double>{0.5 + 0.5 * std::erf(v[2 * i] / std::sqrt(2.0)),
                                            0.5 + 0.5 * std::erf(v[2 * i + 1] / std::sqrt(2.0))});
    const double t_krige = median_seconds(c.reps, [&] { krige(work, targets.view()); });
    os << n << ",krige_per_site," << format_double(t_krige / c.krige_sites) << '\n';
    os.flush();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Config c;
  CLI::App app{"Hierarchical low-rank covariance: simulation, likelihood, estimation and kriging"};
  app.set_config("--config", "", "Read options from a key = value file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.fallthrough();

  app.add_option("--kernel", c.kernel, "matern, sqexp or sphere")->capture_default_str();
  app.add_option("--alpha", c.alpha, "log10 of the sill")->capture_default_str();
  app.add_option("--ell", c.ell, "range")->capture_default_str();
  app.add_option("--nu", c.nu, "smoothness")->capture_default_str();
  app.add_option("--tau", c.tau, "log10 of the nugget (none when absent)");
  app.add_option("--rank", c.rank, "landmarks per nonleaf node")->capture_default_str();
  app.add_option("--landmarks", c.landmarks, "grid, uniform or subsample")->capture_default_str();
  app.add_option("--tree", c.tree_path, "read the partition from this file instead of building it");
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--threads", c.threads, "thread cap; 1 gives bitwise-reproducible output");
  app.add_option("--out", c.out, "output file (default stdout)");
  app.add_option("--sites", c.sites, "sites CSV, with values where the command needs them");
  app.add_option("--targets", c.targets, "prediction sites CSV");
  app.add_option("--holdout", c.holdout, "simulate: write a random half of the sites here");
  app.add_option("--grid", c.grid, "simulate: grid counts nx,ny instead of --sites")->delimiter(',');
  app.add_option("--domain", c.domain, "simulate: x1lo,x1hi,x2lo,x2hi for --grid")->delimiter(',');
  app.add_option("--field", c.field, "simulate: gp or testfn")->capture_default_str();
  app.add_option("--noise", c.noise, "simulate: noise sd added to the test function")->capture_default_str();
  app.add_option("--replicates", c.replicates, "simulate: independent realizations")->capture_default_str();
  app.add_option("--mean", c.mean, "constant field mean")->capture_default_str();
  app.add_option("--save-factors", c.save_factors, "write G (simulate) or K_h^-1 (krige, loglik)");
  app.add_option("--load-factors", c.load_factors, "reuse factors written by --save-factors");
  app.add_flag("--sort-by-variance", c.sort_by_variance, "krige: order predictions by variance");
  app.add_option("--free", c.free, "mle: parameters to optimize")->delimiter(',');
  app.add_option("--max-evals", c.max_evals, "mle: evaluation budget")->capture_default_str();
  app.add_flag("--nu-sweep", c.nu_sweep, "mle: fit with nu fixed at 0.5, 1, 1.5, 2");
  app.add_option("--row-axis", c.row_axis, "slice: parameter along rows")->capture_default_str();
  app.add_option("--col-axis", c.col_axis, "slice: parameter along columns")->capture_default_str();
  app.add_option("--rows", c.rows, "slice: lo,hi,count")->delimiter(',');
  app.add_option("--cols", c.cols, "slice: lo,hi,count")->delimiter(',');
  app.add_option("--sizes", c.sizes, "bench: site counts")->delimiter(',');
  app.add_option("--reps", c.reps, "bench: repetitions per timing")->capture_default_str();
  app.add_option("--krige-sites", c.krige_sites, "bench: prediction sites")->capture_default_str();

  int (*command)(const Config&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Config&)) {
    app.add_subcommand(name, help)->callback([&command, fn] { command = fn; });
  };
  sub("partition", "build the partitioning tree and write it", cmd_partition);
  sub("simulate", "draw a field on sites or a grid", cmd_simulate);
  sub("krige", "predict at target sites", cmd_krige);
  sub("loglik", "log-likelihood of the data", cmd_loglik);
  sub("mle", "maximum-likelihood estimation", cmd_mle);
  sub("slice", "log-likelihood on a two-parameter grid", cmd_slice);
  sub("bench", "time log-likelihood and kriging", cmd_bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (c.threads < 0) throw InvalidArgument("--threads must be positive");
    if (c.threads > 0) set_num_threads(c.threads);
    return command(c);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  }
}
