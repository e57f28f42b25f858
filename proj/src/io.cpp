#include "rlcov/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "rlcov/error.hpp"

namespace rlcov {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw InvalidArgument("sites CSV line " + std::to_string(line) + ": '" + s + "' is not a number");
  return v;
}

bool is_coordinate(const std::string& name) {
  if (name.size() < 2 || name[0] != 'x') return false;
  for (std::size_t k = 1; k < name.size(); ++k)
    if (name[k] < '0' || name[k] > '9') return false;
  return true;
}

}  // namespace

FieldData read_sites_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("sites CSV: missing header");
  const std::vector<std::string> header = split(line);
  std::vector<int> coord_cols, value_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c)
    (is_coordinate(header[c]) ? coord_cols : value_cols).push_back(c);
  if (coord_cols.empty()) throw InvalidArgument("sites CSV: header has no x<k> coordinate columns");

  const int d = static_cast<int>(coord_cols.size());
  std::vector<double> coords;
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size())
      throw InvalidArgument("sites CSV line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields");
    for (int c : coord_cols) coords.push_back(parse_number(cells[c], lineno));
    std::vector<double> vals;
    for (int c : value_cols) vals.push_back(parse_number(cells[c], lineno));
    rows.push_back(std::move(vals));
  }
  FieldData data;
  data.sites = PointSet(d, std::move(coords));
  data.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(value_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < value_cols.size(); ++c) data.values(i, c) = rows[i][c];
  return data;
}

FieldData read_sites_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open sites file '" + path + "'");
  return read_sites_csv(in);
}

void write_sites_csv(std::ostream& out, const PointSet& sites, const Eigen::MatrixXd& values) {
  if (values.size() > 0 && values.rows() != sites.size())
    throw InvalidArgument("write_sites_csv: value rows do not match the site count");
  const int d = sites.dim();
  for (int k = 0; k < d; ++k) out << (k ? "," : "") << 'x' << (k + 1);
  for (int c = 0; c < values.cols(); ++c) out << ",value" << (c ? std::to_string(c + 1) : "");
  out << '\n';
  for (int i = 0; i < sites.size(); ++i) {
    for (int k = 0; k < d; ++k) out << (k ? "," : "") << format_double(sites[i][k]);
    for (int c = 0; c < values.cols(); ++c) out << ',' << format_double(values(i, c));
    out << '\n';
  }
}

void write_predictions_csv(std::ostream& out, PointsView sites, const std::vector<KrigeResult>& results) {
  if (static_cast<int>(results.size()) != sites.size())
    throw InvalidArgument("write_predictions_csv: result count does not match the site count");
  for (int k = 0; k < sites.dim; ++k) out << 'x' << (k + 1) << ',';
  out << "mu,var\n";
  for (int i = 0; i < sites.size(); ++i) {
    for (int k = 0; k < sites.dim; ++k) out << format_double(sites[i][k]) << ',';
    out << format_double(results[i].mu0) << ',' << format_double(results[i].var0) << '\n';
  }
}

nlohmann::json to_json(const KernelParams& p) {
  nlohmann::json j;
  j["alpha"] = p.alpha;
  j["ell"] = p.ell;
  j["nu"] = p.nu;
  j["tau"] = p.tau ? nlohmann::json(*p.tau) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const FitResult& r) {
  nlohmann::json j;
  j["theta_hat"] = to_json(r.theta_hat);
  j["loglik"] = r.loglik_at_opt;
  j["converged"] = r.converged;
  j["evaluations"] = r.evaluations;
  nlohmann::json se = nlohmann::json::object();
  for (std::size_t k = 0; k < r.free.size(); ++k)
    se[to_string(r.free[k])] = k < r.std_errors.size() ? nlohmann::json(r.std_errors[k]) : nlohmann::json(nullptr);
  j["std_errors"] = se;
  if (!r.se_error.empty()) j["std_error_failure"] = r.se_error;
  return j;
}

}  // namespace rlcov
