#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "rlcov/estimate.hpp"
#include "rlcov/grf.hpp"
#include "rlcov/points.hpp"

namespace rlcov {

/// 17 significant digits, enough to read back the same double.
std::string format_double(double v);

/// Sites CSV: header `x1,...,xd[,value[,value2,...]]`, one row per site.
/// Columns named x<k> are coordinates, every other column is a replicate.
FieldData read_sites_csv(std::istream& in);
FieldData read_sites_csv(const std::string& path);
void write_sites_csv(std::ostream& out, const PointSet& sites, const Eigen::MatrixXd& values);

/// Predictions CSV: `x1,...,xd,mu,var`.
void write_predictions_csv(std::ostream& out, PointsView sites, const std::vector<KrigeResult>& results);

nlohmann::json to_json(const KernelParams& p);
nlohmann::json to_json(const FitResult& r);

}  // namespace rlcov
