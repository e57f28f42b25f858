#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rlcov/error.hpp"

namespace rlcov {

/// Coordinates of one site. For the sphere kernel a site is (lat, lon) in radians.
using Site = std::vector<double>;
using SiteView = std::span<const double>;

/// A read-only window onto `count` consecutive points of dimension `dim`,
/// stored row by row.
struct PointsView {
  const double* data = nullptr;
  int count = 0;
  int dim = 0;

  SiteView operator[](int i) const { return {data + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  int size() const { return count; }
  bool empty() const { return count == 0; }
};

/// Owning list of points with contiguous row-major storage.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(int dim) : dim_(dim) {}
  PointSet(int dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ <= 0 || coords_.size() % static_cast<std::size_t>(dim_) != 0)
      throw InvalidArgument("PointSet: coordinate count is not a multiple of the dimension");
  }

  int dim() const { return dim_; }
  int size() const { return dim_ == 0 ? 0 : static_cast<int>(coords_.size() / dim_); }
  bool empty() const { return coords_.empty(); }

  SiteView operator[](int i) const {
    return {coords_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<double> mutable_point(int i) {
    return {coords_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }

  void push_back(SiteView x) {
    if (dim_ == 0) dim_ = static_cast<int>(x.size());
    if (static_cast<int>(x.size()) != dim_) throw InvalidArgument("PointSet: dimension mismatch");
    coords_.insert(coords_.end(), x.begin(), x.end());
  }
  void reserve(int n) { coords_.reserve(static_cast<std::size_t>(n) * (dim_ > 0 ? dim_ : 1)); }

  PointsView view() const { return {coords_.data(), size(), dim_}; }
  PointsView view(int begin, int end) const {
    return {coords_.data() + static_cast<std::size_t>(begin) * dim_, end - begin, dim_};
  }

  const std::vector<double>& coords() const { return coords_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  int dim_ = 0;
  std::vector<double> coords_;
};

}  // namespace rlcov
