#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rlcov/points.hpp"
#include "rlcov/topology.hpp"

namespace rlcov {

struct BoundingBox {
  std::vector<double> lo;
  std::vector<double> hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double side(int k) const { return hi[k] - lo[k]; }
  /// Longest side; ties go to the lowest dimension index.
  int longest_dim() const;
  double diagonal() const;
  bool contains(SiteView x) const;
  bool contains(const BoundingBox& inner) const;
  /// Squared Euclidean distance from x to the box (0 inside).
  double distance_sq(SiteView x) const;

  static BoundingBox of(PointsView points);

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class LandmarkStrategy { RegularGrid, RandomUniform, RandomSubsample };

std::string to_string(LandmarkStrategy s);
LandmarkStrategy parse_landmark_strategy(const std::string& name);

struct PartitionNode {
  int id = 0;
  int parent = -1;
  std::vector<int> children;
  int begin = 0;  // range [begin, end) in tree order
  int end = 0;
  BoundingBox box;
  PointSet landmarks;  // exactly `rank` points for nonleaf nodes, empty for leaves

  bool is_leaf() const { return children.empty(); }
  int count() const { return end - begin; }

  friend bool operator==(const PartitionNode&, const PartitionNode&) = default;
};

/// Hierarchical k-d style partitioning of a site set together with landmark
/// points for every nonleaf node. Sites are stored permuted into tree order so
/// that every node owns a contiguous index range.
class PartitionTree {
 public:
  PartitionTree(std::vector<PartitionNode> nodes, std::vector<int> perm, PointSet sites, int rank);

  const std::vector<PartitionNode>& nodes() const { return nodes_; }
  const PartitionNode& node(int i) const { return nodes_[i]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int n() const { return sites_.size(); }
  int dim() const { return sites_.dim(); }
  int rank() const { return rank_; }
  int height() const { return topology_->height(); }

  /// perm()[original index] = position in tree order.
  const std::vector<int>& perm() const { return perm_; }
  /// order()[position] = original index; the inverse of perm().
  const std::vector<int>& order() const { return order_; }
  /// Sites in tree order.
  const PointSet& sites() const { return sites_; }
  const std::shared_ptr<const Topology>& topology() const { return topology_; }

  /// Tree-order position of a site bitwise equal to x, or -1.
  int find_site(SiteView x) const;
  /// Leaf owning x: the leaf of the matching site when x is a site, otherwise
  /// descend from the root into the child box containing x (closest box when
  /// none contains it, ties to the lower id).
  int locate_leaf(SiteView x) const;
  /// Leaf whose range holds tree-order position `pos`.
  int leaf_of_position(int pos) const { return leaf_of_pos_[pos]; }

  /// Reorders original-order values into tree order and back.
  template <class Vec>
  Vec to_tree_order(const Vec& v) const {
    Vec out(v.size());
    for (int i = 0; i < static_cast<int>(perm_.size()); ++i) out[perm_[i]] = v[i];
    return out;
  }
  template <class Vec>
  Vec to_original_order(const Vec& v) const {
    Vec out(v.size());
    for (int i = 0; i < static_cast<int>(perm_.size()); ++i) out[i] = v[perm_[i]];
    return out;
  }

  friend bool operator==(const PartitionTree& a, const PartitionTree& b) {
    return a.rank_ == b.rank_ && a.nodes_ == b.nodes_ && a.perm_ == b.perm_ && a.sites_ == b.sites_;
  }

 private:
  std::vector<PartitionNode> nodes_;
  std::vector<int> perm_;
  std::vector<int> order_;
  PointSet sites_;
  int rank_;
  std::shared_ptr<const Topology> topology_;
  std::vector<int> leaf_of_pos_;
  std::vector<std::pair<std::size_t, int>> site_index_;  // (hash, position), sorted
};

/// Builds the tree by recursive median splits along the longest side of the
/// node box until a node holds fewer than 2*rank sites. Throws on n < rank or
/// duplicate sites.
PartitionTree build_tree(const PointSet& X, int rank, LandmarkStrategy strategy = LandmarkStrategy::RegularGrid,
                         std::uint64_t seed = 0);

/// Exactly r distinct landmark points inside `box`.
///
/// RegularGrid picks per-dimension counts proportional to the box sides with
/// product >= r, places points at cell centers and keeps the r closest to the
/// box center. RandomUniform draws uniformly in the box. RandomSubsample draws
/// r distinct sites from `sites_in_box`. Grid and uniform landmarks within 1/8
/// of a landmark cell side of a site move a quarter cell diagonally. Any
/// landmark still bitwise equal to a site is nudged by 1e-9 of the box diagonal.
PointSet place_landmarks(const BoundingBox& box, int r, LandmarkStrategy strategy, std::uint64_t seed,
                         PointsView sites_in_box);

/// Line-oriented text serialization with 17 significant digits.
void write_tree(std::ostream& out, const PartitionTree& tree);
PartitionTree read_tree(std::istream& in);

}  // namespace rlcov
