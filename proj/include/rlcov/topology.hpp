#pragma once

#include <memory>
#include <vector>

namespace rlcov {

/// Shape of a partitioning tree with no geometry attached: parent/child links
/// and the index range each node owns in tree order. Node 0 is the root and
/// every child id is larger than its parent id.
class Topology {
 public:
  struct Node {
    int parent = -1;
    std::vector<int> children;
    int begin = 0;
    int end = 0;
    int depth = 0;
  };

  /// `nodes` must satisfy the id ordering above; children ranges must tile the
  /// parent range in order. Throws InvalidArgument otherwise.
  Topology(std::vector<Node> nodes, int rank);

  /// Perfect binary tree over n indices with the given height; leaves split
  /// the range as evenly as possible. Used mostly to build test instances.
  static std::shared_ptr<const Topology> balanced(int n, int rank, int height);

  int size() const { return static_cast<int>(nodes_.size()); }
  int n() const { return nodes_.empty() ? 0 : nodes_[0].end; }
  int rank() const { return rank_; }
  int height() const { return static_cast<int>(levels_.size()) - 1; }

  const Node& node(int i) const { return nodes_[i]; }
  bool is_leaf(int i) const { return nodes_[i].children.empty(); }
  bool is_root(int i) const { return i == 0; }
  int parent(int i) const { return nodes_[i].parent; }
  const std::vector<int>& children(int i) const { return nodes_[i].children; }
  int begin(int i) const { return nodes_[i].begin; }
  int end(int i) const { return nodes_[i].end; }
  int count(int i) const { return nodes_[i].end - nodes_[i].begin; }

  /// Node ids grouped by depth, level 0 holding the root.
  const std::vector<std::vector<int>>& levels() const { return levels_; }
  const std::vector<int>& leaves() const { return leaves_; }

  bool same_shape(const Topology& other) const;

 private:
  std::vector<Node> nodes_;
  int rank_;
  std::vector<std::vector<int>> levels_;
  std::vector<int> leaves_;
};

}  // namespace rlcov
