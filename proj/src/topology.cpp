#include "rlcov/topology.hpp"

#include <functional>
#include <string>

#include "rlcov/error.hpp"

namespace rlcov {

Topology::Topology(std::vector<Node> nodes, int rank) : nodes_(std::move(nodes)), rank_(rank) {
  if (nodes_.empty()) throw InvalidArgument("Topology: no nodes");
  if (rank_ < 1) throw InvalidArgument("Topology: rank must be at least 1");
  if (nodes_[0].parent != -1 || nodes_[0].begin != 0) throw InvalidArgument("Topology: malformed root");
  nodes_[0].depth = 0;
  const int size = static_cast<int>(nodes_.size());
  for (int i = 0; i < size; ++i) {
    Node& nd = nodes_[i];
    if (nd.end < nd.begin) throw InvalidArgument("Topology: negative range at node " + std::to_string(i));
    if (i > 0 && (nd.parent < 0 || nd.parent >= i))
      throw InvalidArgument("Topology: parent id must precede child id at node " + std::to_string(i));
    if (nd.children.empty()) {
      if (nd.end == nd.begin) throw InvalidArgument("Topology: empty leaf " + std::to_string(i));
      leaves_.push_back(i);
      continue;
    }
    if (nd.children.size() < 2) throw InvalidArgument("Topology: nonleaf with one child at node " + std::to_string(i));
    int cursor = nd.begin;
    for (int c : nd.children) {
      if (c <= i || c >= size || nodes_[c].parent != i)
        throw InvalidArgument("Topology: bad child link at node " + std::to_string(i));
      if (nodes_[c].begin != cursor) throw InvalidArgument("Topology: children do not tile node " + std::to_string(i));
      cursor = nodes_[c].end;
      nodes_[c].depth = nd.depth + 1;
    }
    if (cursor != nd.end) throw InvalidArgument("Topology: children do not tile node " + std::to_string(i));
  }
  for (int i = 0; i < size; ++i) {
    const int d = nodes_[i].depth;
    if (static_cast<int>(levels_.size()) <= d) levels_.resize(d + 1);
    levels_[d].push_back(i);
  }
}

std::shared_ptr<const Topology> Topology::balanced(int n, int rank, int height) {
  if (height < 0 || n < (1 << height)) throw InvalidArgument("Topology::balanced: too few indices for the height");
  std::vector<Node> nodes;
  std::function<int(int, int, int, int)> grow = [&](int parent, int begin, int end, int h) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({parent, {}, begin, end, 0});
    if (h > 0) {
      const int mid = begin + (end - begin) / 2;
      const int left = grow(id, begin, mid, h - 1);
      const int right = grow(id, mid, end, h - 1);
      nodes[id].children = {left, right};
    }
    return id;
  };
  grow(-1, 0, n, height);
  return std::make_shared<const Topology>(std::move(nodes), rank);
}

bool Topology::same_shape(const Topology& other) const {
  if (size() != other.size() || rank_ != other.rank_) return false;
  for (int i = 0; i < size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = other.nodes_[i];
    if (a.parent != b.parent || a.children != b.children || a.begin != b.begin || a.end != b.end) return false;
  }
  return true;
}

}  // namespace rlcov
