#include "rlcov/partition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "random.hpp"
#include "rlcov/error.hpp"
#include "rlcov/kernels.hpp"

namespace rlcov {

namespace {

std::size_t hash_site(SiteView x) {
  std::uint64_t h = 0x12345678abcdefULL;
  for (double v : x) h = detail::mix(h ^ std::bit_cast<std::uint64_t>(v));
  return static_cast<std::size_t>(h);
}

bool lex_less(SiteView a, SiteView b) { return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()); }

// Sorted site list used to test whether a landmark hits a site.
class SiteLookup {
 public:
  explicit SiteLookup(const PointSet& sites) : sites_(sites), order_(sites.size()) {
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(), [&](int a, int b) { return lex_less(sites_[a], sites_[b]); });
  }
  const std::vector<int>& order() const { return order_; }
  bool contains(SiteView x) const {
    auto it = std::lower_bound(order_.begin(), order_.end(), x,
                               [&](int a, SiteView v) { return lex_less(sites_[a], v); });
    for (; it != order_.end() && !lex_less(x, sites_[*it]); ++it)
      if (bitwise_equal(sites_[*it], x)) return true;
    return false;
  }

 private:
  const PointSet& sites_;
  std::vector<int> order_;
};

void nudge_off_sites(PointSet& landmarks, const BoundingBox& box, const std::function<bool(SiteView)>& is_site) {
  const int d = box.dim();
  const double step = 1e-9 * std::max(box.diagonal(), std::numeric_limits<double>::min());
  for (int k = 0; k < landmarks.size(); ++k) {
    auto p = landmarks.mutable_point(k);
    for (int attempt = 1; is_site(p); ++attempt) {
      for (int j = 0; j < d; ++j) {
        const double center = 0.5 * (box.lo[j] + box.hi[j]);
        const double dir = p[j] <= center ? 1.0 : -1.0;
        if (box.side(j) > 0.0) p[j] += dir * attempt * step / std::sqrt(static_cast<double>(d));
      }
      if (attempt > 64) throw NumericalError("landmark placement: cannot move a landmark off a site");
    }
  }
}

double nearest_sq(SiteView x, PointsView sites) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sites.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size() && s < best; ++j) {
      const double t = x[j] - sites[i][j];
      s += t * t;
    }
    best = std::min(best, s);
  }
  return best;
}

// A site almost on top of a parent landmark has a Nystrom residual near zero,
// which makes its leaf block singular without a nugget. Landmarks closer than
// 1/8 of the cell side to a site move a quarter cell along the first diagonal
// that clears every site, or the one that gets farthest.
void separate_from_sites(PointSet& landmarks, const BoundingBox& box, const std::vector<double>& cell,
                         PointsView sites) {
  const int d = box.dim();
  double smallest = std::numeric_limits<double>::infinity();
  for (double c : cell)
    if (c > 0.0) smallest = std::min(smallest, c);
  if (!std::isfinite(smallest) || sites.size() == 0) return;
  const double gap_sq = 0.015625 * smallest * smallest;
  std::vector<double> q(d), best(d);
  for (int k = 0; k < landmarks.size(); ++k) {
    auto p = landmarks.mutable_point(k);
    if (nearest_sq(p, sites) >= gap_sq) continue;
    double best_sq = -1.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      for (int j = 0; j < d; ++j) {
        const double step = ((corner >> j) & 1 ? -0.25 : 0.25) * cell[j];
        q[j] = std::clamp(p[j] + step, box.lo[j], box.hi[j]);
      }
      const double s = nearest_sq(q, sites);
      if (s > best_sq) {
        best_sq = s;
        best = q;
      }
      if (s >= gap_sq) break;
    }
    std::copy(best.begin(), best.end(), p.begin());
  }
}

}  // namespace

int BoundingBox::longest_dim() const {
  int best = 0;
  for (int k = 1; k < dim(); ++k)
    if (side(k) > side(best)) best = k;
  return best;
}

double BoundingBox::diagonal() const {
  double s = 0.0;
  for (int k = 0; k < dim(); ++k) s += side(k) * side(k);
  return std::sqrt(s);
}

bool BoundingBox::contains(SiteView x) const {
  for (int k = 0; k < dim(); ++k)
    if (x[k] < lo[k] || x[k] > hi[k]) return false;
  return true;
}

bool BoundingBox::contains(const BoundingBox& inner) const {
  for (int k = 0; k < dim(); ++k)
    if (inner.lo[k] < lo[k] || inner.hi[k] > hi[k]) return false;
  return true;
}

double BoundingBox::distance_sq(SiteView x) const {
  double s = 0.0;
  for (int k = 0; k < dim(); ++k) {
    const double d = x[k] < lo[k] ? lo[k] - x[k] : (x[k] > hi[k] ? x[k] - hi[k] : 0.0);
    s += d * d;
  }
  return s;
}

BoundingBox BoundingBox::of(PointsView points) {
  if (points.empty()) throw InvalidArgument("BoundingBox::of: no points");
  BoundingBox b{std::vector<double>(points[0].begin(), points[0].end()),
                std::vector<double>(points[0].begin(), points[0].end())};
  for (int i = 1; i < points.size(); ++i)
    for (int k = 0; k < points.dim; ++k) {
      b.lo[k] = std::min(b.lo[k], points[i][k]);
      b.hi[k] = std::max(b.hi[k], points[i][k]);
    }
  return b;
}

std::string to_string(LandmarkStrategy s) {
  switch (s) {
    case LandmarkStrategy::RegularGrid: return "grid";
    case LandmarkStrategy::RandomUniform: return "uniform";
    case LandmarkStrategy::RandomSubsample: return "subsample";
  }
  return "?";
}

LandmarkStrategy parse_landmark_strategy(const std::string& name) {
  if (name == "grid" || name == "regular_grid") return LandmarkStrategy::RegularGrid;
  if (name == "uniform" || name == "random_uniform") return LandmarkStrategy::RandomUniform;
  if (name == "subsample" || name == "random_subsample") return LandmarkStrategy::RandomSubsample;
  throw InvalidArgument("unknown landmark strategy '" + name + "' (expected grid, uniform or subsample)");
}

PointSet place_landmarks(const BoundingBox& box, int r, LandmarkStrategy strategy, std::uint64_t seed,
                         PointsView sites_in_box) {
  if (r < 1) throw InvalidArgument("place_landmarks: r must be at least 1");
  const int d = box.dim();
  if (d == 0) throw InvalidArgument("place_landmarks: empty box");
  for (int k = 0; k < d; ++k)
    if (!(box.lo[k] <= box.hi[k])) throw InvalidArgument("place_landmarks: box has lo > hi");
  PointSet out(d);
  out.reserve(r);

  if (strategy == LandmarkStrategy::RegularGrid) {
    int positive = 0;
    double volume = 1.0;
    for (int k = 0; k < d; ++k)
      if (box.side(k) > 0.0) {
        ++positive;
        volume *= box.side(k);
      }
    if (positive == 0 && r > 1) throw InvalidArgument("place_landmarks: a point box holds only one landmark");
    std::vector<long> m(d, 1);
    if (positive > 0) {
      const double s = std::pow(r / volume, 1.0 / positive);
      for (int k = 0; k < d; ++k)
        if (box.side(k) > 0.0) m[k] = std::max(1L, std::lround(s * box.side(k)));
      auto product = [&] {
        long p = 1;
        for (long v : m) p *= v;
        return p;
      };
      while (product() < r) {
        int best = -1;
        for (int k = 0; k < d; ++k)
          if (box.side(k) > 0.0 && (best < 0 || box.side(k) / m[k] > box.side(best) / m[best])) best = k;
        ++m[best];
      }
    }
    long total = 1;
    for (long v : m) total *= v;
    std::vector<double> grid(static_cast<std::size_t>(total) * d);
    std::vector<double> dist(total);
    std::vector<long> digit(d, 0);
    for (long g = 0; g < total; ++g) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double x = box.lo[k] + (digit[k] + 0.5) * box.side(k) / m[k];
        grid[g * d + k] = x;
        const double c = x - 0.5 * (box.lo[k] + box.hi[k]);
        s += c * c;
      }
      dist[g] = s;
      for (int k = d - 1; k >= 0; --k) {
        if (++digit[k] < m[k]) break;
        digit[k] = 0;
      }
    }
    std::vector<long> idx(total);
    std::iota(idx.begin(), idx.end(), 0L);
    std::stable_sort(idx.begin(), idx.end(), [&](long a, long b) { return dist[a] < dist[b]; });
    for (int k = 0; k < r; ++k) out.push_back(SiteView(grid.data() + idx[k] * d, d));
    std::vector<double> cell(d);
    for (int k = 0; k < d; ++k) cell[k] = box.side(k) / m[k];
    separate_from_sites(out, box, cell, sites_in_box);
  } else if (strategy == LandmarkStrategy::RandomUniform) {
    std::uint64_t counter = 0;
    std::vector<double> p(d);
    for (int k = 0; k < r; ++k) {
      for (int j = 0; j < d; ++j) p[j] = box.lo[j] + detail::counter_uniform(seed, counter++) * box.side(j);
      out.push_back(p);
    }
    int positive = 0;
    double volume = 1.0;
    for (int k = 0; k < d; ++k)
      if (box.side(k) > 0.0) {
        ++positive;
        volume *= box.side(k);
      }
    std::vector<double> cell(d, 0.0);
    if (positive > 0)
      for (int k = 0; k < d; ++k)
        if (box.side(k) > 0.0) cell[k] = std::pow(volume / r, 1.0 / positive);
    separate_from_sites(out, box, cell, sites_in_box);
  } else {
    const int m = sites_in_box.size();
    if (m < r) throw InvalidArgument("place_landmarks: fewer sites in the box than landmarks requested");
    std::vector<int> pick(m);
    std::iota(pick.begin(), pick.end(), 0);
    for (int k = 0; k < r; ++k) {
      const int j = k + static_cast<int>(detail::counter_bits(seed, k) % static_cast<std::uint64_t>(m - k));
      std::swap(pick[k], pick[j]);
      out.push_back(sites_in_box[pick[k]]);
    }
  }

  nudge_off_sites(out, box, [&](SiteView x) {
    for (int i = 0; i < sites_in_box.size(); ++i)
      if (bitwise_equal(sites_in_box[i], x)) return true;
    return false;
  });
  return out;
}

PartitionTree::PartitionTree(std::vector<PartitionNode> nodes, std::vector<int> perm, PointSet sites, int rank)
    : nodes_(std::move(nodes)), perm_(std::move(perm)), sites_(std::move(sites)), rank_(rank) {
  const int n = sites_.size();
  if (static_cast<int>(perm_.size()) != n) throw InvalidArgument("PartitionTree: permutation length mismatch");
  order_.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (perm_[i] < 0 || perm_[i] >= n || order_[perm_[i]] != -1)
      throw InvalidArgument("PartitionTree: perm is not a bijection");
    order_[perm_[i]] = i;
  }
  std::vector<Topology::Node> tn(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const PartitionNode& p = nodes_[i];
    if (p.id != static_cast<int>(i)) throw InvalidArgument("PartitionTree: node ids must equal positions");
    tn[i] = {p.parent, p.children, p.begin, p.end, 0};
    if (!p.is_leaf() && p.landmarks.size() != rank_)
      throw InvalidArgument("PartitionTree: nonleaf node " + std::to_string(i) + " needs exactly rank landmarks");
  }
  topology_ = std::make_shared<const Topology>(std::move(tn), rank_);
  if (topology_->n() != n) throw InvalidArgument("PartitionTree: root range does not cover the sites");
  leaf_of_pos_.assign(n, -1);
  for (int l : topology_->leaves())
    for (int k = nodes_[l].begin; k < nodes_[l].end; ++k) leaf_of_pos_[k] = l;
  site_index_.reserve(n);
  for (int k = 0; k < n; ++k) site_index_.emplace_back(hash_site(sites_[k]), k);
  std::sort(site_index_.begin(), site_index_.end());
}

int PartitionTree::find_site(SiteView x) const {
  if (static_cast<int>(x.size()) != dim()) return -1;
  const std::size_t h = hash_site(x);
  auto it = std::lower_bound(site_index_.begin(), site_index_.end(), std::make_pair(h, -1));
  for (; it != site_index_.end() && it->first == h; ++it)
    if (bitwise_equal(sites_[it->second], x)) return it->second;
  return -1;
}

int PartitionTree::locate_leaf(SiteView x) const {
  const int pos = find_site(x);
  if (pos >= 0) return leaf_of_pos_[pos];
  int i = 0;
  while (!nodes_[i].is_leaf()) {
    int pick = -1;
    for (int c : nodes_[i].children)
      if (nodes_[c].box.contains(x)) {
        pick = c;
        break;
      }
    if (pick < 0) {
      double best = std::numeric_limits<double>::infinity();
      for (int c : nodes_[i].children) {
        const double d = nodes_[c].box.distance_sq(x);
        if (d < best) {
          best = d;
          pick = c;
        }
      }
    }
    i = pick;
  }
  return i;
}

PartitionTree build_tree(const PointSet& X, int rank, LandmarkStrategy strategy, std::uint64_t seed) {
  const int n = X.size();
  const int d = X.dim();
  if (rank < 1) throw InvalidArgument("build_tree: rank must be at least 1");
  if (n < rank) throw InvalidArgument("build_tree: fewer sites than the rank");
  for (double v : X.coords())
    if (!std::isfinite(v)) throw InvalidArgument("build_tree: site coordinates must be finite");

  SiteLookup lookup(X);
  for (int k = 1; k < n; ++k) {
    const int a = lookup.order()[k - 1];
    const int b = lookup.order()[k];
    if (!lex_less(X[a], X[b]))
      throw InvalidArgument("build_tree: duplicate sites " + std::to_string(std::min(a, b)) + " and " +
                            std::to_string(std::max(a, b)));
  }

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<PartitionNode> nodes;

  std::function<int(int, int, int, BoundingBox)> grow = [&](int parent, int begin, int end, BoundingBox box) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[id].id = id;
    nodes[id].parent = parent;
    nodes[id].begin = begin;
    nodes[id].end = end;
    nodes[id].box = box;
    nodes[id].landmarks = PointSet(d);
    const int count = end - begin;
    if (count < 2 * rank) return id;

    const int k = box.longest_dim();
    auto less = [&](int a, int b) { return X[a][k] < X[b][k] || (X[a][k] == X[b][k] && a < b); };
    const int mid = begin + count / 2;
    std::nth_element(idx.begin() + begin, idx.begin() + mid, idx.begin() + end, less);
    double left_max = -std::numeric_limits<double>::infinity();
    for (int t = begin; t < mid; ++t) left_max = std::max(left_max, X[idx[t]][k]);
    const double right_min = X[idx[mid]][k];
    const double cut = 0.5 * (left_max + right_min);
    BoundingBox left = box, right = box;
    left.hi[k] = cut;
    right.lo[k] = cut;

    PointSet members(d);
    members.reserve(count);
    for (int t = begin; t < end; ++t) members.push_back(X[idx[t]]);
    PointSet landmarks = place_landmarks(box, rank, strategy, detail::counter_bits(seed, id), members.view());
    nudge_off_sites(landmarks, box, [&](SiteView x) { return lookup.contains(x); });
    nodes[id].landmarks = std::move(landmarks);

    const int a = grow(id, begin, mid, left);
    const int b = grow(id, mid, end, right);
    nodes[id].children = {a, b};
    return id;
  };
  grow(-1, 0, n, BoundingBox::of(X.view()));

  std::vector<int> perm(n);
  PointSet sites(d);
  sites.reserve(n);
  for (int pos = 0; pos < n; ++pos) {
    perm[idx[pos]] = pos;
    sites.push_back(X[idx[pos]]);
  }
  return PartitionTree(std::move(nodes), std::move(perm), std::move(sites), rank);
}

namespace {

void write_row(std::ostream& out, const char* tag, SiteView v) {
  out << tag;
  for (double x : v) out << ' ' << x;
  out << '\n';
}

std::vector<double> read_row(std::istream& in, const char* tag, int d) {
  std::string t;
  if (!(in >> t) || t != tag) throw InvalidArgument(std::string("read_tree: expected '") + tag + "'");
  std::vector<double> v(d);
  for (double& x : v)
    if (!(in >> x)) throw InvalidArgument(std::string("read_tree: bad numbers after '") + tag + "'");
  return v;
}

void expect(std::istream& in, const char* word) {
  std::string t;
  if (!(in >> t) || t != word) throw InvalidArgument(std::string("read_tree: expected '") + word + "'");
}

}  // namespace

void write_tree(std::ostream& out, const PartitionTree& tree) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(17);
  out << "rlcov-tree 1\n";
  out << "n " << tree.n() << " dim " << tree.dim() << " rank " << tree.rank() << " nodes " << tree.size() << '\n';
  out << "perm";
  for (int p : tree.perm()) out << ' ' << p;
  out << '\n';
  for (int k = 0; k < tree.n(); ++k) write_row(out, "site", tree.sites()[k]);
  for (const PartitionNode& nd : tree.nodes()) {
    out << "node " << nd.id << " parent " << nd.parent << " range " << nd.begin << ' ' << nd.end << " children "
        << nd.children.size();
    for (int c : nd.children) out << ' ' << c;
    out << '\n';
    write_row(out, "lo", nd.box.lo);
    write_row(out, "hi", nd.box.hi);
    out << "landmarks " << nd.landmarks.size() << '\n';
    for (int k = 0; k < nd.landmarks.size(); ++k) write_row(out, "L", nd.landmarks[k]);
  }
  out.flags(flags);
  out.precision(prec);
}

PartitionTree read_tree(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "rlcov-tree" || version != 1)
    throw InvalidArgument("read_tree: not a tree file");
  int n = 0, d = 0, rank = 0, count = 0;
  expect(in, "n");
  in >> n;
  expect(in, "dim");
  in >> d;
  expect(in, "rank");
  in >> rank;
  expect(in, "nodes");
  in >> count;
  if (!in || n < 1 || d < 1 || rank < 1 || count < 1) throw InvalidArgument("read_tree: bad header");
  expect(in, "perm");
  std::vector<int> perm(n);
  for (int& p : perm)
    if (!(in >> p)) throw InvalidArgument("read_tree: bad permutation");
  PointSet sites(d);
  sites.reserve(n);
  for (int k = 0; k < n; ++k) sites.push_back(read_row(in, "site", d));
  std::vector<PartitionNode> nodes(count);
  for (int i = 0; i < count; ++i) {
    PartitionNode& nd = nodes[i];
    int nchild = 0;
    expect(in, "node");
    in >> nd.id;
    expect(in, "parent");
    in >> nd.parent;
    expect(in, "range");
    in >> nd.begin >> nd.end;
    expect(in, "children");
    in >> nchild;
    if (!in || nchild < 0) throw InvalidArgument("read_tree: bad node record");
    nd.children.resize(nchild);
    for (int& c : nd.children) in >> c;
    nd.box.lo = read_row(in, "lo", d);
    nd.box.hi = read_row(in, "hi", d);
    int m = 0;
    expect(in, "landmarks");
    in >> m;
    if (!in || m < 0) throw InvalidArgument("read_tree: bad landmark count");
    nd.landmarks = PointSet(d);
    for (int k = 0; k < m; ++k) nd.landmarks.push_back(read_row(in, "L", d));
  }
  return PartitionTree(std::move(nodes), std::move(perm), std::move(sites), rank);
}

}  // namespace rlcov
