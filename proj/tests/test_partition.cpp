#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rlcov/partition.hpp"
#include "support.hpp"

using namespace rlcov;

namespace {

// Leaf sizes of a median-split tree, computed from counts alone.
void expected_leaves(int count, int r, int depth, std::vector<int>& sizes, int& height) {
  if (count < 2 * r) {
    sizes.push_back(count);
    height = std::max(height, depth);
    return;
  }
  expected_leaves(count / 2, r, depth + 1, sizes, height);
  expected_leaves(count - count / 2, r, depth + 1, sizes, height);
}

void check_invariants(const PartitionTree& t) {
  const int n = t.n();
  std::vector<int> seen(n, 0);
  for (int i = 0; i < n; ++i) seen[t.perm()[i]]++;
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  for (int i = 0; i < n; ++i) CHECK(t.order()[t.perm()[i]] == i);

  CHECK(t.node(0).begin == 0);
  CHECK(t.node(0).end == n);
  for (const PartitionNode& nd : t.nodes()) {
    if (nd.is_leaf()) {
      CHECK(nd.landmarks.size() == 0);
      for (int p = nd.begin; p < nd.end; ++p) {
        CHECK(nd.box.contains(t.sites()[p]));
        CHECK(t.leaf_of_position(p) == nd.id);
      }
      continue;
    }
    REQUIRE(nd.children.size() == 2);
    const PartitionNode& a = t.node(nd.children[0]);
    const PartitionNode& b = t.node(nd.children[1]);
    CHECK(a.begin == nd.begin);
    CHECK(a.end == b.begin);
    CHECK(b.end == nd.end);
    CHECK(std::abs(a.count() - b.count()) <= 1);
    CHECK(nd.box.contains(a.box));
    CHECK(nd.box.contains(b.box));
    CHECK(nd.landmarks.size() == t.rank());
    std::set<std::vector<double>> distinct;
    for (int k = 0; k < nd.landmarks.size(); ++k) {
      CHECK(nd.box.contains(nd.landmarks[k]));
      CHECK(t.find_site(nd.landmarks[k]) == -1);
      distinct.insert(std::vector<double>(nd.landmarks[k].begin(), nd.landmarks[k].end()));
    }
    CHECK(static_cast<int>(distinct.size()) == t.rank());
    // The split is along the longest side of the node box.
    const int k = nd.box.longest_dim();
    for (int j = 0; j < t.dim(); ++j)
      if (j != k) {
        CHECK(a.box.lo[j] == nd.box.lo[j]);
        CHECK(a.box.hi[j] == nd.box.hi[j]);
      }
    CHECK(a.box.hi[k] == b.box.lo[k]);
  }
}

}  // namespace

TEST_CASE("eight grid sites with r = 2 give four leaves") {
  const PartitionTree t = build_tree(testing::grid_points(4, 2), 2);
  CHECK(t.topology()->leaves().size() == 4);
  CHECK(t.height() == 2);
  check_invariants(t);
}

TEST_CASE("n = 4r gridded sites give height 2 with leaves of exactly r") {
  const PartitionTree t = build_tree(testing::grid_points(8, 6), 12);
  CHECK(t.height() == 2);
  for (int leaf : t.topology()->leaves()) CHECK(t.node(leaf).count() == 12);
  check_invariants(t);
}

TEST_CASE("n = r gives a single leaf") {
  const PartitionTree t = build_tree(testing::uniform_points(9, 2, 1), 9);
  CHECK(t.size() == 1);
  CHECK(t.node(0).is_leaf());
  CHECK(t.node(0).landmarks.size() == 0);
}

TEST_CASE("1000 random sites with r = 125 give height 3") {
  const PartitionTree t = build_tree(testing::uniform_points(1000, 2, 7), 125);
  std::vector<int> sizes;
  int height = 0;
  expected_leaves(1000, 125, 0, sizes, height);
  CHECK(t.height() == height);
  CHECK(height == 3);
  std::vector<int> got;
  for (int leaf : t.topology()->leaves()) got.push_back(t.node(leaf).count());
  CHECK(got == sizes);
  for (int s : got) CHECK((s >= 125 && s < 250));
  check_invariants(t);
}

TEST_CASE("leaf sizes follow the median-split count recursion") {
  for (int n : {37, 100, 333, 1001})
    for (int r : {1, 3, 8}) {
      CAPTURE(n);
      CAPTURE(r);
      const PartitionTree t = build_tree(testing::uniform_points(n, 3, n + r), r);
      std::vector<int> sizes;
      int height = 0;
      expected_leaves(n, r, 0, sizes, height);
      std::vector<int> got;
      for (int leaf : t.topology()->leaves()) got.push_back(t.node(leaf).count());
      std::sort(got.begin(), got.end());
      std::sort(sizes.begin(), sizes.end());
      CHECK(got == sizes);
      CHECK(t.height() == height);
      check_invariants(t);
    }
}

TEST_CASE("all landmark strategies satisfy the invariants") {
  const PointSet X = testing::uniform_points(300, 2, 3);
  for (auto s : {LandmarkStrategy::RegularGrid, LandmarkStrategy::RandomUniform, LandmarkStrategy::RandomSubsample}) {
    CAPTURE(to_string(s));
    check_invariants(build_tree(X, 10, s, 42));
  }
}

TEST_CASE("construction is deterministic and seeded") {
  const PointSet X = testing::uniform_points(400, 2, 5);
  CHECK(build_tree(X, 16) == build_tree(X, 16));
  const auto u1 = build_tree(X, 16, LandmarkStrategy::RandomUniform, 1);
  CHECK(u1 == build_tree(X, 16, LandmarkStrategy::RandomUniform, 1));
  CHECK_FALSE(u1 == build_tree(X, 16, LandmarkStrategy::RandomUniform, 2));
}

TEST_CASE("ties in the split coordinate break by original index") {
  // Sixteen sites sharing x; the split falls along y after x has no extent.
  std::vector<double> c;
  for (int i = 0; i < 16; ++i) {
    c.push_back(0.5);
    c.push_back(i % 2 == 0 ? 1.0 : 0.0);
  }
  c[1] = 0.25;  // keep all sites distinct
  for (int i = 1; i < 16; ++i) c[2 * i + 1] += i * 1e-3;
  const PartitionTree t = build_tree(PointSet(2, c), 4);
  check_invariants(t);
}

TEST_CASE("bad inputs are rejected") {
  CHECK_THROWS_AS(build_tree(testing::uniform_points(5, 2, 1), 6), InvalidArgument);
  PointSet dup = testing::uniform_points(10, 2, 1);
  dup.push_back(dup[3]);
  CHECK_THROWS_AS(build_tree(dup, 2), InvalidArgument);
  CHECK_THROWS_AS(build_tree(testing::uniform_points(10, 2, 1), 0), InvalidArgument);
  const BoundingBox box{{0, 0}, {1, 1}};
  const PointSet few = testing::uniform_points(3, 2, 1);
  CHECK_THROWS_AS(place_landmarks(box, 4, LandmarkStrategy::RandomSubsample, 0, few.view()), InvalidArgument);
  CHECK_THROWS_AS(parse_landmark_strategy("sobol"), InvalidArgument);
}

TEST_CASE("regular grid landmarks") {
  const BoundingBox unit{{0, 0}, {1, 1}};
  const PointSet none(2);

  const PointSet four = place_landmarks(unit, 4, LandmarkStrategy::RegularGrid, 0, none.view());
  std::set<std::vector<double>> got;
  for (int k = 0; k < 4; ++k) got.insert({four[k][0], four[k][1]});
  CHECK(got == std::set<std::vector<double>>{{0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75}});

  const PointSet one = place_landmarks(unit, 1, LandmarkStrategy::RegularGrid, 0, none.view());
  CHECK(one[0][0] == 0.5);
  CHECK(one[0][1] == 0.5);

  // 3 x 2 lattice; the two points on the vertical center line are nearest.
  const PointSet five = place_landmarks(unit, 5, LandmarkStrategy::RegularGrid, 0, none.view());
  REQUIRE(five.size() == 5);
  std::set<std::vector<double>> distinct;
  int central = 0;
  for (int k = 0; k < 5; ++k) {
    CHECK(unit.contains(five[k]));
    distinct.insert({five[k][0], five[k][1]});
    if (five[k][0] == 0.5) ++central;
    const double x = five[k][0] * 6.0, y = five[k][1] * 4.0;
    CHECK(x == doctest::Approx(std::round(x)));
    CHECK(y == doctest::Approx(std::round(y)));
  }
  CHECK(distinct.size() == 5);
  CHECK(central == 2);

  // A long thin box gets more points along its long side.
  const BoundingBox thin{{0, 0}, {4, 1}};
  const PointSet eight = place_landmarks(thin, 8, LandmarkStrategy::RegularGrid, 0, none.view());
  std::set<double> xs, ys;
  for (int k = 0; k < 8; ++k) {
    xs.insert(eight[k][0]);
    ys.insert(eight[k][1]);
  }
  CHECK(xs.size() > ys.size());
}

TEST_CASE("a landmark on a site is moved off it") {
  const BoundingBox unit{{0, 0}, {1, 1}};
  const PointSet sites(2, {0.5, 0.5, 0.1, 0.9});
  const PointSet l = place_landmarks(unit, 1, LandmarkStrategy::RegularGrid, 0, sites.view());
  CHECK_FALSE(bitwise_equal(l[0], sites[0]));
  // One cell covering the box; a quarter cell along the first diagonal.
  CHECK(l[0][0] == 0.75);
  CHECK(l[0][1] == 0.75);
  CHECK(unit.contains(l[0]));
}

TEST_CASE("subsampled landmarks stay next to their sites") {
  const BoundingBox unit{{0, 0}, {1, 1}};
  const PointSet sites = testing::uniform_points(20, 2, 4);
  const PointSet l = place_landmarks(unit, 5, LandmarkStrategy::RandomSubsample, 3, sites.view());
  for (int k = 0; k < 5; ++k) {
    double nearest = 1.0;
    for (int i = 0; i < sites.size(); ++i) {
      CHECK_FALSE(bitwise_equal(l[k], sites[i]));
      nearest = std::min(nearest, std::hypot(l[k][0] - sites[i][0], l[k][1] - sites[i][1]));
    }
    CHECK(nearest < 1e-8);
  }
}

TEST_CASE("grid landmarks keep clear of grid-aligned sites") {
  // The site lattice contains every landmark cell center.
  PointSet sites(2);
  for (int j = 0; j <= 10; ++j)
    for (int i = 0; i <= 10; ++i) sites.push_back(std::vector<double>{i / 10.0, j / 10.0});
  const BoundingBox unit{{0, 0}, {1, 1}};
  const PointSet l = place_landmarks(unit, 25, LandmarkStrategy::RegularGrid, 0, sites.view());
  for (int k = 0; k < l.size(); ++k) {
    CHECK(unit.contains(l[k]));
    for (int i = 0; i < sites.size(); ++i)
      CHECK(std::hypot(l[k][0] - sites[i][0], l[k][1] - sites[i][1]) >= 0.2 / 8);
  }
}

TEST_CASE("degenerate box sides get a single landmark coordinate") {
  const BoundingBox flat{{0, 2}, {1, 2}};
  const PointSet l = place_landmarks(flat, 3, LandmarkStrategy::RegularGrid, 0, PointSet(2).view());
  for (int k = 0; k < 3; ++k) CHECK(l[k][1] == 2.0);
}

TEST_CASE("locate_leaf") {
  const PartitionTree t = build_tree(testing::uniform_points(200, 2, 9), 8);
  for (int p = 0; p < t.n(); p += 7) CHECK(t.locate_leaf(t.sites()[p]) == t.leaf_of_position(p));
  const PointSet q = testing::uniform_points(50, 2, 10);
  for (int k = 0; k < q.size(); ++k) {
    const int leaf = t.locate_leaf(q[k]);
    CHECK(t.node(leaf).is_leaf());
    if (t.node(0).box.contains(q[k])) CHECK(t.node(leaf).box.contains(q[k]));
  }
  // Outside the root box: still a leaf, the nearest along the descent.
  CHECK(t.node(t.locate_leaf(Site{5.0, 5.0})).is_leaf());
}

TEST_CASE("tree order conversion round-trips") {
  const PointSet X = testing::uniform_points(100, 2, 2);
  const PartitionTree t = build_tree(X, 5);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(100, 0, 99);
  const Eigen::VectorXd tv = t.to_tree_order(v);
  CHECK(t.to_original_order(tv) == v);
  for (int p = 0; p < 100; ++p) CHECK(bitwise_equal(t.sites()[p], X[static_cast<int>(tv[p])]));
}

TEST_CASE("tree serialization round-trips exactly") {
  for (auto s : {LandmarkStrategy::RegularGrid, LandmarkStrategy::RandomUniform}) {
    const PartitionTree t = build_tree(testing::uniform_points(300, 2, 11, -3.0, 7.0), 10, s, 3);
    std::stringstream ss;
    write_tree(ss, t);
    const PartitionTree u = read_tree(ss);
    CHECK(u == t);
    std::stringstream again;
    write_tree(again, u);
    std::stringstream first;
    write_tree(first, t);
    CHECK(again.str() == first.str());
  }
  std::stringstream junk("not a tree");
  CHECK_THROWS_AS(read_tree(junk), InvalidArgument);
}
