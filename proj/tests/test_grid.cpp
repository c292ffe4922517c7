#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gptop/grid.hpp"

using namespace gptop;
using namespace gptop::grid;

namespace {

Domain rect(double lx, double ly) {
  Domain d;
  d.dim = 2;
  d.lengths = {lx, ly, 1.0};
  return d;
}

}  // namespace

TEST_CASE("family resolutions interpolate linearly with half-up rounding") {
  GridFamily fam = build_grid_family(rect(200, 100), {201, 101, 1},
                                     {401, 201, 1}, 51);
  REQUIRE(fam.size() == 51);
  CHECK(fam.grids.front().npts.head<2>() == Eigen::Vector2i(201, 101));
  CHECK(fam.grids.back().npts.head<2>() == Eigen::Vector2i(401, 201));
  CHECK(fam.grids[25].npts.head<2>() == Eigen::Vector2i(301, 151));

  GridFamily small = build_grid_family(rect(2, 1), {11, 6, 1}, {21, 11, 1}, 3);
  CHECK(small.grids[1].npts.head<2>() == Eigen::Vector2i(16, 9));
}

TEST_CASE("single-grid family uses the fine resolution") {
  GridFamily fam = build_grid_family(rect(2, 1), {11, 6, 1}, {11, 6, 1}, 1);
  REQUIRE(fam.size() == 1);
  CHECK(fam.grids[0].n_elems() == 50);
  CHECK(fam.grids[0].n_nodes() == 66);
}

TEST_CASE("element volumes partition the masked domain") {
  CollocationGrid g = build_grid(rect(200, 100), {21, 11, 1});
  CHECK(g.volume == doctest::Approx(20000.0).epsilon(1e-12));

  Domain lshape = rect(100, 100);
  lshape.cutouts.push_back({{50, 50, -1}, {101, 101, 2}});
  CollocationGrid lg = build_grid(lshape, {21, 21, 1});
  CHECK(lg.n_elems() == 300);
  CHECK(lg.volume == doctest::Approx(7500.0).epsilon(1e-12));

  Domain box3 = rect(2, 1);
  box3.dim = 3;
  box3.lengths = {2, 1, 0.5};
  CollocationGrid g3 = build_grid(box3, {9, 5, 3});
  CHECK(g3.volume == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interior nodes touch a full element star") {
  CollocationGrid g = build_grid(rect(2, 1), {11, 6, 1});
  std::vector<int> star(g.n_nodes(), 0);
  for (int e = 0; e < g.n_elems(); ++e)
    for (int j = 0; j < 4; ++j) ++star[g.elems(j, e)];
  for (int i = 0; i < g.n_nodes(); ++i) {
    if (g.is_boundary[i])
      CHECK(star[i] < 4);
    else
      CHECK(star[i] == 4);
  }
  // Rectangle boundary count: perimeter nodes of 11x6 lattice.
  CHECK(int(g.boundary_nodes.size()) == 2 * 11 + 2 * 6 - 4);
}

TEST_CASE("masked lattice drops orphan nodes and keeps CCW elements") {
  Domain lshape = rect(100, 100);
  lshape.cutouts.push_back({{50, 50, -1}, {101, 101, 2}});
  CollocationGrid g = build_grid(lshape, {5, 5, 1});
  // 4x4 cells minus the 2x2 upper-right block = 12 elements.
  CHECK(g.n_elems() == 12);
  // 25 lattice nodes minus the strictly interior nodes of the cut corner.
  CHECK(g.n_nodes() == 25 - 4);
  for (int e = 0; e < g.n_elems(); ++e) {
    const auto p0 = g.nodes.col(g.elems(0, e));
    const auto p1 = g.nodes.col(g.elems(1, e));
    const auto p3 = g.nodes.col(g.elems(3, e));
    const double cross = (p1 - p0).x() * (p3 - p0).y() -
                         (p1 - p0).y() * (p3 - p0).x();
    CHECK(cross > 0.0);
  }
}

TEST_CASE("grid sampling is uniform and bit-reproducible") {
  GridFamily fam = build_grid_family(rect(2, 1), {5, 3, 1}, {55, 28, 1}, 51);
  std::mt19937_64 rng(7);
  std::vector<int> counts(51, 0);
  std::vector<int> first;
  for (int i = 0; i < 10000; ++i) {
    const int k = sample_grid(fam, rng);
    ++counts[k];
    if (i < 100) first.push_back(k);
  }
  const double expected = 10000.0 / 51.0;
  const double sigma = std::sqrt(10000.0 * (1.0 / 51.0) * (50.0 / 51.0));
  for (int k = 0; k < 51; ++k)
    CHECK(std::abs(counts[k] - expected) <= 5.0 * sigma);

  std::mt19937_64 rng2(7);
  for (int i = 0; i < 100; ++i) CHECK(sample_grid(fam, rng2) == first[i]);
}

TEST_CASE("point conditions snap to the nearest node, ties to lowest index") {
  CollocationGrid g = build_grid(rect(1, 1), {3, 3, 1});
  BoundaryCondition bc;
  bc.kind = BcKind::PointLoad;
  bc.name = "load";
  bc.region.lo = bc.region.hi = Eigen::Vector3d(0.5, 0.25, 0.0);
  auto tags = tag_boundaries(g, {bc});
  REQUIRE(tags.size() == 1);
  REQUIRE(tags[0].nodes.size() == 1);
  // Equidistant from (0.5,0) [node 3] and (0.5,0.5) [node 4]: lowest wins.
  CHECK(tags[0].nodes[0] == 3);
  CHECK(tags[0].snap_distance == doctest::Approx(0.25));
}

TEST_CASE("region conditions match boundary nodes or fail loudly") {
  CollocationGrid g = build_grid(rect(200, 100), {21, 11, 1});
  BoundaryCondition bc;
  bc.kind = BcKind::DirichletDisplacement;
  bc.name = "symmetry";
  bc.component = 0;
  bc.region.lo = {0, 0, 0};
  bc.region.hi = {0, 100, 0};
  auto tags = tag_boundaries(g, {bc});
  CHECK(int(tags[0].nodes.size()) == 11);

  BoundaryCondition miss = bc;
  miss.name = "nowhere";
  miss.region.lo = {-50, -50, 0};
  miss.region.hi = {-40, -40, 0};
  CHECK_THROWS_AS(tag_boundaries(g, {miss}), Error);
}

TEST_CASE("masks that disconnect the domain are rejected") {
  Domain d = rect(2, 1);
  d.cutouts.push_back({{0.9, -1, -1}, {1.1, 2, 2}});
  CHECK_THROWS_AS(build_grid(d, {21, 11, 1}), Error);
}
