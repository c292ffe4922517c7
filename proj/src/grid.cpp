#include "gptop/grid.hpp"

#include <algorithm>
#include <queue>

namespace gptop::grid {

bool BoxMask::contains(const Eigen::Vector3d& p, int dim) const {
  for (int a = 0; a < dim; ++a)
    if (p[a] < lo[a] || p[a] > hi[a]) return false;
  return true;
}

void Domain::validate() const {
  require(dim == 2 || dim == 3, "domain.dim", "domain dim must be 2 or 3");
  for (int a = 0; a < dim; ++a)
    require(lengths[a] > 0.0, "domain.lengths",
            "domain lengths must be positive");
  if (dim == 2)
    require(thickness > 0.0, "domain.thickness", "thickness must be positive");
}

namespace {

// Element connectivity expects CCW quads and the usual hex numbering: the
// same ordering the center-point shape derivatives assume.
void element_corners(int dim, int ix, int iy, int iz, Eigen::Vector3i* out) {
  if (dim == 2) {
    out[0] = {ix, iy, 0};
    out[1] = {ix + 1, iy, 0};
    out[2] = {ix + 1, iy + 1, 0};
    out[3] = {ix, iy + 1, 0};
  } else {
    out[0] = {ix, iy, iz};
    out[1] = {ix + 1, iy, iz};
    out[2] = {ix + 1, iy + 1, iz};
    out[3] = {ix, iy + 1, iz};
    out[4] = {ix, iy, iz + 1};
    out[5] = {ix + 1, iy, iz + 1};
    out[6] = {ix + 1, iy + 1, iz + 1};
    out[7] = {ix, iy + 1, iz + 1};
  }
}

void check_connected(const CollocationGrid& g) {
  if (g.n_elems() == 0) fail("grid.empty", "mask removed every element");
  const Eigen::Vector3i c = g.cells();
  std::vector<char> seen(g.n_elems(), 0);
  std::queue<Eigen::Vector3i> q;
  for (int ix = 0; ix < c.x() && q.empty(); ++ix)
    for (int iy = 0; iy < c.y() && q.empty(); ++iy)
      for (int iz = 0; iz < c.z() && q.empty(); ++iz)
        if (g.cell_lut[g.cell_index(ix, iy, iz)] >= 0) {
          q.push({ix, iy, iz});
          seen[g.cell_lut[g.cell_index(ix, iy, iz)]] = 1;
        }
  int reached = 1;
  const int dz = g.dim == 3 ? 1 : 0;
  while (!q.empty()) {
    const Eigen::Vector3i e = q.front();
    q.pop();
    const int steps[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                             {0, -1, 0}, {0, 0, dz}, {0, 0, -dz}};
    for (const auto& s : steps) {
      const int ix = e.x() + s[0], iy = e.y() + s[1], iz = e.z() + s[2];
      if (ix < 0 || iy < 0 || iz < 0 || ix >= c.x() || iy >= c.y() ||
          iz >= c.z())
        continue;
      const int el = g.cell_lut[g.cell_index(ix, iy, iz)];
      if (el >= 0 && !seen[el]) {
        seen[el] = 1;
        ++reached;
        q.push({ix, iy, iz});
      }
    }
  }
  require(reached == g.n_elems(), "grid.disconnected",
          "mask disconnects the domain");
}

}  // namespace

CollocationGrid build_grid(const Domain& domain, const Eigen::Vector3i& npts) {
  domain.validate();
  CollocationGrid g;
  g.dim = domain.dim;
  g.npts = npts;
  if (g.dim == 2) g.npts.z() = 1;
  for (int a = 0; a < g.dim; ++a) {
    require(g.npts[a] >= 2, "grid.npts", "need at least 2 nodes per axis");
    g.h[a] = domain.lengths[a] / double(g.npts[a] - 1);
  }
  g.cell_volume = g.h.x() * g.h.y() * (g.dim == 3 ? g.h.z() : 1.0);

  const Eigen::Vector3i c = g.cells();
  g.cell_lut.assign(c.prod(), -1);
  g.node_lut.assign(g.lattice_size(), -1);

  // Pass 1: decide active cells by center, mark their corner nodes.
  std::vector<Eigen::Vector3i> active_cells;
  for (int ix = 0; ix < c.x(); ++ix)
    for (int iy = 0; iy < c.y(); ++iy)
      for (int iz = 0; iz < c.z(); ++iz) {
        Eigen::Vector3d center((ix + 0.5) * g.h.x(), (iy + 0.5) * g.h.y(),
                               g.dim == 3 ? (iz + 0.5) * g.h.z() : 0.0);
        bool masked = false;
        for (const auto& m : domain.cutouts)
          if (m.contains(center, g.dim)) masked = true;
        if (masked) continue;
        g.cell_lut[g.cell_index(ix, iy, iz)] = int(active_cells.size());
        active_cells.push_back({ix, iy, iz});
        Eigen::Vector3i corners[8];
        element_corners(g.dim, ix, iy, iz, corners);
        for (int j = 0; j < g.nodes_per_elem(); ++j)
          g.node_lut[g.lattice_index(corners[j].x(), corners[j].y(),
                                     corners[j].z())] = 0;
      }

  // Pass 2: number active nodes in lattice order.
  int n_nodes = 0;
  for (auto& v : g.node_lut)
    if (v == 0) v = n_nodes++;
  g.nodes.resize(g.dim, n_nodes);
  for (int ix = 0; ix < g.npts.x(); ++ix)
    for (int iy = 0; iy < g.npts.y(); ++iy)
      for (int iz = 0; iz < g.npts.z(); ++iz) {
        const int id = g.node_lut[g.lattice_index(ix, iy, iz)];
        if (id < 0) continue;
        g.nodes(0, id) = ix * g.h.x();
        g.nodes(1, id) = iy * g.h.y();
        if (g.dim == 3) g.nodes(2, id) = iz * g.h.z();
      }

  g.elems.resize(g.nodes_per_elem(), int(active_cells.size()));
  g.centers.resize(g.dim, int(active_cells.size()));
  std::vector<int> star(n_nodes, 0);
  for (int e = 0; e < int(active_cells.size()); ++e) {
    Eigen::Vector3i corners[8];
    const auto& cc = active_cells[e];
    element_corners(g.dim, cc.x(), cc.y(), cc.z(), corners);
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (int j = 0; j < g.nodes_per_elem(); ++j) {
      const int id =
          g.node_lut[g.lattice_index(corners[j].x(), corners[j].y(),
                                     corners[j].z())];
      g.elems(j, e) = id;
      ++star[id];
      center.head(g.dim) += g.nodes.col(id);
    }
    g.centers.col(e) = center.head(g.dim) / double(g.nodes_per_elem());
  }
  g.volume = g.cell_volume * g.n_elems();

  // Interior nodes own a full element star; anything less is boundary.
  const int full = g.nodes_per_elem();
  g.is_boundary.assign(n_nodes, 0);
  for (int i = 0; i < n_nodes; ++i)
    if (star[i] < full) {
      g.is_boundary[i] = 1;
      g.boundary_nodes.push_back(i);
    }

  check_connected(g);
  return g;
}

GridFamily build_grid_family(const Domain& domain, const Eigen::Vector3i& coarse,
                             const Eigen::Vector3i& fine, int n_g) {
  require(n_g >= 1, "grid.family", "n_g must be >= 1");
  for (int a = 0; a < domain.dim; ++a)
    require(fine[a] >= coarse[a], "grid.family",
            "fine resolution must not be below coarse");
  GridFamily fam;
  fam.domain = domain;
  for (int k = 0; k < n_g; ++k) {
    Eigen::Vector3i npts = fine;
    if (n_g > 1) {
      const double t = double(k) / double(n_g - 1);
      for (int a = 0; a < domain.dim; ++a)
        npts[a] = round_half_up(coarse[a] + t * (fine[a] - coarse[a]));
    }
    if (domain.dim == 2) npts.z() = 1;
    fam.grids.push_back(build_grid(domain, npts));
  }
  return fam;
}

int sample_grid(const GridFamily& family, std::mt19937_64& rng) {
  return uniform_index(rng, family.size());
}

std::vector<TaggedBc> tag_boundaries(const CollocationGrid& grid,
                                     const std::vector<BoundaryCondition>& bcs) {
  std::vector<TaggedBc> out;
  const double tol = 1e-9 * grid.h.head(grid.dim).maxCoeff();
  for (const auto& bc : bcs) {
    TaggedBc t;
    t.bc = bc;
    const bool point_kind =
        bc.kind == BcKind::PointLoad || bc.kind == BcKind::PointSpring;
    if (point_kind) {
      const Eigen::VectorXd p = bc.region.point().head(grid.dim);
      int best = -1;
      double best_d = 0.0;
      for (int i = 0; i < grid.n_nodes(); ++i) {
        const double d = (grid.nodes.col(i) - p).norm();
        if (best < 0 || d < best_d - tol) {
          best = i;
          best_d = d;
        }
      }
      t.nodes.push_back(best);
      t.snap_distance = best_d;
    } else {
      for (int i : grid.boundary_nodes) {
        bool in = true;
        for (int a = 0; a < grid.dim; ++a) {
          const double x = grid.nodes(a, i);
          if (x < bc.region.lo[a] - tol || x > bc.region.hi[a] + tol) in = false;
        }
        if (in) t.nodes.push_back(i);
      }
      require(!t.nodes.empty(), "bc.empty_region",
              "boundary condition '" + bc.name + "' matches zero nodes");
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace gptop::grid
