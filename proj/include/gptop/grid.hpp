#pragma once

#include <random>
#include <vector>

#include "gptop/common.hpp"

namespace gptop::grid {

// Axis-aligned cutout; an element is removed when its center lies inside.
struct BoxMask {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
  bool contains(const Eigen::Vector3d& p, int dim) const;
};

struct Domain {
  int dim = 2;
  Eigen::Vector3d lengths = Eigen::Vector3d::Ones();  // z ignored when dim == 2
  double thickness = 1.0;                             // out-of-plane, 2D only
  std::vector<BoxMask> cutouts;

  void validate() const;
  // Geometric volume (area in 2D) after cutouts, exact for cell-aligned boxes.
  double volume_with(double cell_volume, int active_cells) const {
    return cell_volume * active_cells;
  }
};

// Tensor-product collocation grid over the domain. Masked lattice cells carry
// no element; nodes touching no element are dropped from `nodes`.
struct CollocationGrid {
  int dim = 2;
  Eigen::Vector3i npts = Eigen::Vector3i::Ones();  // lattice nodes per axis
  Eigen::Vector3d h = Eigen::Vector3d::Zero();     // cell size per axis
  Eigen::MatrixXd nodes;      // dim x n_nodes, active lattice nodes
  Eigen::MatrixXi elems;      // 4 x n_elems (CCW quad) or 8 x n_elems (hex)
  Eigen::MatrixXd centers;    // dim x n_elems
  std::vector<int> node_lut;  // lattice index -> node index, -1 inactive
  std::vector<int> cell_lut;  // lattice cell index -> element index, -1 masked
  std::vector<int> boundary_nodes;       // node indices with partial element star
  std::vector<char> is_boundary;         // per node
  double cell_volume = 0.0;              // single cell, uniform lattice
  double volume = 0.0;                   // cell_volume * n_elems

  int n_nodes() const { return int(nodes.cols()); }
  int n_elems() const { return int(elems.cols()); }
  int nodes_per_elem() const { return dim == 2 ? 4 : 8; }
  int lattice_size() const { return npts.x() * npts.y() * npts.z(); }
  Eigen::Vector3i cells() const {
    return {npts.x() - 1, npts.y() - 1, dim == 3 ? npts.z() - 1 : 1};
  }
  int lattice_index(int ix, int iy, int iz) const {
    return (ix * npts.y() + iy) * npts.z() + iz;
  }
  int cell_index(int ix, int iy, int iz) const {
    const Eigen::Vector3i c = cells();
    return (ix * c.y() + iy) * c.z() + iz;
  }
};

struct GridFamily {
  Domain domain;
  std::vector<CollocationGrid> grids;  // [0] coarsest, back() finest

  const CollocationGrid& finest() const { return grids.back(); }
  int size() const { return int(grids.size()); }
};

enum class BcKind {
  DirichletDisplacement,
  DirichletTemperature,
  DirichletDensity,
  PointLoad,
  PointSpring,
  Flux,
};

// Closed axis-aligned box selector in physical coordinates. Point-kind
// conditions use lo == hi and snap to the nearest node instead of matching.
struct Region {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
  Eigen::Vector3d point() const { return 0.5 * (lo + hi); }
};

struct BoundaryCondition {
  BcKind kind = BcKind::DirichletDisplacement;
  std::string name;     // stable id for metadata and adjoint wiring
  Region region;
  int component = -1;   // Dirichlet displacement: 0/1/2, -1 = all components
  double value = 0.0;   // prescribed value, load magnitude, or flux density
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();  // unit, loads/springs
  double stiffness = 0.0;                               // K_s, springs
  std::vector<double> density_value;                    // dirichlet-density only
};

struct TaggedBc {
  BoundaryCondition bc;
  std::vector<int> nodes;      // matched node indices; size 1 for point kinds
  double snap_distance = 0.0;  // point kinds only
};

CollocationGrid build_grid(const Domain& domain, const Eigen::Vector3i& npts);

// Node counts interpolate linearly per axis from coarse to fine, half-up
// rounding. n_g == 1 yields the fine grid alone.
GridFamily build_grid_family(const Domain& domain, const Eigen::Vector3i& coarse,
                             const Eigen::Vector3i& fine, int n_g);

// Uniform over the family; bit-reproducible for a fixed seed.
int sample_grid(const GridFamily& family, std::mt19937_64& rng);

// Region conditions match boundary nodes; point conditions snap to the
// nearest active node (ties -> lowest node index). Zero matches is an error.
std::vector<TaggedBc> tag_boundaries(const CollocationGrid& grid,
                                     const std::vector<BoundaryCondition>& bcs);

}  // namespace gptop::grid
