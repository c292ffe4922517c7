#include "gptop/shapefn.hpp"

namespace gptop::shapefn {

CenterGradients gradient_matrices(const Eigen::MatrixXd& coords) {
  const int dim = int(coords.rows());
  const int nne = int(coords.cols());
  require((dim == 2 && nne == 4) || (dim == 3 && nne == 8), "shapefn.coords",
          "expected 2x4 or 3x8 corner coordinates");
  Eigen::MatrixXd dndxi;
  if (dim == 2)
    dndxi = quad_gradients(0.0, 0.0);
  else
    dndxi = hex_gradients(0.0, 0.0, 0.0);
  // J(a,b) = dx_a/dxi_b; physical gradients are J^{-T} * dndxi.
  Eigen::MatrixXd jac = coords * dndxi.transpose();
  const double detj = jac.determinant();
  require(detj > 0.0, "shapefn.jacobian",
          "non-positive Jacobian at element center");
  CenterGradients g;
  g.dndx = jac.transpose().partialPivLu().solve(dndxi);
  g.detj = detj;
  return g;
}

Eigen::MatrixXd ElementGeometry::b_u(int e) const {
  const Eigen::MatrixXd& d = dndx[e];
  const int nne = int(d.cols());
  if (dim == 2) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 2 * nne);
    for (int j = 0; j < nne; ++j) {
      b(0, 2 * j) = d(0, j);
      b(1, 2 * j + 1) = d(1, j);
      b(2, 2 * j) = d(1, j);
      b(2, 2 * j + 1) = d(0, j);
    }
    return b;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 3 * nne);
  for (int j = 0; j < nne; ++j) {
    b(0, 3 * j) = d(0, j);
    b(1, 3 * j + 1) = d(1, j);
    b(2, 3 * j + 2) = d(2, j);
    b(3, 3 * j + 1) = d(2, j);  // g23
    b(3, 3 * j + 2) = d(1, j);
    b(4, 3 * j) = d(2, j);      // g13
    b(4, 3 * j + 2) = d(0, j);
    b(5, 3 * j) = d(1, j);      // g12
    b(5, 3 * j + 1) = d(0, j);
  }
  return b;
}

ElementGeometry build_element_geometry(const grid::CollocationGrid& grid) {
  ElementGeometry geom;
  geom.dim = grid.dim;
  geom.omega_g = grid.dim == 2 ? 4.0 : 8.0;
  const int ne = grid.n_elems();
  geom.dndx.resize(ne);
  geom.detj.resize(ne);
  Eigen::MatrixXd coords(grid.dim, grid.nodes_per_elem());
  for (int e = 0; e < ne; ++e) {
    for (int j = 0; j < grid.nodes_per_elem(); ++j)
      coords.col(j) = grid.nodes.col(grid.elems(j, e));
    CenterGradients g = gradient_matrices(coords);
    geom.dndx[e] = std::move(g.dndx);
    geom.detj[e] = g.detj;
  }
  geom.weights = geom.omega_g * geom.detj;
  return geom;
}

double integrate(const Eigen::VectorXd& cell_values,
                 const ElementGeometry& geom) {
  require(cell_values.size() == geom.detj.size(), "shapefn.integrate",
          "one value per element required");
  return geom.weights.dot(cell_values);
}

}  // namespace gptop::shapefn
