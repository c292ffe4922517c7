#pragma once

#include <vector>

#include "gptop/common.hpp"
#include "gptop/grid.hpp"

namespace gptop::shapefn {

// Bilinear quad, CCW node order: (-1,-1), (1,-1), (1,1), (-1,1).
template <typename T>
Eigen::Vector4<T> quad_values(T xi, T eta) {
  return Eigen::Vector4<T>{(T(1) - xi) * (T(1) - eta) / T(4),
                           (T(1) + xi) * (T(1) - eta) / T(4),
                           (T(1) + xi) * (T(1) + eta) / T(4),
                           (T(1) - xi) * (T(1) + eta) / T(4)};
}

template <typename T>
Eigen::Matrix<T, 2, 4> quad_gradients(T xi, T eta) {
  Eigen::Matrix<T, 2, 4> d;
  d << -(T(1) - eta) / T(4), (T(1) - eta) / T(4), (T(1) + eta) / T(4),
      -(T(1) + eta) / T(4), -(T(1) - xi) / T(4), -(T(1) + xi) / T(4),
      (T(1) + xi) / T(4), (T(1) - xi) / T(4);
  return d;
}

// Trilinear hex, nodes: bottom face CCW then top face CCW.
template <typename T>
Eigen::Vector<T, 8> hex_values(T xi, T eta, T zeta) {
  const T xs[8] = {T(-1), T(1), T(1), T(-1), T(-1), T(1), T(1), T(-1)};
  const T ys[8] = {T(-1), T(-1), T(1), T(1), T(-1), T(-1), T(1), T(1)};
  const T zs[8] = {T(-1), T(-1), T(-1), T(-1), T(1), T(1), T(1), T(1)};
  Eigen::Vector<T, 8> n;
  for (int j = 0; j < 8; ++j)
    n[j] = (T(1) + xs[j] * xi) * (T(1) + ys[j] * eta) * (T(1) + zs[j] * zeta) /
           T(8);
  return n;
}

template <typename T>
Eigen::Matrix<T, 3, 8> hex_gradients(T xi, T eta, T zeta) {
  const T xs[8] = {T(-1), T(1), T(1), T(-1), T(-1), T(1), T(1), T(-1)};
  const T ys[8] = {T(-1), T(-1), T(1), T(1), T(-1), T(-1), T(1), T(1)};
  const T zs[8] = {T(-1), T(-1), T(-1), T(-1), T(1), T(1), T(1), T(1)};
  Eigen::Matrix<T, 3, 8> d;
  for (int j = 0; j < 8; ++j) {
    d(0, j) = xs[j] * (T(1) + ys[j] * eta) * (T(1) + zs[j] * zeta) / T(8);
    d(1, j) = ys[j] * (T(1) + xs[j] * xi) * (T(1) + zs[j] * zeta) / T(8);
    d(2, j) = zs[j] * (T(1) + xs[j] * xi) * (T(1) + ys[j] * eta) / T(8);
  }
  return d;
}

// dim x nne shape values / physical gradients at the element center, plus
// detJ there. Throws on non-positive detJ.
struct CenterGradients {
  Eigen::MatrixXd dndx;  // dim x nne
  double detj = 0.0;
};
CenterGradients gradient_matrices(const Eigen::MatrixXd& coords);

// Reduced one-point geometry for every element of a grid. Voigt order is
// (e11, e22, g12) in 2D and (e11, e22, e33, g23, g13, g12) in 3D, engineering
// shear, dofs interleaved per node.
struct ElementGeometry {
  int dim = 2;
  double omega_g = 4.0;                // 4 in 2D, 8 in 3D
  std::vector<Eigen::MatrixXd> dndx;   // per element, dim x nne
  Eigen::VectorXd detj;                // per element
  Eigen::VectorXd weights;             // omega_g * detj

  Eigen::MatrixXd b_u(int e) const;    // 3 x 8 or 6 x 24
  const Eigen::MatrixXd& b_t(int e) const { return dndx[e]; }
};

ElementGeometry build_element_geometry(const grid::CollocationGrid& grid);

// Reduced integration: sum_e omega_g * values[e] * detJ_e.
double integrate(const Eigen::VectorXd& cell_values, const ElementGeometry& geom);

}  // namespace gptop::shapefn
