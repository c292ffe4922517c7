#pragma once

#include <array>

#include "gptop/grid.hpp"
#include "gptop/materials.hpp"
#include "gptop/shapefn.hpp"
#include "gptop/tape.hpp"

namespace gptop::physics {

// Constant reduced-integration operators for one grid. Every element of a
// collocation grid is congruent, so a single center-gradient row per axis
// assembles into one sparse nodal-to-element operator. The struct must
// outlive any tape op that references it (ops capture the sparse matrices).
struct Quadrature {
  int dim = 2;
  double thickness = 1.0;
  std::array<ad::SpMat, 3> grad;  // n_nodes x n_elems, (u row * grad[a]) = du/dx_a
  ad::SpMat center;               // nodal row -> element-center row
  Eigen::RowVectorXd w;           // omega_g * detJ * thickness (energy measure)
  Eigen::RowVectorXd w_geo;       // omega_g * detJ (mass/cost measure)
  double volume = 0.0;            // sum of w_geo
};

Quadrature build_quadrature(const grid::CollocationGrid& grid,
                            double thickness);

// 1 x n_pts penalized property row: sum_i props_i * rho_i^p.
// rho is n_phases x n_pts (element centers for energies).
ad::Var property_row(ad::Var rho, const Eigen::VectorXd& props, double p);

// Center-point strain rows, engineering shear. 2D uses e11, e22, g12.
struct Strains {
  ad::Var e11, e22, g12;
  ad::Var e33, g23, g13;  // 3D only
};
Strains strain_rows(const Quadrature& q, ad::Var u1, ad::Var u2,
                    ad::Var u3 = {});
std::array<ad::Var, 3> gradient_rows(const Quadrature& q, ad::Var t);
ad::Var center_values(const Quadrature& q, ad::Var t);

// 1/2 int eps : C(E_row) : eps dV. A valid thermal_strain row (alpha * dT at
// centers) shifts the normal strains to eps - thermal_strain * I.
ad::Var elastic_energy(const Quadrature& q, const Strains& s, ad::Var e_row,
                       double nu, bool plane_stress,
                       ad::Var thermal_strain = {});
// int eps_a : C(E_row) : eps_b dV (no 1/2). thermal_strain, when valid,
// shifts the normal strains of side a only.
ad::Var elastic_cross_energy(const Quadrature& q, const Strains& a,
                             const Strains& b, ad::Var e_row, double nu,
                             bool plane_stress, ad::Var thermal_strain = {});
// (C(E_row) : eps) : I as a 1 x n_elems row (work conjugate of an isotropic
// unit eigenstrain).
ad::Var stress_trace_row(const Quadrature& q, const Strains& s, ad::Var e_row,
                         double nu, bool plane_stress);
// 1/2 int kappa |grad T|^2 dV
ad::Var conduction_energy(const Quadrature& q,
                          const std::array<ad::Var, 3>& grad_t,
                          ad::Var kappa_row);
// int kappa grad a . grad b dV (no 1/2)
ad::Var conduction_cross_energy(const Quadrature& q,
                                const std::array<ad::Var, 3>& grad_a,
                                const std::array<ad::Var, 3>& grad_b,
                                ad::Var kappa_row);
// 1/2 int h_v (T - T_inf)^2 dV
ad::Var convection_energy(const Quadrature& q, ad::Var t_center, double h_v,
                          double t_inf);
// int s_row (T - T_inf) dV: work of the volumetric source above ambient.
ad::Var source_work(const Quadrature& q, ad::Var s_row, ad::Var t_center,
                    double t_inf);

// dir . u(node), a 1x1 tape value. Components with zero direction are not
// touched (2D fields pass an invalid u3).
ad::Var point_value(ad::Var u1, ad::Var u2, ad::Var u3, int node,
                    const Eigen::Vector3d& dir);
// 1/2 k v^2 of a projected 1x1 value.
ad::Var spring_energy(ad::Var projected, double k);
// sum_n w_n t(n): boundary line/surface quadrature over matched nodes.
ad::Var weighted_node_sum(ad::Var t, const std::vector<int>& nodes,
                          const Eigen::VectorXd& weights);

// Linear (un-penalized) mass and cost of a density field at centers.
struct MassCostVars {
  ad::Var mass, cost;
};
MassCostVars mass_cost(const Quadrature& q, ad::Var rho,
                       const materials::MaterialSet& mats);

}  // namespace gptop::physics
