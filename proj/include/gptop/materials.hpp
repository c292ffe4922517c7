#pragma once

#include <string>
#include <vector>

#include "gptop/common.hpp"
#include "gptop/shapefn.hpp"

namespace gptop::materials {

struct Phase {
  std::string name;
  double e = 0.0;        // Young's modulus
  double kappa = 0.0;    // thermal conductivity
  double rho_bar = 0.0;  // density (mass constraint weight)
  double p_bar = 0.0;    // cost per volume
  double alpha = 0.0;    // thermal expansion coefficient
  double s = 0.0;        // volumetric heat source/sink coefficient
};

struct MaterialSet {
  std::vector<Phase> phases;  // phases[0] is void
  double nu = 0.31;
  bool plane_stress = true;  // 2D only
  // Devices penalize s with the densities; the heat-sink benchmark instead
  // applies a uniform design-independent source.
  bool penalize_source = true;

  int n_phases() const { return int(phases.size()); }
  Eigen::VectorXd property(double Phase::* field) const;
};

// Artificial phase catalog. Multi-material: void + M1 + M2 + M3;
// single-material: void + M3.
Phase void_phase();
Phase artificial_phase(int index);          // 1..3
MaterialSet artificial_set(int n_materials);  // 1 or 3 solid phases
Phase metal_phase(const std::string& name);   // Ni, Fe, Al, Cu, Ti
MaterialSet metal_set(const std::string& name);

// prop(x) = sum_i prop_i * rho_i(x)^p; rho is n_phases x n_pts.
Eigen::VectorXd interpolate(const Eigen::MatrixXd& rho,
                            const Eigen::VectorXd& props, double p);

// Isotropic elasticity in Voigt form; E = 0 gives the zero matrix.
Eigen::MatrixXd constitutive_matrix(double e, double nu, int dim,
                                    bool plane_stress);

// Mass and cost are linear in the densities (no penalization):
// M = int sum_i rho_i rho_bar_i dV, P likewise with p_bar.
struct MassCost {
  double mass = 0.0;
  double cost = 0.0;
};
MassCost mass_and_cost(const Eigen::MatrixXd& rho_at_centers,
                       const MaterialSet& mats,
                       const shapefn::ElementGeometry& geom);

}  // namespace gptop::materials
