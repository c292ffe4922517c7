#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <vector>

#include "gptop/grid.hpp"
#include "gptop/materials.hpp"

namespace gptop {

enum class ProblemClass {
  Compliance,
  ThermalCompliance,
  Mechanism,
  ThermoDevice,
};

}  // namespace gptop

// Verification solver, deliberately discretized unlike the training path:
// full 2x2(x2) Gauss integration, sparse direct solves, nodal unknowns.
namespace gptop::fem {

struct Spring {
  int node = -1;
  Eigen::Vector3d dir = Eigen::Vector3d::Zero();  // unit
  double k = 0.0;
};

struct MechanicalBc {
  // Per-component lists of constrained node ids (value 0 for all benchmarks).
  std::vector<std::vector<int>> fixed{{}, {}, {}};
  std::vector<std::tuple<int, int, double>> prescribed;  // node, comp, value
  std::vector<std::pair<int, Eigen::Vector3d>> loads;  // node, force vector
  std::vector<Spring> springs;
};

struct ThermalBc {
  std::vector<std::pair<int, double>> fixed;  // node, prescribed T
  double h_v = 0.0;                            // volumetric convection
  double t_ambient = 0.0;
};

struct MechanicalSolution {
  Eigen::VectorXd u;  // dim * n_nodes, node-interleaved
  double residual = 0.0;
  double external_work = 0.0;  // point loads only
  Eigen::Vector3d displacement_at(int node, int dim) const {
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    for (int a = 0; a < dim; ++a) d[a] = u[dim * node + a];
    return d;
  }
};

struct ThermalSolution {
  Eigen::VectorXd t;  // n_nodes
  double residual = 0.0;
};

// Per-element inputs are column vectors of length n_elems.
MechanicalSolution solve_mechanical(
    const grid::CollocationGrid& grid, const Eigen::VectorXd& e_elem,
    double nu, bool plane_stress, double thickness, const MechanicalBc& bc,
    const Eigen::VectorXd* alpha_elem = nullptr,
    const Eigen::VectorXd* t_nodal = nullptr, double t_ref = 0.0);

ThermalSolution solve_thermal(const grid::CollocationGrid& grid,
                              const Eigen::VectorXd& kappa_elem,
                              double thickness, const ThermalBc& bc,
                              const Eigen::VectorXd& source_elem,
                              const Eigen::VectorXd* nodal_rhs = nullptr);

// Nodal load conjugate to an isotropic eigenstrain: out[n] = sum_e
// (E alpha)_e int_e (C_unit:eps(v)):I N_n dV. Drives the thermal adjoint of
// the coupled device class.
Eigen::VectorXd assemble_coupling_load(const grid::CollocationGrid& grid,
                                       const Eigen::VectorXd& v,
                                       const Eigen::VectorXd& ealpha_elem,
                                       double nu, bool plane_stress,
                                       double thickness);

// Full-Gauss element bilinear products on nodal fields. These instantiate
// the continuous sensitivity integrals on the oracle's own quadrature.
// product[e] = u_e^T k_unit v_e with E = 1 (or kappa = 1).
Eigen::VectorXd element_strain_product(const grid::CollocationGrid& grid,
                                       const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& v, double nu,
                                       bool plane_stress, double thickness);
Eigen::VectorXd element_conduction_product(const grid::CollocationGrid& grid,
                                           const Eigen::VectorXd& t,
                                           const Eigen::VectorXd& vt,
                                           double thickness);
// coupling[e] = int eps(v) : C_unit : (dT I) dV with E = 1, alpha = 1.
Eigen::VectorXd element_thermal_coupling(const grid::CollocationGrid& grid,
                                         const Eigen::VectorXd& v,
                                         const Eigen::VectorXd& t_nodal,
                                         double t_ref, double nu,
                                         bool plane_stress, double thickness);
// source_product[e] = int N v_T dV (unit source density).
Eigen::VectorXd element_source_product(const grid::CollocationGrid& grid,
                                       const Eigen::VectorXd& vt,
                                       double thickness);
double thermal_compliance(const grid::CollocationGrid& grid,
                          const Eigen::VectorXd& kappa_elem,
                          const Eigen::VectorXd& t, double thickness);

// Evaluation of a binarized design: pure-phase properties per element
// (phase 0 keeps its floor values). Disconnected load paths yield an
// infinite objective with a diagnosis instead of a misleading number.
struct DesignEvaluation {
  double objective = 0.0;  // compliance / thermal compliance / u_out
  bool connected = true;
  std::string diagnosis;
  double compliance = 0.0;
  double u_out = 0.0;
};

struct EvalCase {
  ProblemClass problem_class = ProblemClass::Compliance;
  MechanicalBc mech;
  ThermalBc thermal;
  double source_density = 0.0;  // uniform, design independent (heat sink)
  int output_node = -1;
  Eigen::Vector3d output_dir = Eigen::Vector3d::Zero();
  double t_ref = 0.0;
  double thickness = 1.0;
};

DesignEvaluation evaluate_design(const grid::CollocationGrid& grid,
                                 const std::vector<int>& phase_per_elem,
                                 const materials::MaterialSet& mats,
                                 const EvalCase& c);

// Central finite differences of an arbitrary scalar objective w.r.t. one
// design channel per element.
Eigen::VectorXd fd_sensitivity(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& rho, double h = 1e-6);

// Ordered multi-material property map: piecewise through the phase knots
// (rho_bar_i, prop_i) with power penalization of the segment coordinate.
struct OrderedMap {
  Eigen::VectorXd knots_rho;   // ascending, starts at 0
  Eigen::VectorXd knots_prop;
  double penal = 3.0;
  double value(double rho) const;
  double derivative(double rho) const;
};
OrderedMap ordered_map(const materials::MaterialSet& mats,
                       double materials::Phase::* prop, double penal);

struct SimpConfig {
  double volfrac = 0.3;
  double penal = 3.0;
  double rmin = 2.0;  // density-filter radius, element units
  int max_iters = 150;
  double move = 0.2;
  double change_tol = 1e-3;
  double bisection_tol = 1e-6;  // on the volume constraint
  bool ordered_multimaterial = false;
};

struct SimpResult {
  Eigen::VectorXd rho;       // filtered physical densities per element
  double objective = 0.0;
  int iters = 0;
  std::vector<double> history;
};

// Density-filtered OC compliance / thermal-compliance minimization under a
// volume (mass) constraint. Multi-material uses the ordered property map.
SimpResult run_simp_baseline(const grid::CollocationGrid& grid,
                             const materials::MaterialSet& mats,
                             const EvalCase& c, const SimpConfig& cfg);

}  // namespace gptop::fem
