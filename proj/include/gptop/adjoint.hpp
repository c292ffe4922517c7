#pragma once

#include "gptop/fem.hpp"
#include "gptop/physics.hpp"

namespace gptop::adjoint {

// Objective scaling. alpha_u compensates small output displacements in
// mechanism/device classes; alpha_t balances the thermal adjoint.
struct Scales {
  double alpha_u = 1.0;
  double alpha_t = 1.0;
};
Scales default_scales(ProblemClass c);

struct LoadTerm {
  ad::Var proj;      // dir . field(x), 1x1
  double magnitude;  // force magnitude along dir
};
struct SpringTerm {
  ad::Var proj;  // e_s . field(x_s), 1x1
  double k;
};

// --- equilibrium losses (density rows detached by the caller) ---

// 1/2 a(u,u) + 1/2 sum K (u.e)^2 - sum f (dir.u); a valid thermal_strain row
// couples in a detached temperature field.
ad::Var mech_loss(const physics::Quadrature& q, const physics::Strains& s,
                  ad::Var e_row, double nu, bool plane_stress,
                  const std::vector<LoadTerm>& loads,
                  const std::vector<SpringTerm>& springs,
                  ad::Var thermal_strain = {});
// 1/2 int kappa |grad T|^2 + 1/2 int h_v (T - T_inf)^2 - int s (T - T_inf).
// An invalid s_row drops the source; source_density adds a uniform,
// design-independent source instead.
ad::Var heat_loss(const physics::Quadrature& q,
                  const std::array<ad::Var, 3>& grad_t, ad::Var kappa_row,
                  ad::Var t_center, ad::Var s_row, double source_density,
                  double h_v, double t_inf);

// --- adjoint potentials (density rows detached) ---

// 1/2 a(v,v) + spring energy + (1/alpha_u) e_n . v(x_out). With
// springs_use_primary, the spring energy 1/2 K (v.e)^2 is replaced by the
// load-like form K (u.e)_detached (v.e).
ad::Var adjoint_mech_loss(const physics::Quadrature& q,
                          const physics::Strains& sv, ad::Var e_row, double nu,
                          bool plane_stress,
                          const std::vector<SpringTerm>& springs_v,
                          const std::vector<ad::Var>& springs_u_detached,
                          bool springs_use_primary, ad::Var out_proj_v,
                          double alpha_u);
// 1/2 int kappa |grad vT|^2 + 1/2 int h_v vT^2
//   - (alpha_u/alpha_t) int coupling_row vT, where coupling_row is the
// detached alpha (C:eps_v):I row of the adjoint displacement.
ad::Var adjoint_heat_loss(const physics::Quadrature& q,
                          const std::array<ad::Var, 3>& grad_vt,
                          ad::Var kappa_row, ad::Var vt_center, double h_v,
                          ad::Var coupling_row, const Scales& sc);

// --- sensitivity functionals ---
// The only density-gradient carriers: property rows live, strain/gradient
// rows detached. Values descend the signed physical objective.
ad::Var sens_compliance(const physics::Quadrature& q,
                        const physics::Strains& su, ad::Var e_row, double nu,
                        bool plane_stress, double alpha_u);
ad::Var sens_mechanism(const physics::Quadrature& q,
                       const physics::Strains& su, const physics::Strains& sv,
                       ad::Var e_row, double nu, bool plane_stress,
                       double alpha_u);
ad::Var sens_heat(const physics::Quadrature& q,
                  const std::array<ad::Var, 3>& grad_t, ad::Var kappa_row);
// Coupled device: e_row, kappa_row, alpha_row, s_row live; all field rows
// detached. dt_center = (T - T_ref) at centers.
ad::Var sens_device(const physics::Quadrature& q, const physics::Strains& su,
                    const physics::Strains& sv,
                    const std::array<ad::Var, 3>& grad_t,
                    const std::array<ad::Var, 3>& grad_vt, ad::Var vt_center,
                    ad::Var e_row, ad::Var kappa_row, ad::Var alpha_row,
                    ad::Var s_row, ad::Var dt_center, double nu,
                    bool plane_stress, const Scales& sc);

// --- verification-side element sensitivities ---
// The same formulas instantiated on nodal fields of the verification solver
// with its full-Gauss element products. Used to cross-check against central
// differences of the solved objective.
struct OracleFields {
  Eigen::VectorXd u, v;   // mechanical primary / adjoint
  Eigen::VectorXd t, vt;  // thermal primary / adjoint
};
struct PropertyDerivatives {
  Eigen::VectorXd de;        // dE/drho per element
  Eigen::VectorXd dkappa;    // dkappa/drho
  Eigen::VectorXd dealpha;   // d(E alpha)/drho
  Eigen::VectorXd ds;        // ds/drho
};
Eigen::VectorXd element_sensitivities(ProblemClass cls,
                                      const grid::CollocationGrid& g,
                                      const OracleFields& f,
                                      const PropertyDerivatives& d, double nu,
                                      bool plane_stress, double thickness,
                                      const Scales& sc, double t_ref);

}  // namespace gptop::adjoint
