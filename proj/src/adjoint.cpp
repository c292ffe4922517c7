#include "gptop/adjoint.hpp"

namespace gptop::adjoint {

using ad::Var;

Scales default_scales(ProblemClass c) {
  Scales s;
  switch (c) {
    case ProblemClass::Compliance:
    case ProblemClass::ThermalCompliance:
      s.alpha_u = 1.0;
      break;
    case ProblemClass::Mechanism:
    case ProblemClass::ThermoDevice:
      s.alpha_u = 10.0;
      break;
  }
  s.alpha_t = 1.0;
  return s;
}

Var mech_loss(const physics::Quadrature& q, const physics::Strains& s,
              Var e_row, double nu, bool plane_stress,
              const std::vector<LoadTerm>& loads,
              const std::vector<SpringTerm>& springs, Var thermal_strain) {
  Var total =
      physics::elastic_energy(q, s, e_row, nu, plane_stress, thermal_strain);
  for (const auto& sp : springs)
    total = ad::add(total, physics::spring_energy(sp.proj, sp.k));
  for (const auto& ld : loads)
    total = ad::sub(total, ad::scale(ld.proj, ld.magnitude));
  return total;
}

Var heat_loss(const physics::Quadrature& q, const std::array<Var, 3>& grad_t,
              Var kappa_row, Var t_center, Var s_row, double source_density,
              double h_v, double t_inf) {
  Var total = physics::conduction_energy(q, grad_t, kappa_row);
  if (h_v > 0.0)
    total = ad::add(total, physics::convection_energy(q, t_center, h_v, t_inf));
  if (s_row.valid())
    total = ad::sub(total, physics::source_work(q, s_row, t_center, t_inf));
  if (source_density != 0.0) {
    Var excess = ad::add_const(t_center, -t_inf);
    total = ad::sub(
        total, ad::scale(ad::weighted_sum(excess, q.w), source_density));
  }
  return total;
}

Var adjoint_mech_loss(const physics::Quadrature& q, const physics::Strains& sv,
                      Var e_row, double nu, bool plane_stress,
                      const std::vector<SpringTerm>& springs_v,
                      const std::vector<Var>& springs_u_detached,
                      bool springs_use_primary, Var out_proj_v,
                      double alpha_u) {
  Var total = physics::elastic_energy(q, sv, e_row, nu, plane_stress);
  for (size_t i = 0; i < springs_v.size(); ++i) {
    if (springs_use_primary) {
      require(i < springs_u_detached.size(), "adjoint.springs",
              "primary spring projections missing");
      total = ad::add(total,
                      ad::scale(ad::cmul(springs_u_detached[i], springs_v[i].proj),
                                springs_v[i].k));
    } else {
      total = ad::add(total,
                      physics::spring_energy(springs_v[i].proj, springs_v[i].k));
    }
  }
  return ad::add(total, ad::scale(out_proj_v, 1.0 / alpha_u));
}

Var adjoint_heat_loss(const physics::Quadrature& q,
                      const std::array<Var, 3>& grad_vt, Var kappa_row,
                      Var vt_center, double h_v, Var coupling_row,
                      const Scales& sc) {
  Var total = physics::conduction_energy(q, grad_vt, kappa_row);
  if (h_v > 0.0)
    total = ad::add(total, physics::convection_energy(q, vt_center, h_v, 0.0));
  Var work = ad::weighted_sum(ad::cmul(coupling_row, vt_center), q.w);
  return ad::sub(total, ad::scale(work, sc.alpha_u / sc.alpha_t));
}

Var sens_compliance(const physics::Quadrature& q, const physics::Strains& su,
                    Var e_row, double nu, bool plane_stress, double alpha_u) {
  return ad::scale(
      physics::elastic_cross_energy(q, su, su, e_row, nu, plane_stress),
      -alpha_u);
}

Var sens_mechanism(const physics::Quadrature& q, const physics::Strains& su,
                   const physics::Strains& sv, Var e_row, double nu,
                   bool plane_stress, double alpha_u) {
  return ad::scale(
      physics::elastic_cross_energy(q, su, sv, e_row, nu, plane_stress),
      -alpha_u);
}

Var sens_heat(const physics::Quadrature& q, const std::array<Var, 3>& grad_t,
              Var kappa_row) {
  return ad::neg(physics::conduction_energy(q, grad_t, kappa_row));
}

Var sens_device(const physics::Quadrature& q, const physics::Strains& su,
                const physics::Strains& sv, const std::array<Var, 3>& grad_t,
                const std::array<Var, 3>& grad_vt, Var vt_center, Var e_row,
                Var kappa_row, Var alpha_row, Var s_row, Var dt_center,
                double nu, bool plane_stress, const Scales& sc) {
  // -alpha_u int (C(rho):(eps_u - alpha(rho) dT I)) : eps_v dV
  Var eps_th = ad::cmul(alpha_row, dt_center);
  Var mech = ad::scale(physics::elastic_cross_energy(q, su, sv, e_row, nu,
                                                     plane_stress, eps_th),
                       -sc.alpha_u);
  // -alpha_t int kappa(rho) grad T . grad vT dV
  Var cond = ad::scale(
      physics::conduction_cross_energy(q, grad_t, grad_vt, kappa_row),
      -sc.alpha_t);
  // +alpha_t int s(rho) vT dV
  Var src = ad::scale(
      ad::weighted_sum(ad::cmul(s_row, vt_center), q.w), sc.alpha_t);
  return ad::add(mech, ad::add(cond, src));
}

Eigen::VectorXd element_sensitivities(ProblemClass cls,
                                      const grid::CollocationGrid& g,
                                      const OracleFields& f,
                                      const PropertyDerivatives& d, double nu,
                                      bool plane_stress, double thickness,
                                      const Scales& sc, double t_ref) {
  const int ne = g.n_elems();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(ne);
  switch (cls) {
    case ProblemClass::Compliance: {
      Eigen::VectorXd p =
          fem::element_strain_product(g, f.u, f.u, nu, plane_stress, thickness);
      out = -sc.alpha_u * d.de.cwiseProduct(p);
      break;
    }
    case ProblemClass::ThermalCompliance: {
      Eigen::VectorXd p = fem::element_conduction_product(g, f.t, f.t, thickness);
      out = -0.5 * d.dkappa.cwiseProduct(p);
      break;
    }
    case ProblemClass::Mechanism: {
      Eigen::VectorXd p =
          fem::element_strain_product(g, f.u, f.v, nu, plane_stress, thickness);
      out = -sc.alpha_u * d.de.cwiseProduct(p);
      break;
    }
    case ProblemClass::ThermoDevice: {
      Eigen::VectorXd uv =
          fem::element_strain_product(g, f.u, f.v, nu, plane_stress, thickness);
      Eigen::VectorXd th = fem::element_thermal_coupling(
          g, f.v, f.t, t_ref, nu, plane_stress, thickness);
      Eigen::VectorXd tc =
          fem::element_conduction_product(g, f.t, f.vt, thickness);
      Eigen::VectorXd sp = fem::element_source_product(g, f.vt, thickness);
      out = -sc.alpha_u * d.de.cwiseProduct(uv) +
            sc.alpha_u * d.dealpha.cwiseProduct(th) -
            sc.alpha_t * d.dkappa.cwiseProduct(tc) +
            sc.alpha_t * d.ds.cwiseProduct(sp);
      break;
    }
  }
  return out;
}

}  // namespace gptop::adjoint
