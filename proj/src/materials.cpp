#include "gptop/materials.hpp"

namespace gptop::materials {

Eigen::VectorXd MaterialSet::property(double Phase::* field) const {
  Eigen::VectorXd v(n_phases());
  for (int i = 0; i < n_phases(); ++i) v[i] = phases[i].*field;
  return v;
}

Phase void_phase() {
  return Phase{"void", 1e-5, 1e-5, 0.0, 0.0, 0.0, 0.0};
}

Phase artificial_phase(int index) {
  switch (index) {
    case 1: return Phase{"m1", 0.4, 0.2, 0.5, 1.6, 0.0, 0.0};
    case 2: return Phase{"m2", 0.6, 0.5, 0.7, 1.2, 0.0, 0.0};
    case 3: return Phase{"m3", 1.0, 1.0, 1.0, 1.0, 0.0, 0.0};
  }
  fail("materials.index", "artificial phase index must be 1..3");
}

MaterialSet artificial_set(int n_materials) {
  require(n_materials == 1 || n_materials == 3, "materials.count",
          "artificial sets come as void+M3 or void+M1+M2+M3");
  MaterialSet set;
  set.phases.push_back(void_phase());
  if (n_materials == 1) {
    set.phases.push_back(artificial_phase(3));
  } else {
    for (int i = 1; i <= 3; ++i) set.phases.push_back(artificial_phase(i));
  }
  set.penalize_source = false;
  return set;
}

// Metals in (N, um, K, W) units: E in N/um^2, kappa in W/(um K), s in W/um^3.
// rho_bar is 1 so the mass constraint reads as a volume fraction.
Phase metal_phase(const std::string& name) {
  if (name == "Ni") return Phase{"Ni", 0.200, 9.07e-5, 1.0, 1.0, 1.5e-5, -4.5e-8};
  if (name == "Fe") return Phase{"Fe", 0.200, 6.00e-5, 1.0, 1.0, 1.2e-5, -4.5e-8};
  if (name == "Al") return Phase{"Al", 0.070, 2.37e-4, 1.0, 1.0, 2.3e-5, -4.5e-8};
  if (name == "Cu") return Phase{"Cu", 0.128, 4.00e-4, 1.0, 1.0, 1.7e-5, -4.5e-8};
  if (name == "Ti") return Phase{"Ti", 0.120, 2.59e-5, 1.0, 1.0, 8.6e-6, -4.5e-8};
  fail("materials.metal", "unknown metal '" + name + "'");
}

MaterialSet metal_set(const std::string& name) {
  MaterialSet set;
  set.phases.push_back(void_phase());
  set.phases.push_back(metal_phase(name));
  set.penalize_source = true;
  return set;
}

Eigen::VectorXd interpolate(const Eigen::MatrixXd& rho,
                            const Eigen::VectorXd& props, double p) {
  require(rho.rows() == props.size(), "materials.interpolate",
          "one density row per phase required");
  return (rho.array().pow(p).matrix().transpose() * props).transpose();
}

Eigen::MatrixXd constitutive_matrix(double e, double nu, int dim,
                                    bool plane_stress) {
  if (dim == 2) {
    Eigen::Matrix3d c;
    if (plane_stress) {
      const double f = e / (1.0 - nu * nu);
      c << f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, f * (1.0 - nu) / 2.0;
    } else {
      const double f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
      c << f * (1.0 - nu), f * nu, 0.0, f * nu, f * (1.0 - nu), 0.0, 0.0, 0.0,
          f * (1.0 - 2.0 * nu) / 2.0;
    }
    return c;
  }
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(6, 6);
  const double f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c(i, j) = i == j ? f * (1.0 - nu) : f * nu;
  for (int i = 3; i < 6; ++i) c(i, i) = f * (1.0 - 2.0 * nu) / 2.0;
  return c;
}

MassCost mass_and_cost(const Eigen::MatrixXd& rho_at_centers,
                       const MaterialSet& mats,
                       const shapefn::ElementGeometry& geom) {
  require(rho_at_centers.cols() == geom.detj.size(), "materials.mass",
          "densities must be sampled at element centers");
  MassCost mc;
  const Eigen::VectorXd rb = mats.property(&Phase::rho_bar);
  const Eigen::VectorXd pb = mats.property(&Phase::p_bar);
  mc.mass = geom.weights.dot(
      (rho_at_centers.transpose() * rb).eval());
  mc.cost = geom.weights.dot(
      (rho_at_centers.transpose() * pb).eval());
  return mc;
}

}  // namespace gptop::materials
