#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gptop/adjoint.hpp"
#include "gptop/fem.hpp"
#include "gptop/gp_field.hpp"
#include "gptop/grid.hpp"
#include "gptop/materials.hpp"
#include "gptop/pgcan.hpp"
#include "gptop/physics.hpp"

namespace gptop::problem {

// Conditioning sets larger than this are thinned uniformly before the
// kernel factorization.
inline constexpr int kConditioningCap = 600;

struct TrainConfig {
  int n_tol = 5000;
  double gamma = 0.5;  // constraint-ramp fraction of the epoch budget
  double omega_m = 1.0, omega_t = 1.0, omega_v = 100.0, omega_p = 100.0;
  double lr = 1e-3;
  double lr_drop = 0.75;  // four evenly spaced drops
  double penal_final = 3.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  bool adjoint_spring_uses_primary = false;
};

struct NetConfig {
  int n_rep = 3;
  int n_f = 32;
  int res = 36;
  double t_scale = 1.0;  // temperature head: raw * t_scale + t_offset
  double t_offset = 0.0;
  double t_init = 0.0;   // initial mean temperature (bias shift before training)
};

struct OutputTarget {
  Eigen::Vector3d at = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();
  bool valid() const { return direction.norm() > 0.0; }
};

struct ProblemSpec {
  std::string name;
  ProblemClass cls = ProblemClass::Compliance;
  grid::Domain domain;
  materials::MaterialSet mats;
  std::vector<grid::BoundaryCondition> bcs;
  OutputTarget output;

  // Physics constants.
  double h_v = 0.0;
  double t_inf = 0.0;  // ambient for convection and source work
  double t_ref = 0.0;  // stress-free temperature for thermal strain
  double source_density = 0.0;  // uniform design-independent volumetric source
  bool isothermal_adjoint = false;  // device shortcut: no thermal adjoint field

  // Constraints; fractions <= 0 disable the corresponding penalty.
  double psi_m = -1.0;
  double psi_p = -1.0;
  double m0 = 0.0;  // 0 -> volume * max rho_bar
  double p0 = 0.0;

  Eigen::Vector3i coarse = {0, 0, 1};
  Eigen::Vector3i fine = {0, 0, 1};
  int n_g = 1;

  NetConfig net;
  TrainConfig train;

  bool needs_thermal() const {
    return cls == ProblemClass::ThermalCompliance ||
           cls == ProblemClass::ThermoDevice;
  }
  bool needs_mechanical() const { return cls != ProblemClass::ThermalCompliance; }
  bool needs_adjoint_mech() const {
    return cls == ProblemClass::Mechanism || cls == ProblemClass::ThermoDevice;
  }
  bool needs_adjoint_thermal() const {
    return cls == ProblemClass::ThermoDevice && !isothermal_adjoint;
  }

  // Fills m0/p0 from the domain when unset, checks shapes and referenced
  // regions; returns human-readable warnings (kept, not fatal).
  std::vector<std::string> validate();
};

ProblemClass class_from_name(const std::string& s);
std::string class_name(ProblemClass c);

// Catalog lookup: "void", "m1".."m3", metal names.
materials::Phase phase_by_name(const std::string& name);

// A scalar field's boundary prescription: shared kernel-weight cache plus
// the field-specific values (adjoint fields reuse the cache with zeros).
struct FieldPrescription {
  std::shared_ptr<gp::Conditioner> cond;
  Eigen::RowVectorXd values;
  int offset = 0;  // column offset into the owning net's conditioning tail
  bool valid() const { return cond != nullptr; }
  int n() const { return cond ? cond->n_cond() : 0; }
};

// Point terms snapped onto one grid.
struct SnappedPoints {
  std::vector<std::pair<int, Eigen::Vector3d>> loads;  // node, force
  std::vector<fem::Spring> springs;
  int output_node = -1;
};

// Immutable per-grid caches; sparse operators referenced by tape closures,
// so the Assembled object must outlive every training tape.
struct GridCache {
  physics::Quadrature quad;
  SnappedPoints points;
  nn::EncoderOps ops_mech;     // [nodes | mech conditioning tail]
  nn::EncoderOps ops_thermal;  // [nodes | thermal conditioning tail]
  nn::EncoderOps ops_rho;      // [centers | density conditioning tail]
  int n_nodes = 0, n_elems = 0;
};

struct Assembled {
  ProblemSpec spec;
  grid::GridFamily family;
  adjoint::Scales scales;
  Eigen::Vector3d norm_scale = Eigen::Vector3d::Ones();  // 1/length per axis

  std::unique_ptr<nn::PgcanNet> u_net, t_net, rho_net, v_net, vt_net;

  std::array<FieldPrescription, 3> u_cond, v_cond;
  FieldPrescription t_cond, vt_cond;
  std::vector<FieldPrescription> rho_cond;  // per phase; invalid = free

  std::vector<GridCache> cache;  // per family grid

  int dim() const { return family.domain.dim; }
  const grid::CollocationGrid& finest() const { return family.finest(); }

  // Normalized ([0,1] per axis) copies of physical points.
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& pts) const;

  // Tape-free density evaluation (softmax mean + conditioning) at the
  // centers of family grid g: n_phases x n_elems.
  Eigen::MatrixXd density_at_centers(int g) const;

  // Tape-free nodal field evaluation for diagnostics/export; rows follow the
  // net's outputs, conditioned per component.
  Eigen::MatrixXd displacement_at_nodes(int g) const;
  Eigen::VectorXd temperature_at_nodes(int g) const;
};

// Builds grids, conditioners (finest-grid boundary nodes, capped via uniform
// thinning), nets, and per-grid operator caches. Networks are initialized
// from the spec seed; assembly draws nothing else from the stream.
Assembled assemble(const ProblemSpec& spec);

// Oracle-side view of the same problem on one grid: Dirichlet/load/spring
// node sets and the evaluation recipe for binarized designs.
fem::EvalCase oracle_case(const ProblemSpec& spec,
                          const grid::CollocationGrid& g);

// Linear mass/cost of a density field at the centers of grid g.
materials::MassCost mass_cost_of(const Eigen::MatrixXd& rho,
                                 const physics::Quadrature& quad,
                                 const materials::MaterialSet& mats);

}  // namespace gptop::problem
