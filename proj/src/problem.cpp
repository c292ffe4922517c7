#include "gptop/problem.hpp"

#include <algorithm>
#include <map>

namespace gptop::problem {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

ProblemClass class_from_name(const std::string& s) {
  if (s == "compliance") return ProblemClass::Compliance;
  if (s == "thermal_compliance") return ProblemClass::ThermalCompliance;
  if (s == "mechanism") return ProblemClass::Mechanism;
  if (s == "thermo_device") return ProblemClass::ThermoDevice;
  fail("config.class", "unknown problem class '" + s + "'");
}

std::string class_name(ProblemClass c) {
  switch (c) {
    case ProblemClass::Compliance: return "compliance";
    case ProblemClass::ThermalCompliance: return "thermal_compliance";
    case ProblemClass::Mechanism: return "mechanism";
    case ProblemClass::ThermoDevice: return "thermo_device";
  }
  fail("config.class", "unhandled problem class");
}

materials::Phase phase_by_name(const std::string& name) {
  if (name == "void") return materials::void_phase();
  if (name == "m1") return materials::artificial_phase(1);
  if (name == "m2") return materials::artificial_phase(2);
  if (name == "m3") return materials::artificial_phase(3);
  return materials::metal_phase(name);
}

std::vector<std::string> ProblemSpec::validate() {
  std::vector<std::string> warnings;
  domain.validate();
  const int d = domain.dim;
  require(mats.n_phases() >= 2, "config.materials",
          "need the void phase plus at least one solid phase");
  require(mats.phases[0].rho_bar == 0.0 && mats.phases[0].p_bar == 0.0,
          "config.materials", "phase 0 must be the massless void");
  for (int a = 0; a < d; ++a) {
    require(coarse[a] >= 2 && fine[a] >= coarse[a], "config.grids",
            "per-axis node counts need fine >= coarse >= 2");
  }
  require(n_g >= 1, "config.grids", "n_g must be positive");
  require(train.n_tol >= 1, "config.train", "epoch budget must be positive");
  require(train.gamma > 0.0 && train.gamma <= 1.0, "config.train",
          "gamma must lie in (0, 1]");
  require(train.omega_m >= 0 && train.omega_t >= 0 && train.omega_v >= 0 &&
              train.omega_p >= 0,
          "config.train", "loss weights must be nonnegative");
  if (cls == ProblemClass::Mechanism || cls == ProblemClass::ThermoDevice)
    require(output.valid(), "config.output",
            "mechanism/device classes need an output point and direction");
  if (needs_thermal()) {
    const bool has_t = std::any_of(bcs.begin(), bcs.end(), [](const auto& b) {
      return b.kind == grid::BcKind::DirichletTemperature;
    });
    require(has_t || h_v > 0, "config.bcs",
            "thermal physics needs a prescribed temperature or convection");
  }

  // Reference mass/cost from the hypothetical densest/priciest full domain.
  grid::CollocationGrid probe = grid::build_grid(domain, fine);
  const double volume = probe.volume;  // area in 2D; mass excludes thickness
  double max_rho = 0.0, max_p = 0.0;
  for (const auto& ph : mats.phases) {
    max_rho = std::max(max_rho, ph.rho_bar);
    max_p = std::max(max_p, ph.p_bar);
  }
  const double m0_ref = volume * max_rho, p0_ref = volume * max_p;
  if (psi_m > 0) {
    if (m0 > 0 && std::abs(m0 - m0_ref) > 1e-6 * std::max(1.0, m0_ref)) {
      warnings.push_back("m0 " + std::to_string(m0) +
                         " inconsistent with domain capacity " +
                         std::to_string(m0_ref) + "; recomputed");
      m0 = m0_ref;
    }
    if (m0 <= 0) m0 = m0_ref;
  }
  if (psi_p > 0) {
    if (p0 > 0 && std::abs(p0 - p0_ref) > 1e-6 * std::max(1.0, p0_ref)) {
      warnings.push_back("p0 " + std::to_string(p0) +
                         " inconsistent with domain capacity " +
                         std::to_string(p0_ref) + "; recomputed");
      p0 = p0_ref;
    }
    if (p0 <= 0) p0 = p0_ref;
  }
  return warnings;
}

namespace {

int nearest_node(const grid::CollocationGrid& g, const Eigen::Vector3d& p) {
  int best = -1;
  double best_d = 0.0;
  for (int i = 0; i < g.n_nodes(); ++i) {
    const double d = (g.nodes.col(i) - p.head(g.dim)).squaredNorm();
    if (best < 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

// Gathered prescription points for one scalar field on the finest grid.
struct CondPoints {
  std::vector<int> nodes;
  std::vector<double> values;
};

void add_points(CondPoints& cp, const std::vector<int>& nodes, double value,
                const std::string& name) {
  for (int n : nodes) {
    auto it = std::find(cp.nodes.begin(), cp.nodes.end(), n);
    if (it != cp.nodes.end()) {
      const double prev = cp.values[it - cp.nodes.begin()];
      require(prev == value, "config.bcs",
              "conflicting prescriptions at a shared node in '" + name + "'");
      continue;
    }
    cp.nodes.push_back(n);
    cp.values.push_back(value);
  }
}

std::shared_ptr<gp::Conditioner> make_conditioner(
    const CondPoints& cp, const grid::CollocationGrid& fine,
    const Eigen::Vector3d& norm_scale, RowVectorXd* values_out) {
  if (cp.nodes.empty()) return nullptr;
  std::vector<int> keep =
      gp::thin_indices(int(cp.nodes.size()), kConditioningCap);
  MatrixXd x(fine.dim, int(keep.size()));
  RowVectorXd y(int(keep.size()));
  for (int j = 0; j < int(keep.size()); ++j) {
    const int n = cp.nodes[keep[j]];
    for (int a = 0; a < fine.dim; ++a)
      x(a, j) = fine.nodes(a, n) * norm_scale[a];
    y[j] = cp.values[keep[j]];
  }
  *values_out = y;
  return std::make_shared<gp::Conditioner>(gp::Kernel{}, std::move(x), y);
}

// Concatenated conditioning tail for one net: per-component offsets.
MatrixXd concat_cond(std::vector<FieldPrescription*> fields, int dim) {
  int total = 0;
  for (auto* f : fields)
    if (f->valid()) total += f->n();
  MatrixXd cat(dim, total);
  int off = 0;
  for (auto* f : fields) {
    if (!f->valid()) continue;
    f->offset = off;
    cat.middleCols(off, f->n()) = f->cond->x_cond();
    off += f->n();
  }
  return cat;
}

}  // namespace

Eigen::MatrixXd Assembled::normalize(const Eigen::MatrixXd& pts) const {
  MatrixXd out = pts;
  for (int a = 0; a < out.rows(); ++a) out.row(a) *= norm_scale[a];
  return out;
}

Assembled assemble(const ProblemSpec& spec_in) {
  Assembled a;
  a.spec = spec_in;
  a.spec.validate();
  const ProblemSpec& spec = a.spec;
  const int d = spec.domain.dim;

  a.family = grid::build_grid_family(spec.domain, spec.coarse, spec.fine,
                                     spec.n_g);
  for (int ax = 0; ax < 3; ++ax)
    a.norm_scale[ax] = ax < d ? 1.0 / spec.domain.lengths[ax] : 1.0;
  a.scales = adjoint::default_scales(spec.cls);

  // Conditioning point sets live on the finest grid.
  const grid::CollocationGrid& fine = a.family.finest();
  auto tags = grid::tag_boundaries(fine, spec.bcs);
  std::array<CondPoints, 3> u_pts;
  CondPoints t_pts;
  std::vector<CondPoints> rho_pts(spec.mats.n_phases());
  for (const auto& tag : tags) {
    switch (tag.bc.kind) {
      case grid::BcKind::DirichletDisplacement:
        for (int c = 0; c < d; ++c)
          if (tag.bc.component == c || tag.bc.component < 0)
            add_points(u_pts[c], tag.nodes, tag.bc.value, tag.bc.name);
        break;
      case grid::BcKind::DirichletTemperature:
        add_points(t_pts, tag.nodes, tag.bc.value, tag.bc.name);
        break;
      case grid::BcKind::DirichletDensity:
        require(int(tag.bc.density_value.size()) == spec.mats.n_phases(),
                "config.bcs", "density prescription needs one value per phase");
        for (int i = 0; i < spec.mats.n_phases(); ++i)
          add_points(rho_pts[i], tag.nodes, tag.bc.density_value[i],
                     tag.bc.name);
        break;
      default:
        break;  // point loads/springs/flux handled per grid
    }
  }

  for (int c = 0; c < d; ++c) {
    RowVectorXd y;
    auto cond = make_conditioner(u_pts[c], fine, a.norm_scale, &y);
    if (!cond) continue;
    a.u_cond[c] = {cond, y, 0};
    if (spec.needs_adjoint_mech())
      a.v_cond[c] = {cond, RowVectorXd::Zero(y.size()), 0};
  }
  {
    RowVectorXd y;
    auto cond = make_conditioner(t_pts, fine, a.norm_scale, &y);
    if (cond) {
      a.t_cond = {cond, y, 0};
      if (spec.needs_adjoint_thermal())
        a.vt_cond = {cond, RowVectorXd::Zero(y.size()), 0};
    }
  }
  a.rho_cond.resize(spec.mats.n_phases());
  for (int i = 0; i < spec.mats.n_phases(); ++i) {
    RowVectorXd y;
    auto cond = make_conditioner(rho_pts[i], fine, a.norm_scale, &y);
    if (cond) a.rho_cond[i] = {cond, y, 0};
  }

  // Networks, constructed in a fixed order from one seeded stream.
  std::mt19937_64 rng(spec.train.seed);
  nn::PgcanConfig base;
  base.dim = d;
  base.n_rep = spec.net.n_rep;
  base.n_f = spec.net.n_f;
  base.res = spec.net.res;
  base.lengths = spec.domain.lengths;
  if (d == 2) base.lengths[2] = 0.0;
  auto make_net = [&](int out_dim, nn::OutTransform tr, double scale,
                      double offset) {
    nn::PgcanConfig cfg = base;
    cfg.out_dim = out_dim;
    cfg.transform = tr;
    cfg.out_scale = scale;
    cfg.out_offset = offset;
    return std::make_unique<nn::PgcanNet>(cfg, rng);
  };
  if (spec.needs_mechanical())
    a.u_net = make_net(d, nn::OutTransform::Identity, 1, 0);
  if (spec.needs_thermal())
    a.t_net = make_net(1, nn::OutTransform::Scaled, spec.net.t_scale,
                       spec.net.t_offset);
  a.rho_net = make_net(spec.mats.n_phases(), nn::OutTransform::Softmax, 1, 0);
  if (spec.needs_adjoint_mech())
    a.v_net = make_net(d, nn::OutTransform::Identity, 1, 0);
  if (spec.needs_adjoint_thermal())
    a.vt_net = make_net(1, nn::OutTransform::Scaled, spec.net.t_scale, 0);

  // Per-grid caches.
  MatrixXd mech_tail, thermal_tail, rho_tail;
  {
    std::vector<FieldPrescription*> mech_fields;
    for (int c = 0; c < 3; ++c) mech_fields.push_back(&a.u_cond[c]);
    mech_tail = concat_cond(mech_fields, d);
    for (int c = 0; c < 3; ++c) a.v_cond[c].offset = a.u_cond[c].offset;
    thermal_tail = concat_cond({&a.t_cond}, d);
    a.vt_cond.offset = a.t_cond.offset;
    std::vector<FieldPrescription*> rho_fields;
    for (auto& f : a.rho_cond) rho_fields.push_back(&f);
    rho_tail = concat_cond(rho_fields, d);
  }
  if (spec.needs_thermal() && a.t_cond.valid()) {
    // Start the temperature mean at t_init (default: prescription mean) so
    // the initial field is compatible with the hot/cold boundary data.
    const double t_init = spec.net.t_init != 0.0 ? spec.net.t_init
                                                 : a.t_cond.values.mean();
    const grid::CollocationGrid& coarse = a.family.grids.front();
    const MatrixXd q = a.normalize(coarse.nodes);
    a.t_net->shift_output_bias(
        (t_init - spec.net.t_offset) / spec.net.t_scale, q);
  }

  a.cache.resize(a.family.size());
  for (int g = 0; g < a.family.size(); ++g) {
    const grid::CollocationGrid& grd = a.family.grids[g];
    GridCache& c = a.cache[g];
    c.n_nodes = grd.n_nodes();
    c.n_elems = grd.n_elems();
    c.quad = physics::build_quadrature(grd, spec.domain.thickness);

    auto gtags = grid::tag_boundaries(grd, spec.bcs);
    for (const auto& tag : gtags) {
      if (tag.bc.kind == grid::BcKind::PointLoad) {
        c.points.loads.emplace_back(tag.nodes[0],
                                    tag.bc.direction * tag.bc.value);
      } else if (tag.bc.kind == grid::BcKind::PointSpring) {
        c.points.springs.push_back(
            {tag.nodes[0], tag.bc.direction, tag.bc.stiffness});
      }
    }
    if (spec.output.valid())
      c.points.output_node = nearest_node(grd, spec.output.at);

    const MatrixXd nodes_n = a.normalize(grd.nodes);
    const MatrixXd centers_n = a.normalize(grd.centers);
    auto with_tail = [&](const MatrixXd& q, const MatrixXd& tail) {
      MatrixXd cat(q.rows(), q.cols() + tail.cols());
      cat.leftCols(q.cols()) = q;
      if (tail.cols() > 0) cat.rightCols(tail.cols()) = tail;
      return cat;
    };
    if (a.u_net) {
      const MatrixXd q = with_tail(nodes_n, mech_tail);
      c.ops_mech = a.u_net->build_encoder_ops(q);
      if (a.v_net)
        require(a.v_net->vertices() == a.u_net->vertices(), "problem.net",
                "adjoint net must share the primary encoder lattice");
    }
    if (a.t_net) {
      const MatrixXd q = with_tail(nodes_n, thermal_tail);
      c.ops_thermal = a.t_net->build_encoder_ops(q);
      if (a.vt_net)
        require(a.vt_net->vertices() == a.t_net->vertices(), "problem.net",
                "adjoint net must share the primary encoder lattice");
    }
    c.ops_rho = a.rho_net->build_encoder_ops(with_tail(centers_n, rho_tail));

    for (int comp = 0; comp < 3; ++comp)
      if (a.u_cond[comp].valid())
        a.u_cond[comp].cond->cache_weights(g, nodes_n);
    if (a.t_cond.valid()) a.t_cond.cond->cache_weights(g, nodes_n);
    for (auto& f : a.rho_cond)
      if (f.valid()) f.cond->cache_weights(g, centers_n);
  }
  return a;
}

namespace {

// Plain (tape-free) conditioned evaluation of one net over grid queries.
// raw: out_dim x (n_q + tail); fields: per-row prescriptions.
MatrixXd condition_plain(const MatrixXd& raw, int n_q,
                         const std::vector<const FieldPrescription*>& fields,
                         int slot) {
  MatrixXd out = raw.leftCols(n_q);
  for (int r = 0; r < int(fields.size()); ++r) {
    const FieldPrescription* f = fields[r];
    if (!f || !f->valid()) continue;
    const RowVectorXd mean_cond =
        raw.row(r).segment(n_q + f->offset, f->n());
    out.row(r) += (f->values - mean_cond) * f->cond->cached_weights(slot);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd Assembled::density_at_centers(int g) const {
  const grid::CollocationGrid& grd = family.grids[g];
  MatrixXd tail(dim(), 0);
  {
    int total = 0;
    for (const auto& f : rho_cond)
      if (f.valid()) total += f.n();
    tail.resize(dim(), total);
    for (const auto& f : rho_cond)
      if (f.valid()) tail.middleCols(f.offset, f.n()) = f.cond->x_cond();
  }
  MatrixXd q(dim(), grd.n_elems() + tail.cols());
  q.leftCols(grd.n_elems()) = normalize(grd.centers);
  if (tail.cols() > 0) q.rightCols(tail.cols()) = tail;
  const MatrixXd raw = rho_net->evaluate(q);
  std::vector<const FieldPrescription*> fields;
  bool any = false;
  for (const auto& f : rho_cond) {
    fields.push_back(&f);
    any = any || f.valid();
  }
  MatrixXd out = condition_plain(raw, grd.n_elems(), fields, g);
  // Match the training-side clamp of conditioned density rows.
  if (any) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

Eigen::MatrixXd Assembled::displacement_at_nodes(int g) const {
  require(u_net != nullptr, "problem.fields", "no displacement net");
  const grid::CollocationGrid& grd = family.grids[g];
  int total = 0;
  for (const auto& f : u_cond)
    if (f.valid()) total += f.n();
  MatrixXd q(dim(), grd.n_nodes() + total);
  q.leftCols(grd.n_nodes()) = normalize(grd.nodes);
  for (const auto& f : u_cond)
    if (f.valid()) q.middleCols(grd.n_nodes() + f.offset, f.n()) =
        f.cond->x_cond();
  const MatrixXd raw = u_net->evaluate(q);
  std::vector<const FieldPrescription*> fields;
  for (const auto& f : u_cond) fields.push_back(&f);
  fields.resize(dim());
  return condition_plain(raw, grd.n_nodes(), fields, g);
}

Eigen::VectorXd Assembled::temperature_at_nodes(int g) const {
  require(t_net != nullptr, "problem.fields", "no temperature net");
  const grid::CollocationGrid& grd = family.grids[g];
  const int nc = t_cond.valid() ? t_cond.n() : 0;
  MatrixXd q(dim(), grd.n_nodes() + nc);
  q.leftCols(grd.n_nodes()) = normalize(grd.nodes);
  if (nc > 0) q.rightCols(nc) = t_cond.cond->x_cond();
  const MatrixXd raw = t_net->evaluate(q);
  return condition_plain(raw, grd.n_nodes(), {&t_cond}, g).row(0).transpose();
}

fem::EvalCase oracle_case(const ProblemSpec& spec,
                          const grid::CollocationGrid& g) {
  fem::EvalCase c;
  c.problem_class = spec.cls;
  c.source_density = spec.source_density;
  c.t_ref = spec.t_ref;
  c.thickness = spec.domain.thickness;
  c.thermal.h_v = spec.h_v;
  c.thermal.t_ambient = spec.t_inf;
  auto tags = grid::tag_boundaries(g, spec.bcs);
  for (const auto& tag : tags) {
    switch (tag.bc.kind) {
      case grid::BcKind::DirichletDisplacement:
        for (int comp = 0; comp < g.dim; ++comp)
          if (tag.bc.component == comp || tag.bc.component < 0) {
            if (tag.bc.value == 0.0)
              for (int n : tag.nodes) c.mech.fixed[comp].push_back(n);
            else
              for (int n : tag.nodes)
                c.mech.prescribed.emplace_back(n, comp, tag.bc.value);
          }
        break;
      case grid::BcKind::DirichletTemperature:
        for (int n : tag.nodes) c.thermal.fixed.emplace_back(n, tag.bc.value);
        break;
      case grid::BcKind::PointLoad:
        c.mech.loads.emplace_back(tag.nodes[0],
                                  tag.bc.direction * tag.bc.value);
        break;
      case grid::BcKind::PointSpring:
        c.mech.springs.push_back(
            {tag.nodes[0], tag.bc.direction, tag.bc.stiffness});
        break;
      default:
        break;
    }
  }
  if (spec.output.valid()) {
    c.output_node = nearest_node(g, spec.output.at);
    c.output_dir = spec.output.direction;
  }
  return c;
}

materials::MassCost mass_cost_of(const Eigen::MatrixXd& rho,
                                 const physics::Quadrature& quad,
                                 const materials::MaterialSet& mats) {
  require(rho.rows() == mats.n_phases() && rho.cols() == quad.w_geo.size(),
          "problem.mass", "density shape mismatch");
  materials::MassCost mc;
  const RowVectorXd m =
      mats.property(&materials::Phase::rho_bar).transpose() * rho;
  const RowVectorXd p =
      mats.property(&materials::Phase::p_bar).transpose() * rho;
  mc.mass = (m.array() * quad.w_geo.array()).sum();
  mc.cost = (p.array() * quad.w_geo.array()).sum();
  return mc;
}

}  // namespace gptop::problem
