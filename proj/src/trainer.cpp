#include "gptop/trainer.hpp"

#include <cmath>

namespace gptop::trainer {

using ad::Var;
using Eigen::MatrixXd;

double scheduled_fraction(int n, double psi0, double psil, double gamma,
                          int n_tol) {
  const double ramp = gamma * double(n_tol);
  if (double(n) >= ramp) return psil;
  return (psil - psi0) / ramp * double(n) + psi0;
}

double penal_schedule(int n, int n_tol, double p_final) {
  const double ramp = 0.5 * double(n_tol);
  if (double(n) >= ramp) return p_final;
  return 1.0 + (p_final - 1.0) / ramp * double(n);
}

DesignExtract design_metrics(const Eigen::MatrixXd& rho) {
  const int np = int(rho.rows()), ne = int(rho.cols());
  DesignExtract d;
  d.rho = rho;
  d.phase.resize(ne);
  d.gray_phase = Eigen::VectorXd::Zero(np);
  int undecided = 0;
  for (int e = 0; e < ne; ++e) {
    int best = 0;
    rho.col(e).maxCoeff(&best);
    d.phase[e] = best;
    if (rho.col(e).maxCoeff() < 0.9) ++undecided;
    for (int i = 0; i < np; ++i)
      if (rho(i, e) > 0.1 && rho(i, e) < 0.9) d.gray_phase[i] += 1.0;
  }
  d.gray_phase /= double(ne);
  d.gray_total = double(undecided) / double(ne);
  return d;
}

namespace {

physics::Strains detach_strains(const physics::Strains& s) {
  physics::Strains d;
  d.e11 = ad::detach(s.e11);
  d.e22 = ad::detach(s.e22);
  d.g12 = ad::detach(s.g12);
  if (s.e33.valid()) {
    d.e33 = ad::detach(s.e33);
    d.g23 = ad::detach(s.g23);
    d.g13 = ad::detach(s.g13);
  }
  return d;
}

std::array<Var, 3> detach_grads(const std::array<Var, 3>& g) {
  std::array<Var, 3> d;
  for (int a = 0; a < 3; ++a)
    if (g[a].valid()) d[a] = ad::detach(g[a]);
  return d;
}

double val1(const Var& v) { return v.valid() ? v.val()(0, 0) : 0.0; }

}  // namespace

Trainer::Trainer(problem::Assembled assembled) : asm_(std::move(assembled)) {
  for (nn::PgcanNet* n : {asm_.u_net.get(), asm_.t_net.get(),
                          asm_.rho_net.get(), asm_.v_net.get(),
                          asm_.vt_net.get()})
    if (n) nets_.push_back(n);
  adam_.resize(nets_.size());
  adam_cfg_.lr = asm_.spec.train.lr;
  adam_cfg_.decay_factor = asm_.spec.train.lr_drop;
  // Distinct stream from network initialization, which used the raw seed.
  rng_.seed(asm_.spec.train.seed ^ 0x9E3779B97F4A7C15ull);
}

void Trainer::freeze_density(
    std::function<Eigen::MatrixXd(const grid::CollocationGrid&)> field) {
  frozen_ = std::move(field);
  fractions_ready_ = true;  // no density constraints in frozen mode
}

struct Trainer::Forward {
  std::array<Var, 3> u{}, v{};
  Var t, vt, rho;
  std::vector<std::vector<int>> pids;  // aligned with nets_
};

Trainer::Forward Trainer::forward_fields(ad::Tape& tp, int g,
                                         double /*penal*/) const {
  const problem::GridCache& c = asm_.cache[g];
  const int d = asm_.dim();
  Forward f;
  f.pids.resize(nets_.size());

  auto slot_of = [&](const nn::PgcanNet* net) {
    for (size_t i = 0; i < nets_.size(); ++i)
      if (nets_[i] == net) return int(i);
    fail("trainer.net", "network not registered");
  };
  auto run_net = [&](const nn::PgcanNet* net, const nn::EncoderOps& ops) {
    nn::EmittedNet em = net->forward(tp, ops);
    f.pids[slot_of(net)] = em.param_ids;
    return em.out;
  };
  // field(Q) = mean(Q) + (y - mean(X)) W, sliced out of one net evaluation
  // over [queries | conditioning tail] so both terms share parameters.
  auto conditioned = [&](Var full, int row, int n_q,
                         const problem::FieldPrescription& p) {
    Var mean_q = ad::cols(ad::rows(full, row, 1), 0, n_q);
    if (!p.valid()) return mean_q;
    Var mean_c = ad::cols(ad::rows(full, row, 1), n_q + p.offset, p.n());
    return gp::condition(mean_q, mean_c, p.values, p.cond->cached_weights(g));
  };

  if (asm_.u_net) {
    Var full = run_net(asm_.u_net.get(), c.ops_mech);
    for (int comp = 0; comp < d; ++comp)
      f.u[comp] = conditioned(full, comp, c.n_nodes, asm_.u_cond[comp]);
  }
  if (asm_.v_net) {
    Var full = run_net(asm_.v_net.get(), c.ops_mech);
    for (int comp = 0; comp < d; ++comp)
      f.v[comp] = conditioned(full, comp, c.n_nodes, asm_.v_cond[comp]);
  }
  if (asm_.t_net) {
    Var full = run_net(asm_.t_net.get(), c.ops_thermal);
    f.t = conditioned(full, 0, c.n_nodes, asm_.t_cond);
  }
  if (asm_.vt_net) {
    Var full = run_net(asm_.vt_net.get(), c.ops_thermal);
    f.vt = conditioned(full, 0, c.n_nodes, asm_.vt_cond);
  }

  if (frozen_) {
    MatrixXd r = frozen_(asm_.family.grids[g]);
    require(r.rows() == asm_.spec.mats.n_phases() && r.cols() == c.n_elems,
            "trainer.frozen", "frozen density shape mismatch");
    f.rho = tp.constant(std::move(r));
  } else {
    Var full = run_net(asm_.rho_net.get(), c.ops_rho);
    bool any_cond = false;
    for (const auto& p : asm_.rho_cond) any_cond = any_cond || p.valid();
    if (!any_cond) {
      f.rho = ad::cols(full, 0, c.n_elems);
    } else {
      std::vector<Var> rows;
      for (int i = 0; i < asm_.spec.mats.n_phases(); ++i)
        rows.push_back(conditioned(full, i, c.n_elems, asm_.rho_cond[i]));
      // Conditioning can overshoot outside [0,1] away from the prescribed
      // points; fractional penalization powers require nonnegative density.
      f.rho = ad::clamp01(ad::vstack(rows));
    }
  }
  return f;
}

void Trainer::estimate_initial_fractions() {
  const problem::ProblemSpec& spec = asm_.spec;
  if (!frozen_ && (spec.psi_m > 0 || spec.psi_p > 0)) {
    const MatrixXd rho0 = asm_.density_at_centers(0);
    const materials::MassCost mc =
        problem::mass_cost_of(rho0, asm_.cache[0].quad, spec.mats);
    if (spec.psi_m > 0) psi_m0_ = mc.mass / spec.m0;
    if (spec.psi_p > 0) psi_p0_ = mc.cost / spec.p0;
  }
  fractions_ready_ = true;
}

int Trainer::sample_grid() { return grid::sample_grid(asm_.family, rng_); }

EpochRecord Trainer::step(int epoch, int g) {
  return step_impl(epoch, g, /*update=*/true, nullptr);
}

Trainer::GradientProbe Trainer::probe_gradients(int epoch, int g) {
  GradientProbe probe;
  probe.loss = step_impl(epoch, g, /*update=*/false, &probe).loss.total;
  return probe;
}

EpochRecord Trainer::step_impl(int epoch, int g, bool update,
                               GradientProbe* probe) {
  const problem::ProblemSpec& spec = asm_.spec;
  const problem::TrainConfig& tr = spec.train;
  const problem::GridCache& cache = asm_.cache[g];
  const physics::Quadrature& q = cache.quad;
  const materials::MaterialSet& mats = spec.mats;
  const double nu = mats.nu;
  const bool ps = mats.plane_stress;
  const adjoint::Scales& sc = asm_.scales;
  const bool frozen = bool(frozen_);
  if (!fractions_ready_) estimate_initial_fractions();

  const double p_n =
      frozen ? tr.penal_final : penal_schedule(epoch, tr.n_tol, tr.penal_final);

  ad::Tape tp;
  Forward f = forward_fields(tp, g, p_n);

  // Penalized property rows; the detached copies feed equilibrium losses,
  // the live ones only the sensitivity functional.
  Var e_live, e_det, k_live, k_det, a_live, a_det, s_live, s_det;
  if (spec.needs_mechanical()) {
    e_live = physics::property_row(f.rho, mats.property(&materials::Phase::e),
                                   p_n);
    e_det = ad::detach(e_live);
  }
  if (spec.needs_thermal()) {
    k_live = physics::property_row(
        f.rho, mats.property(&materials::Phase::kappa), p_n);
    k_det = ad::detach(k_live);
  }
  if (spec.cls == ProblemClass::ThermoDevice) {
    a_live = physics::property_row(
        f.rho, mats.property(&materials::Phase::alpha), p_n);
    a_det = ad::detach(a_live);
    s_live = physics::property_row(f.rho, mats.property(&materials::Phase::s),
                                   p_n);
    s_det = ad::detach(s_live);
  }

  EpochRecord rec;
  rec.epoch = epoch;
  rec.grid = g;
  rec.penal = p_n;

  std::vector<Var> weighted;  // terms of the total loss

  // --- primary thermal equilibrium ---
  physics::Strains su, su_det;
  std::array<Var, 3> gt, gt_det;
  Var t_c, dt_c_det;
  if (spec.needs_thermal()) {
    gt = physics::gradient_rows(q, f.t);
    gt_det = detach_grads(gt);
    t_c = physics::center_values(q, f.t);
    Var cond = physics::conduction_energy(q, gt, k_det);
    Var loss_t = cond;
    Var conv, src;
    if (spec.h_v > 0) {
      conv = physics::convection_energy(q, t_c, spec.h_v, spec.t_inf);
      loss_t = ad::add(loss_t, conv);
    }
    if (mats.penalize_source && s_det.valid()) {
      src = physics::source_work(q, s_det, t_c, spec.t_inf);
      loss_t = ad::sub(loss_t, src);
    }
    if (spec.source_density != 0.0) {
      Var uni = ad::scale(
          ad::weighted_sum(ad::add_const(t_c, -spec.t_inf), q.w),
          spec.source_density);
      src = src.valid() ? ad::add(src, uni) : uni;
      loss_t = ad::sub(loss_t, uni);
    }
    rec.loss.thermal = val1(loss_t);
    rec.energy.thermal = val1(cond);
    rec.energy.convection = val1(conv);
    rec.energy.source = val1(src);
    weighted.push_back(ad::scale(loss_t, tr.omega_t));
    dt_c_det = ad::add_const(ad::detach(t_c), -spec.t_ref);
  }

  // --- primary mechanical equilibrium ---
  if (spec.needs_mechanical()) {
    su = physics::strain_rows(q, f.u[0], f.u[1], f.u[2]);
    su_det = detach_strains(su);
    Var eps_th_det;
    if (spec.cls == ProblemClass::ThermoDevice)
      eps_th_det = ad::cmul(a_det, dt_c_det);  // one-way thermal coupling
    Var strain = physics::elastic_energy(q, su, e_det, nu, ps, eps_th_det);
    Var loss_m = strain;
    Var spring, work;
    for (const auto& sp : cache.points.springs) {
      Var pe = physics::spring_energy(
          physics::point_value(f.u[0], f.u[1], f.u[2], sp.node, sp.dir), sp.k);
      spring = spring.valid() ? ad::add(spring, pe) : pe;
    }
    if (spring.valid()) loss_m = ad::add(loss_m, spring);
    for (const auto& [node, force] : cache.points.loads) {
      Var w = physics::point_value(f.u[0], f.u[1], f.u[2], node, force);
      work = work.valid() ? ad::add(work, w) : w;
    }
    if (work.valid()) loss_m = ad::sub(loss_m, work);
    rec.loss.mech = val1(loss_m);
    rec.energy.strain = val1(strain);
    rec.energy.spring = val1(spring);
    rec.energy.external_work = val1(work);
    weighted.push_back(ad::scale(loss_m, tr.omega_m));
  }

  // --- adjoint mechanical potential ---
  physics::Strains sv_det;
  if (spec.needs_adjoint_mech()) {
    physics::Strains sv = physics::strain_rows(q, f.v[0], f.v[1], f.v[2]);
    sv_det = detach_strains(sv);
    std::vector<adjoint::SpringTerm> springs_v;
    std::vector<Var> springs_u_det;
    for (const auto& sp : cache.points.springs) {
      springs_v.push_back(
          {physics::point_value(f.v[0], f.v[1], f.v[2], sp.node, sp.dir),
           sp.k});
      if (tr.adjoint_spring_uses_primary)
        springs_u_det.push_back(ad::detach(
            physics::point_value(f.u[0], f.u[1], f.u[2], sp.node, sp.dir)));
    }
    Var out_v = physics::point_value(f.v[0], f.v[1], f.v[2],
                                     cache.points.output_node,
                                     spec.output.direction);
    Var loss_ma = adjoint::adjoint_mech_loss(
        q, sv, e_det, nu, ps, springs_v, springs_u_det,
        tr.adjoint_spring_uses_primary, out_v, sc.alpha_u);
    rec.loss.mech_adj = val1(loss_ma);
    weighted.push_back(ad::scale(loss_ma, tr.omega_m));
  }

  // --- adjoint thermal potential ---
  std::array<Var, 3> gvt_det;
  Var vt_c_det;
  if (spec.needs_adjoint_thermal()) {
    std::array<Var, 3> gvt = physics::gradient_rows(q, f.vt);
    gvt_det = detach_grads(gvt);
    Var vt_c = physics::center_values(q, f.vt);
    vt_c_det = ad::detach(vt_c);
    Var coupling_det =
        ad::cmul(a_det, physics::stress_trace_row(q, sv_det, e_det, nu, ps));
    Var loss_ta = adjoint::adjoint_heat_loss(q, gvt, k_det, vt_c, spec.h_v,
                                             coupling_det, sc);
    rec.loss.thermal_adj = val1(loss_ta);
    weighted.push_back(ad::scale(loss_ta, tr.omega_t));
  }

  // --- sensitivity functional: the only density-gradient carrier ---
  if (!frozen) {
    Var sens;
    switch (spec.cls) {
      case ProblemClass::Compliance:
        sens = adjoint::sens_compliance(q, su_det, e_live, nu, ps, sc.alpha_u);
        break;
      case ProblemClass::ThermalCompliance:
        sens = adjoint::sens_heat(q, gt_det, k_live);
        break;
      case ProblemClass::Mechanism:
        sens = adjoint::sens_mechanism(q, su_det, sv_det, e_live, nu, ps,
                                       sc.alpha_u);
        break;
      case ProblemClass::ThermoDevice: {
        std::array<Var, 3> gvt_use = gvt_det;
        Var vt_c_use = vt_c_det;
        if (spec.isothermal_adjoint) {
          for (int a = 0; a < asm_.dim(); ++a)
            gvt_use[a] = tp.constant(MatrixXd::Zero(1, cache.n_elems));
          vt_c_use = tp.constant(MatrixXd::Zero(1, cache.n_elems));
        }
        sens = adjoint::sens_device(q, su_det, sv_det, gt_det, gvt_use,
                                    vt_c_use, e_live, k_live, a_live, s_live,
                                    dt_c_det, nu, ps, sc);
        break;
      }
    }
    rec.loss.sens = val1(sens);
    weighted.push_back(sens);
  }

  // --- resource penalties (two-sided: drives mass onto the bound) ---
  physics::MassCostVars mc = physics::mass_cost(q, f.rho, mats);
  rec.energy.mass = val1(mc.mass);
  rec.energy.cost = val1(mc.cost);
  if (!frozen && spec.psi_m > 0) {
    rec.psi_m = scheduled_fraction(epoch, psi_m0_, spec.psi_m, tr.gamma,
                                   tr.n_tol);
    Var c_m = ad::add_const(mc.mass, -rec.psi_m * spec.m0);
    rec.loss.c_mass = val1(c_m);
    weighted.push_back(ad::scale(ad::square(c_m), tr.omega_v));
  }
  if (!frozen && spec.psi_p > 0) {
    rec.psi_p = scheduled_fraction(epoch, psi_p0_, spec.psi_p, tr.gamma,
                                   tr.n_tol);
    Var c_p = ad::add_const(mc.cost, -rec.psi_p * spec.p0);
    rec.loss.c_cost = val1(c_p);
    weighted.push_back(ad::scale(ad::square(c_p), tr.omega_p));
  }

  require(!weighted.empty(), "trainer.loss", "no loss terms for this class");
  Var total = weighted[0];
  for (size_t i = 1; i < weighted.size(); ++i)
    total = ad::add(total, weighted[i]);
  rec.loss.total = val1(total);

  // --- logged physical objective (no gradient role) ---
  switch (spec.cls) {
    case ProblemClass::Compliance:
      rec.energy.objective = 2.0 * rec.energy.strain;
      break;
    case ProblemClass::ThermalCompliance:
      rec.energy.objective =
          2.0 * (rec.energy.thermal + rec.energy.convection);
      break;
    case ProblemClass::Mechanism:
    case ProblemClass::ThermoDevice:
      rec.energy.objective =
          val1(physics::point_value(f.u[0], f.u[1], f.u[2],
                                    cache.points.output_node,
                                    spec.output.direction));
      break;
  }

  if (!std::isfinite(rec.loss.total))
    fail("trainer.nonfinite",
         "non-finite loss at epoch " + std::to_string(epoch) + ": sens=" +
             std::to_string(rec.loss.sens) + " mech=" +
             std::to_string(rec.loss.mech) + " mech_adj=" +
             std::to_string(rec.loss.mech_adj) + " thermal=" +
             std::to_string(rec.loss.thermal) + " thermal_adj=" +
             std::to_string(rec.loss.thermal_adj) + " c_mass=" +
             std::to_string(rec.loss.c_mass) + " c_cost=" +
             std::to_string(rec.loss.c_cost));

  tp.backward(total);
  rec.lr = nn::scheduled_lr(adam_cfg_, epoch, tr.n_tol);
  for (size_t i = 0; i < nets_.size(); ++i) {
    if (probe) probe->grads.emplace_back();
    if (f.pids[i].empty()) continue;
    std::vector<MatrixXd> grads;
    grads.reserve(f.pids[i].size());
    for (int id : f.pids[i]) grads.push_back(tp.grad_of(id));
    if (probe) probe->grads.back() = grads;
    if (update)
      nn::adam_step(nets_[i]->params(), grads, adam_[i], rec.lr, adam_cfg_);
  }

  DesignExtract dm = design_metrics(f.rho.val());
  rec.gray_total = dm.gray_total;
  rec.gray_phase = dm.gray_phase;
  return rec;
}

std::vector<EpochRecord> Trainer::run(const RunHooks& hooks) {
  const problem::TrainConfig& tr = asm_.spec.train;
  if (!fractions_ready_) estimate_initial_fractions();
  std::vector<EpochRecord> history;
  history.reserve(tr.n_tol);
  for (int n = 0; n < tr.n_tol; ++n) {
    const int g = sample_grid();
    EpochRecord rec = step(n, g);
    history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.on_checkpoint && tr.checkpoint_every > 0 &&
        (n + 1) % tr.checkpoint_every == 0)
      hooks.on_checkpoint(n);
  }
  if (hooks.on_checkpoint &&
      (tr.checkpoint_every <= 0 || tr.n_tol % tr.checkpoint_every != 0))
    hooks.on_checkpoint(tr.n_tol - 1);
  return history;
}

DesignExtract Trainer::extract_design() const {
  const int g = asm_.family.size() - 1;
  const MatrixXd rho = frozen_ ? frozen_(asm_.family.grids[g])
                               : asm_.density_at_centers(g);
  return design_metrics(rho);
}

VirtualWork Trainer::virtual_work() {
  const problem::ProblemSpec& spec = asm_.spec;
  const materials::MaterialSet& mats = spec.mats;
  const int g = asm_.family.size() - 1;
  const problem::GridCache& cache = asm_.cache[g];
  const physics::Quadrature& q = cache.quad;
  const double nu = mats.nu;
  const bool ps = mats.plane_stress;
  const adjoint::Scales& sc = asm_.scales;
  const double p_fin = spec.train.penal_final;

  ad::Tape tp;
  Forward f = forward_fields(tp, g, p_fin);
  VirtualWork vw;

  Var e_row, k_row, a_row;
  if (spec.needs_mechanical())
    e_row = physics::property_row(f.rho, mats.property(&materials::Phase::e),
                                  p_fin);
  if (spec.needs_thermal())
    k_row = physics::property_row(
        f.rho, mats.property(&materials::Phase::kappa), p_fin);
  if (spec.cls == ProblemClass::ThermoDevice)
    a_row = physics::property_row(
        f.rho, mats.property(&materials::Phase::alpha), p_fin);

  auto ratio = [](double stored, double work) {
    const double denom = std::max(std::abs(work), 1e-300);
    return std::abs(2.0 * stored - work) / denom;
  };

  physics::Strains su;
  Var dt_c;
  if (spec.needs_thermal()) dt_c = ad::add_const(
      physics::center_values(q, f.t), -spec.t_ref);

  if (spec.needs_mechanical()) {
    su = physics::strain_rows(q, f.u[0], f.u[1], f.u[2]);
    double stored = val1(physics::elastic_energy(q, su, e_row, nu, ps));
    for (const auto& sp : cache.points.springs)
      stored += val1(physics::spring_energy(
          physics::point_value(f.u[0], f.u[1], f.u[2], sp.node, sp.dir),
          sp.k));
    double work = 0;
    bool have_work = false;
    for (const auto& [node, force] : cache.points.loads) {
      work += val1(physics::point_value(f.u[0], f.u[1], f.u[2], node, force));
      have_work = true;
    }
    if (spec.cls == ProblemClass::ThermoDevice) {
      // Work of the fixed thermal load: int (C:eps_u):I alpha dT dV.
      Var trace = physics::stress_trace_row(q, su, e_row, nu, ps);
      work += val1(ad::weighted_sum(ad::cmul(trace, ad::cmul(a_row, dt_c)),
                                    q.w));
      have_work = true;
    }
    if (have_work) vw.primary_mech = ratio(stored, work);
  }

  physics::Strains sv;
  if (spec.needs_adjoint_mech() && !spec.train.adjoint_spring_uses_primary) {
    sv = physics::strain_rows(q, f.v[0], f.v[1], f.v[2]);
    double stored = val1(physics::elastic_energy(q, sv, e_row, nu, ps));
    for (const auto& sp : cache.points.springs)
      stored += val1(physics::spring_energy(
          physics::point_value(f.v[0], f.v[1], f.v[2], sp.node, sp.dir),
          sp.k));
    const double work =
        -1.0 / sc.alpha_u *
        val1(physics::point_value(f.v[0], f.v[1], f.v[2],
                                  cache.points.output_node,
                                  spec.output.direction));
    vw.adjoint_mech = ratio(stored, work);
  } else if (spec.needs_adjoint_mech()) {
    sv = physics::strain_rows(q, f.v[0], f.v[1], f.v[2]);
  }

  if (spec.needs_adjoint_thermal()) {
    std::array<Var, 3> gvt = physics::gradient_rows(q, f.vt);
    Var vt_c = physics::center_values(q, f.vt);
    double stored = val1(physics::conduction_energy(q, gvt, k_row));
    if (spec.h_v > 0)
      stored += val1(physics::convection_energy(q, vt_c, spec.h_v, 0.0));
    Var coupling =
        ad::cmul(a_row, physics::stress_trace_row(q, sv, e_row, nu, ps));
    const double work = sc.alpha_u / sc.alpha_t *
                        val1(ad::weighted_sum(ad::cmul(coupling, vt_c), q.w));
    vw.adjoint_thermal = ratio(stored, work);
  }

  if (spec.needs_thermal()) {
    const bool homogeneous =
        !asm_.t_cond.valid() || asm_.t_cond.values.isZero(0.0);
    if (homogeneous && spec.t_inf == 0.0) {
      std::array<Var, 3> gt = physics::gradient_rows(q, f.t);
      Var t_c = physics::center_values(q, f.t);
      double stored = val1(physics::conduction_energy(q, gt, k_row));
      if (spec.h_v > 0)
        stored += val1(physics::convection_energy(q, t_c, spec.h_v, 0.0));
      double work = 0;
      if (mats.penalize_source) {
        Var s_row = physics::property_row(
            f.rho, mats.property(&materials::Phase::s), p_fin);
        work += val1(physics::source_work(q, s_row, t_c, 0.0));
      }
      if (spec.source_density != 0.0)
        work += spec.source_density * val1(ad::weighted_sum(t_c, q.w));
      vw.primary_thermal = ratio(stored, work);
    }
  }
  return vw;
}

}  // namespace gptop::trainer
