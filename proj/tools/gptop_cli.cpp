// Command-line front end: train a problem, evaluate or compare designs,
// run the verification-solver baseline, and difference-check sensitivities.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gptop/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using Eigen::VectorXd;
using namespace gptop;

namespace {

problem::ProblemSpec load_spec_checked(const std::string& path) {
  problem::ProblemSpec spec = io::load_spec(path);
  for (const std::string& w : spec.validate())
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  return spec;
}

std::vector<int> argmax_phase(const Eigen::MatrixXd& rho) {
  std::vector<int> phase(rho.cols());
  for (int e = 0; e < rho.cols(); ++e) {
    int best = 0;
    rho.col(e).maxCoeff(&best);
    phase[e] = best;
  }
  return phase;
}

Eigen::MatrixXd one_hot(const std::vector<int>& phase, int n_phases) {
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(n_phases, int(phase.size()));
  for (size_t e = 0; e < phase.size(); ++e) rho(phase[e], int(e)) = 1.0;
  return rho;
}

// FEM verdict on a binarized design plus its linear mass/cost.
json evaluate_phases(const problem::ProblemSpec& spec,
                     const grid::CollocationGrid& g,
                     const std::vector<int>& phase) {
  const fem::EvalCase ec = problem::oracle_case(spec, g);
  const fem::DesignEvaluation ev =
      fem::evaluate_design(g, phase, spec.mats, ec);
  const physics::Quadrature quad =
      physics::build_quadrature(g, spec.domain.thickness);
  const materials::MassCost mc =
      problem::mass_cost_of(one_hot(phase, spec.mats.n_phases()), quad,
                            spec.mats);
  json j;
  j["class"] = problem::class_name(spec.cls);
  j["objective"] = ev.objective;
  j["connected"] = ev.connected;
  if (!ev.connected) j["diagnosis"] = ev.diagnosis;
  j["compliance"] = ev.compliance;
  j["u_out"] = ev.u_out;
  j["mass"] = mc.mass;
  j["cost"] = mc.cost;
  json counts = json::object();
  for (int i = 0; i < spec.mats.n_phases(); ++i) {
    const long n = std::count(phase.begin(), phase.end(), i);
    counts[spec.mats.phases[i].name] = n;
  }
  j["phase_counts"] = counts;
  return j;
}

void print_json(const json& j) { std::printf("%s\n", j.dump(2).c_str()); }

// ---------------------------------------------------------------------------

struct RunOptions {
  std::string config;
  std::string out;
  int epochs = -1;
  std::int64_t seed = -1;
  bool quiet = false;
  bool no_oracle = false;
};

int cmd_run(const RunOptions& opt) {
  problem::ProblemSpec spec = load_spec_checked(opt.config);
  if (opt.epochs > 0) spec.train.n_tol = opt.epochs;
  if (opt.seed >= 0) spec.train.seed = std::uint64_t(opt.seed);

  const fs::path out = opt.out.empty() ? fs::path("runs") / spec.name
                                       : fs::path(opt.out);
  fs::create_directories(out);

  trainer::Trainer tr(problem::assemble(spec));
  const int n_phases = spec.mats.n_phases();

  io::HistoryWriter hist((out / "history.csv").string(), n_phases);
  const int stride = std::max(1, spec.train.n_tol / 25);
  trainer::RunHooks hooks;
  hooks.on_epoch = [&](const trainer::EpochRecord& r) {
    hist.append(r);
    if (!opt.quiet &&
        (r.epoch % stride == 0 || r.epoch == spec.train.n_tol - 1))
      std::fprintf(stderr,
                   "epoch %5d/%d  grid %d  total %.6g  obj %.6g  mass %.4g  "
                   "gray %.3f\n",
                   r.epoch, spec.train.n_tol, r.grid, r.loss.total,
                   r.energy.objective, r.energy.mass, r.gray_total);
  };
  hooks.on_checkpoint = [&](int) {
    io::save_checkpoint((out / "checkpoint.bin").string(), tr.assembled());
  };

  const std::vector<trainer::EpochRecord> recs = tr.run(hooks);
  io::write_run_json((out / "run.json").string(), tr.assembled(), tr.psi_m0(),
                     tr.psi_p0());

  const trainer::DesignExtract des = tr.extract_design();
  const grid::CollocationGrid& g = tr.assembled().finest();
  io::write_design_csv((out / "design.csv").string(), g, des.rho);
  io::write_vtk((out / "design.vtk").string(), g, des.rho, [&] {
    std::vector<std::string> names;
    for (const auto& p : spec.mats.phases) names.push_back(p.name);
    return names;
  }());
  if (g.dim == 2) {
    std::vector<std::string> names;
    for (const auto& p : spec.mats.phases) names.push_back(p.name);
    for (int i = 1; i < n_phases; ++i)
      io::write_phase_pgm((out / ("phase_" + names[i] + ".pgm")).string(), g,
                          des.rho.row(i));
    io::write_phase_ppm((out / "design.ppm").string(), g, des.rho, names);
  }

  const trainer::VirtualWork vw = tr.virtual_work();
  const trainer::EpochRecord& last = recs.back();

  json summary;
  summary["name"] = spec.name;
  summary["class"] = problem::class_name(spec.cls);
  summary["epochs"] = int(recs.size());
  summary["out_dir"] = out.string();
  summary["psi_m0"] = tr.psi_m0();
  summary["psi_p0"] = tr.psi_p0();
  json fin;
  fin["total"] = last.loss.total;
  fin["objective"] = last.energy.objective;
  fin["mass"] = last.energy.mass;
  fin["cost"] = last.energy.cost;
  fin["c_mass"] = last.loss.c_mass;
  fin["c_cost"] = last.loss.c_cost;
  fin["gray_total"] = des.gray_total;
  summary["final"] = fin;
  json vwj;
  if (vw.primary_mech >= 0) vwj["primary_mech"] = vw.primary_mech;
  if (vw.adjoint_mech >= 0) vwj["adjoint_mech"] = vw.adjoint_mech;
  if (vw.adjoint_thermal >= 0) vwj["adjoint_thermal"] = vw.adjoint_thermal;
  if (vw.primary_thermal >= 0) vwj["primary_thermal"] = vw.primary_thermal;
  summary["virtual_work"] = vwj;
  if (!opt.no_oracle)
    summary["fem"] = evaluate_phases(spec, g, argmax_phase(des.rho));

  std::ofstream sj(out / "summary.json");
  sj << summary.dump(2) << "\n";
  print_json(summary);
  return 0;
}

int cmd_evaluate(const std::string& config, const std::string& design) {
  problem::ProblemSpec spec = load_spec_checked(config);
  const grid::GridFamily fam = grid::build_grid_family(
      spec.domain, spec.coarse, spec.fine, spec.n_g);
  const grid::CollocationGrid& g = fam.finest();

  const Eigen::MatrixXd rho = io::load_design_csv(design);
  require(rho.rows() == spec.mats.n_phases(),
          "cli.design_shape", "design has " + std::to_string(rho.rows()) +
              " phases, config expects " +
              std::to_string(spec.mats.n_phases()));
  require(rho.cols() == g.n_elems(),
          "cli.design_shape", "design has " + std::to_string(rho.cols()) +
              " elements, finest grid has " + std::to_string(g.n_elems()));

  json j = evaluate_phases(spec, g, argmax_phase(rho));
  const trainer::DesignExtract m = trainer::design_metrics(rho);
  j["gray_total"] = m.gray_total;
  print_json(j);
  return 0;
}

int cmd_baseline(const std::string& config, const std::string& out_dir,
                 int iters) {
  problem::ProblemSpec spec = load_spec_checked(config);
  require(spec.cls == ProblemClass::Compliance ||
              spec.cls == ProblemClass::ThermalCompliance,
          "cli.baseline_class",
          "the baseline optimizer covers compliance classes only");
  const grid::GridFamily fam = grid::build_grid_family(
      spec.domain, spec.coarse, spec.fine, spec.n_g);
  const grid::CollocationGrid& g = fam.finest();
  const fem::EvalCase ec = problem::oracle_case(spec, g);

  fem::SimpConfig cfg;
  cfg.volfrac = spec.psi_m > 0 ? spec.psi_m : 0.5;
  cfg.penal = spec.train.penal_final;
  cfg.ordered_multimaterial = spec.mats.n_phases() > 2;
  if (iters > 0) cfg.max_iters = iters;

  const fem::SimpResult res = fem::run_simp_baseline(g, spec.mats, ec, cfg);

  const fs::path out = out_dir.empty() ? fs::path("runs") / (spec.name + "_baseline")
                                       : fs::path(out_dir);
  fs::create_directories(out);

  // Express the scalar design coordinate as phase fractions through the
  // ordered mass knots (piecewise-linear hats, so linear mass is preserved).
  const int np = spec.mats.n_phases();
  for (int i = 1; i < np; ++i)
    require(spec.mats.phases[i].rho_bar > spec.mats.phases[i - 1].rho_bar,
            "cli.baseline_phases",
            "phases must have ascending mass densities");
  const double rb_max = spec.mats.phases.back().rho_bar;
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(np, g.n_elems());
  for (int e = 0; e < g.n_elems(); ++e) {
    const double d = res.rho[e] * rb_max;
    int seg = np - 2;
    while (seg > 0 && d < spec.mats.phases[seg].rho_bar) --seg;
    const double lo = spec.mats.phases[seg].rho_bar;
    const double hi = spec.mats.phases[seg + 1].rho_bar;
    const double w = std::clamp((d - lo) / (hi - lo), 0.0, 1.0);
    rho(seg, e) = 1.0 - w;
    rho(seg + 1, e) = w;
  }
  io::write_design_csv((out / "baseline.csv").string(), g, rho);
  if (g.dim == 2)
    io::write_phase_pgm((out / "baseline.pgm").string(), g,
                        res.rho.transpose());

  json j;
  j["name"] = spec.name;
  j["objective"] = res.objective;
  j["iters"] = res.iters;
  j["volfrac"] = cfg.volfrac;
  j["mean_density"] = res.rho.mean();
  j["out_dir"] = out.string();
  print_json(j);
  return 0;
}

// Loads the spec embedded in a run directory's metadata and re-evaluates
// the stored design against the verification solver.
json evaluate_run_dir(const fs::path& dir) {
  std::ifstream in(dir / "run.json");
  require(bool(in), "cli.run_dir",
          "no run.json in '" + dir.string() + "'");
  json meta;
  try {
    in >> meta;
  } catch (const std::exception& e) {
    fail("cli.run_dir", "unreadable run.json: " + std::string(e.what()));
  }
  require(meta.contains("config"), "cli.run_dir",
          "run.json carries no config echo");
  problem::ProblemSpec spec = io::parse_spec(meta["config"].dump());
  spec.validate();
  const grid::GridFamily fam = grid::build_grid_family(
      spec.domain, spec.coarse, spec.fine, spec.n_g);
  const grid::CollocationGrid& g = fam.finest();
  const Eigen::MatrixXd rho = io::load_design_csv((dir / "design.csv").string());
  require(rho.rows() == spec.mats.n_phases() && rho.cols() == g.n_elems(),
          "cli.design_shape",
          "design in '" + dir.string() + "' does not match its config grid");
  json j = evaluate_phases(spec, g, argmax_phase(rho));
  j["name"] = spec.name;
  j["dir"] = dir.string();
  j["gray_total"] = trainer::design_metrics(rho).gray_total;
  return j;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b) {
  json a = evaluate_run_dir(dir_a);
  json b = evaluate_run_dir(dir_b);
  json j;
  j["a"] = a;
  j["b"] = b;
  const double oa = a["objective"].get<double>();
  const double ob = b["objective"].get<double>();
  if (std::isfinite(oa) && std::isfinite(ob) && ob != 0.0)
    j["objective_ratio"] = oa / ob;
  print_json(j);
  return 0;
}

// Central-difference audit of the element sensitivity formulas on the
// problem's own boundary data. Runs on a dedicated coarse audit grid and
// differences a sampled element subset: full central differences cost two
// solves per element and would take hours on a production grid.
int cmd_verify_adjoint(const std::string& config, int nodes, int samples,
                       std::uint64_t seed, double tol) {
  problem::ProblemSpec spec = load_spec_checked(config);
  Eigen::Vector3i npts = Eigen::Vector3i::Ones();
  const double lmax =
      spec.domain.lengths.head(spec.domain.dim).maxCoeff();
  for (int a = 0; a < spec.domain.dim; ++a)
    npts[a] = std::max(
        3, round_half_up((nodes - 1) * spec.domain.lengths[a] / lmax) + 1);
  const grid::CollocationGrid g = grid::build_grid(spec.domain, npts);
  const fem::EvalCase ec = problem::oracle_case(spec, g);
  const materials::MaterialSet& mats = spec.mats;
  const adjoint::Scales sc = adjoint::default_scales(spec.cls);
  const double p = spec.train.penal_final;
  const double nu = mats.nu;
  const bool ps = mats.plane_stress;
  const double th = ec.thickness;
  const int ne = g.n_elems();

  // Random gray density: every element contributes, nothing saturates.
  std::mt19937_64 rng(seed);
  VectorXd rho(ne);
  for (int e = 0; e < ne; ++e) rho[e] = uniform(rng, 0.3, 0.9);

  // Single-channel property laws on the last (strongest) phase.
  const materials::Phase& solid = mats.phases.back();
  auto powv = [&](double c, double q) {
    return VectorXd(c * rho.array().pow(q));
  };
  const Eigen::Vector3d e_n = ec.output_dir;

  VectorXd formula;
  std::function<double(const VectorXd&)> objective;
  switch (spec.cls) {
    case ProblemClass::Compliance: {
      objective = [&](const VectorXd& r) {
        VectorXd e = solid.e * r.array().pow(p);
        return fem::solve_mechanical(g, e, nu, ps, th, ec.mech).external_work;
      };
      adjoint::OracleFields f;
      f.u = fem::solve_mechanical(g, powv(solid.e, p), nu, ps, th, ec.mech).u;
      adjoint::PropertyDerivatives d;
      d.de = powv(p * solid.e, p - 1.0);
      formula = adjoint::element_sensitivities(spec.cls, g, f, d, nu, ps, th,
                                               sc, 0.0);
      break;
    }
    case ProblemClass::ThermalCompliance: {
      // Uniform (design-independent) source: the penalized-source branch has
      // no oracle-side formula and is excluded from this audit.
      const VectorXd src = VectorXd::Constant(ne, ec.source_density);
      objective = [&, src](const VectorXd& r) {
        VectorXd k = solid.kappa * r.array().pow(p);
        auto sol = fem::solve_thermal(g, k, th, ec.thermal, src);
        return fem::thermal_compliance(g, k, sol.t, th);
      };
      adjoint::OracleFields f;
      f.t = fem::solve_thermal(g, powv(solid.kappa, p), th, ec.thermal, src).t;
      adjoint::PropertyDerivatives d;
      d.dkappa = powv(p * solid.kappa, p - 1.0);
      formula = adjoint::element_sensitivities(spec.cls, g, f, d, nu, ps, th,
                                               sc, 0.0);
      break;
    }
    case ProblemClass::Mechanism: {
      objective = [&](const VectorXd& r) {
        VectorXd e = solid.e * r.array().pow(p);
        auto sol = fem::solve_mechanical(g, e, nu, ps, th, ec.mech);
        return -e_n.dot(sol.displacement_at(ec.output_node, g.dim));
      };
      adjoint::OracleFields f;
      const VectorXd e = powv(solid.e, p);
      f.u = fem::solve_mechanical(g, e, nu, ps, th, ec.mech).u;
      fem::MechanicalBc adj = ec.mech;
      adj.loads.clear();
      adj.loads.emplace_back(ec.output_node, (-1.0 / sc.alpha_u) * e_n);
      f.v = fem::solve_mechanical(g, e, nu, ps, th, adj).u;
      adjoint::PropertyDerivatives d;
      d.de = powv(p * solid.e, p - 1.0);
      formula = adjoint::element_sensitivities(spec.cls, g, f, d, nu, ps, th,
                                               sc, 0.0);
      break;
    }
    case ProblemClass::ThermoDevice: {
      auto solve_all = [&](const VectorXd& r) {
        VectorXd kk = solid.kappa * r.array().pow(p);
        VectorXd src = solid.s * r.array().pow(p);
        if (!mats.penalize_source)
          src = VectorXd::Constant(ne, ec.source_density);
        auto ts = fem::solve_thermal(g, kk, th, ec.thermal, src);
        VectorXd ee = solid.e * r.array().pow(p);
        VectorXd aa = solid.alpha * r.array().pow(p);
        auto ms = fem::solve_mechanical(g, ee, nu, ps, th, ec.mech, &aa, &ts.t,
                                        ec.t_ref);
        return std::make_pair(ts, ms);
      };
      objective = [&, solve_all](const VectorXd& r) {
        auto [ts, ms] = solve_all(r);
        return -e_n.dot(ms.displacement_at(ec.output_node, g.dim));
      };

      auto [ts, ms] = solve_all(rho);
      const VectorXd ee = powv(solid.e, p);
      const VectorXd ealpha =
          VectorXd(powv(solid.e, p).array() * powv(solid.alpha, p).array());
      fem::MechanicalBc adj = ec.mech;
      adj.loads.clear();
      adj.loads.emplace_back(ec.output_node, (-1.0 / sc.alpha_u) * e_n);
      auto vs = fem::solve_mechanical(g, ee, nu, ps, th, adj);
      VectorXd cload = (sc.alpha_u / sc.alpha_t) *
                       fem::assemble_coupling_load(g, vs.u, ealpha, nu, ps, th);
      fem::ThermalBc adj_tbc = ec.thermal;
      for (auto& [node, val] : adj_tbc.fixed) val = 0.0;
      auto vts = fem::solve_thermal(g, powv(solid.kappa, p), th, adj_tbc,
                                    VectorXd::Zero(ne), &cload);
      adjoint::OracleFields f;
      f.u = ms.u;
      f.v = vs.u;
      f.t = ts.t;
      f.vt = vts.t;
      adjoint::PropertyDerivatives d;
      d.de = powv(p * solid.e, p - 1.0);
      d.dkappa = powv(p * solid.kappa, p - 1.0);
      d.dealpha = powv(2.0 * p * solid.e * solid.alpha, 2.0 * p - 1.0);
      d.ds = mats.penalize_source ? powv(p * solid.s, p - 1.0)
                                  : VectorXd::Zero(ne);
      formula = adjoint::element_sensitivities(spec.cls, g, f, d, nu, ps, th,
                                               sc, ec.t_ref);
      break;
    }
  }

  // Elements touching constrained/loaded nodes see boundary effects the
  // interior formula does not model; exclude them from the comparison.
  std::set<int> special;
  for (const auto& comp : ec.mech.fixed)
    for (int n : comp) special.insert(n);
  for (const auto& [n, c, v] : ec.mech.prescribed) special.insert(n);
  for (const auto& [n, fvec] : ec.mech.loads) special.insert(n);
  for (const auto& s : ec.mech.springs) special.insert(s.node);
  for (const auto& [n, v] : ec.thermal.fixed) special.insert(n);
  if (ec.output_node >= 0) special.insert(ec.output_node);
  std::vector<int> included;
  for (int e = 0; e < ne; ++e) {
    bool touches = false;
    for (int j = 0; j < g.elems.rows() && !touches; ++j)
      touches = special.count(g.elems(j, e)) > 0;
    if (!touches) included.push_back(e);
  }
  require(!included.empty(), "cli.verify_adjoint",
          "every element touches a constrained node on this grid");
  for (int i = int(included.size()) - 1; i > 0; --i)
    std::swap(included[size_t(i)], included[size_t(uniform_index(rng, i + 1))]);
  included.resize(std::min<size_t>(included.size(), size_t(samples)));

  const double h = 1e-6;
  VectorXd fd(included.size());
  for (size_t i = 0; i < included.size(); ++i) {
    VectorXd r = rho;
    r[included[i]] = rho[included[i]] + h;
    const double up = objective(r);
    r[included[i]] = rho[included[i]] - h;
    fd[i] = (up - objective(r)) / (2.0 * h);
  }

  const double scale = fd.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (size_t i = 0; i < included.size(); ++i) {
    const double err = std::abs(formula[included[i]] - fd[i]) /
                       std::max(std::abs(fd[i]), 1e-2 * scale);
    worst = std::max(worst, err);
  }

  const bool pass = worst < tol;
  json j;
  j["class"] = problem::class_name(spec.cls);
  j["audit_grid"] = {npts[0], npts[1], npts[2]};
  j["elements"] = ne;
  j["sampled"] = included.size();
  j["worst_rel_err"] = worst;
  j["tol"] = tol;
  j["pass"] = pass;
  print_json(j);
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh-free topology optimization on trained field networks"};
  app.require_subcommand(1);

  RunOptions run;
  CLI::App* c_run = app.add_subcommand("run", "Train a problem config");
  c_run->add_option("config", run.config, "problem config (JSON)")->required();
  c_run->add_option("--out", run.out, "output directory (default runs/<name>)");
  c_run->add_option("--epochs", run.epochs, "override the epoch budget");
  c_run->add_option("--seed", run.seed, "override the training seed");
  c_run->add_flag("--quiet", run.quiet, "suppress progress lines");
  c_run->add_flag("--no-oracle", run.no_oracle,
                  "skip the verification-solver check of the final design");

  std::string ev_config, ev_design;
  CLI::App* c_eval = app.add_subcommand(
      "evaluate", "Evaluate a stored design with the verification solver");
  c_eval->add_option("config", ev_config, "problem config (JSON)")->required();
  c_eval->add_option("design", ev_design, "design CSV")->required();

  std::string bl_config, bl_out;
  int bl_iters = -1;
  CLI::App* c_base = app.add_subcommand(
      "baseline", "Density-filtered reference optimizer on the finest grid");
  c_base->add_option("config", bl_config, "problem config (JSON)")->required();
  c_base->add_option("--out", bl_out, "output directory");
  c_base->add_option("--iters", bl_iters, "iteration cap");

  std::string cmp_a, cmp_b;
  CLI::App* c_cmp = app.add_subcommand(
      "compare", "Re-evaluate the designs of two run directories");
  c_cmp->add_option("dir_a", cmp_a, "first run directory")->required();
  c_cmp->add_option("dir_b", cmp_b, "second run directory")->required();

  std::string va_config;
  int va_nodes = 17, va_samples = 120;
  std::uint64_t va_seed = 1234;
  double va_tol = 1e-3;
  CLI::App* c_va = app.add_subcommand(
      "verify-adjoint",
      "Difference-check the sensitivity formula on the problem's boundary data");
  c_va->add_option("config", va_config, "problem config (JSON)")->required();
  c_va->add_option("--nodes", va_nodes, "audit-grid nodes on the longest axis");
  c_va->add_option("--samples", va_samples, "elements to difference");
  c_va->add_option("--seed", va_seed, "density sample seed");
  c_va->add_option("--tol", va_tol, "worst relative error bound");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_run) return cmd_run(run);
    if (*c_eval) return cmd_evaluate(ev_config, ev_design);
    if (*c_base) return cmd_baseline(bl_config, bl_out, bl_iters);
    if (*c_cmp) return cmd_compare(cmp_a, cmp_b);
    if (*c_va)
      return cmd_verify_adjoint(va_config, va_nodes, va_samples, va_seed,
                                va_tol);
  } catch (const Error& e) {
    json j;
    j["error"] = e.code();
    j["message"] = e.what();
    std::fprintf(stderr, "%s\n", j.dump().c_str());
    const std::string& c = e.code();
    const bool user = c.rfind("config.", 0) == 0 || c.rfind("cli.", 0) == 0 ||
                      c.rfind("io.", 0) == 0;
    return user ? 1 : 2;
  } catch (const std::exception& e) {
    json j;
    j["error"] = "internal";
    j["message"] = e.what();
    std::fprintf(stderr, "%s\n", j.dump().c_str());
    return 2;
  }
  return 0;
}
