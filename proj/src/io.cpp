#include "gptop/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "json.hpp"

namespace gptop::io {

using nlohmann::json;
using Eigen::MatrixXd;

namespace {

// --- strict JSON access -----------------------------------------------------

void check_keys(const json& j, const std::string& path,
                const std::vector<std::string>& allowed) {
  require(j.is_object(), "config.parse", path + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      fail("config.parse", "unknown key '" + path + "." + it.key() + "'");
}

const json& get_req(const json& j, const std::string& path,
                    const std::string& key) {
  auto it = j.find(key);
  if (it == j.end())
    fail("config.parse", "missing required '" + path + "." + key + "'");
  return *it;
}

double num_req(const json& j, const std::string& path, const std::string& key) {
  const json& v = get_req(j, path, key);
  require(v.is_number(), "config.parse", path + "." + key + " must be a number");
  return v.get<double>();
}

double num_opt(const json& j, const std::string& path, const std::string& key,
               double def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  require(it->is_number(), "config.parse",
          path + "." + key + " must be a number");
  return it->get<double>();
}

int int_req(const json& j, const std::string& path, const std::string& key) {
  const json& v = get_req(j, path, key);
  require(v.is_number_integer(), "config.parse",
          path + "." + key + " must be an integer");
  return v.get<int>();
}

int int_opt(const json& j, const std::string& path, const std::string& key,
            int def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  require(it->is_number_integer(), "config.parse",
          path + "." + key + " must be an integer");
  return it->get<int>();
}

bool bool_opt(const json& j, const std::string& path, const std::string& key,
              bool def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  require(it->is_boolean(), "config.parse",
          path + "." + key + " must be a boolean");
  return it->get<bool>();
}

std::string str_req(const json& j, const std::string& path,
                    const std::string& key) {
  const json& v = get_req(j, path, key);
  require(v.is_string(), "config.parse", path + "." + key + " must be a string");
  return v.get<std::string>();
}

Eigen::Vector3d vec3(const json& v, const std::string& path, int dim,
                     double fill = 0.0) {
  require(v.is_array() && int(v.size()) == dim, "config.parse",
          path + " must be an array of " + std::to_string(dim) + " numbers");
  Eigen::Vector3d out = Eigen::Vector3d::Constant(fill);
  for (int i = 0; i < dim; ++i) {
    require(v[i].is_number(), "config.parse", path + " must be numeric");
    out[i] = v[i].get<double>();
  }
  return out;
}

Eigen::Vector3i vec3i(const json& v, const std::string& path, int dim) {
  require(v.is_array() && int(v.size()) == dim, "config.parse",
          path + " must be an array of " + std::to_string(dim) + " integers");
  Eigen::Vector3i out = Eigen::Vector3i::Ones();
  for (int i = 0; i < dim; ++i) {
    require(v[i].is_number_integer(), "config.parse",
            path + " must hold integers");
    out[i] = v[i].get<int>();
  }
  return out;
}

grid::Region parse_region(const json& r, const std::string& path, int dim) {
  check_keys(r, path, {"lo", "hi"});
  grid::Region out;
  out.lo = vec3(get_req(r, path, "lo"), path + ".lo", dim);
  out.hi = vec3(get_req(r, path, "hi"), path + ".hi", dim);
  return out;
}

grid::BoundaryCondition parse_bc(const json& b, const std::string& path,
                                 int dim, int n_phases) {
  grid::BoundaryCondition bc;
  const std::string kind = str_req(b, path, "kind");
  bc.name = str_req(b, path, "name");
  auto point_region = [&](const char* key) {
    const Eigen::Vector3d p = vec3(get_req(b, path, key), path + "." + key, dim);
    bc.region.lo = p;
    bc.region.hi = p;
  };
  if (kind == "dirichlet_displacement") {
    check_keys(b, path, {"kind", "name", "region", "component", "value"});
    bc.kind = grid::BcKind::DirichletDisplacement;
    bc.region = parse_region(get_req(b, path, "region"), path + ".region", dim);
    bc.component = int_opt(b, path, "component", -1);
    require(bc.component >= -1 && bc.component < dim, "config.parse",
            path + ".component out of range");
    bc.value = num_opt(b, path, "value", 0.0);
  } else if (kind == "dirichlet_temperature") {
    check_keys(b, path, {"kind", "name", "region", "value"});
    bc.kind = grid::BcKind::DirichletTemperature;
    bc.region = parse_region(get_req(b, path, "region"), path + ".region", dim);
    bc.value = num_opt(b, path, "value", 0.0);
  } else if (kind == "dirichlet_density") {
    check_keys(b, path, {"kind", "name", "region", "value_per_phase"});
    bc.kind = grid::BcKind::DirichletDensity;
    bc.region = parse_region(get_req(b, path, "region"), path + ".region", dim);
    const json& vals = get_req(b, path, "value_per_phase");
    require(vals.is_array() && int(vals.size()) == n_phases, "config.parse",
            path + ".value_per_phase needs one entry per phase");
    for (const auto& v : vals) {
      require(v.is_number(), "config.parse",
              path + ".value_per_phase must be numeric");
      bc.density_value.push_back(v.get<double>());
    }
  } else if (kind == "point_load") {
    check_keys(b, path, {"kind", "name", "at", "direction", "value"});
    bc.kind = grid::BcKind::PointLoad;
    point_region("at");
    bc.direction = vec3(get_req(b, path, "direction"), path + ".direction", dim);
    bc.value = num_req(b, path, "value");
  } else if (kind == "point_spring") {
    check_keys(b, path, {"kind", "name", "at", "direction", "stiffness"});
    bc.kind = grid::BcKind::PointSpring;
    point_region("at");
    bc.direction = vec3(get_req(b, path, "direction"), path + ".direction", dim);
    bc.stiffness = num_req(b, path, "stiffness");
  } else {
    fail("config.parse", "unknown bc kind '" + kind + "' at " + path);
  }
  return bc;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  require(out.good(), "io.open", "cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  require(in.good(), "io.open", "cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

// --- config ------------------------------------------------------------------

problem::ProblemSpec parse_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail("config.parse", std::string("invalid JSON: ") + e.what());
  }
  check_keys(j, "$",
             {"name", "class", "domain", "materials", "bcs", "output",
              "physics", "constraints", "grids", "net", "train"});

  problem::ProblemSpec s;
  s.name = str_req(j, "$", "name");
  s.cls = problem::class_from_name(str_req(j, "$", "class"));

  const json& dom = get_req(j, "$", "domain");
  check_keys(dom, "$.domain", {"lengths", "thickness", "cutouts"});
  const json& lengths = get_req(dom, "$.domain", "lengths");
  require(lengths.is_array() && (lengths.size() == 2 || lengths.size() == 3),
          "config.parse", "$.domain.lengths must have 2 or 3 entries");
  const int dim = int(lengths.size());
  s.domain.dim = dim;
  s.domain.lengths = vec3(lengths, "$.domain.lengths", dim);
  s.domain.thickness = num_opt(dom, "$.domain", "thickness", 1.0);
  if (auto it = dom.find("cutouts"); it != dom.end()) {
    require(it->is_array(), "config.parse", "$.domain.cutouts must be an array");
    for (size_t i = 0; i < it->size(); ++i) {
      const std::string path = "$.domain.cutouts[" + std::to_string(i) + "]";
      grid::Region r = parse_region((*it)[i], path, dim);
      s.domain.cutouts.push_back({r.lo, r.hi});
    }
  }

  const json& mats = get_req(j, "$", "materials");
  check_keys(mats, "$.materials",
             {"phases", "nu", "plane_stress", "penalize_source"});
  const json& phases = get_req(mats, "$.materials", "phases");
  require(phases.is_array() && phases.size() >= 2, "config.parse",
          "$.materials.phases needs at least [void, solid]");
  for (const auto& p : phases) {
    if (p.is_string()) {
      s.mats.phases.push_back(problem::phase_by_name(p.get<std::string>()));
    } else if (p.is_object()) {
      // Inline phase: explicit properties, e.g. for problem-specific units.
      const std::string pp = "$.materials.phases[]";
      check_keys(p, pp,
                 {"name", "e", "kappa", "rho_bar", "cost", "alpha", "source"});
      materials::Phase ph;
      ph.name = str_req(p, pp, "name");
      ph.e = num_opt(p, pp, "e", 0.0);
      ph.kappa = num_opt(p, pp, "kappa", 0.0);
      ph.rho_bar = num_opt(p, pp, "rho_bar", 0.0);
      ph.p_bar = num_opt(p, pp, "cost", 0.0);
      ph.alpha = num_opt(p, pp, "alpha", 0.0);
      ph.s = num_opt(p, pp, "source", 0.0);
      s.mats.phases.push_back(ph);
    } else {
      fail("config.parse", "$.materials.phases holds names or objects");
    }
  }
  s.mats.nu = num_opt(mats, "$.materials", "nu", 0.31);
  s.mats.plane_stress = bool_opt(mats, "$.materials", "plane_stress", true);
  s.mats.penalize_source =
      bool_opt(mats, "$.materials", "penalize_source", true);

  const json& bcs = get_req(j, "$", "bcs");
  require(bcs.is_array(), "config.parse", "$.bcs must be an array");
  for (size_t i = 0; i < bcs.size(); ++i)
    s.bcs.push_back(parse_bc(bcs[i], "$.bcs[" + std::to_string(i) + "]", dim,
                             s.mats.n_phases()));

  if (auto it = j.find("output"); it != j.end()) {
    check_keys(*it, "$.output", {"at", "direction"});
    s.output.at = vec3(get_req(*it, "$.output", "at"), "$.output.at", dim);
    s.output.direction = vec3(get_req(*it, "$.output", "direction"),
                              "$.output.direction", dim);
  }

  if (auto it = j.find("physics"); it != j.end()) {
    check_keys(*it, "$.physics",
               {"h_v", "t_inf", "t_ref", "source_density",
                "isothermal_adjoint"});
    s.h_v = num_opt(*it, "$.physics", "h_v", 0.0);
    s.t_inf = num_opt(*it, "$.physics", "t_inf", 0.0);
    s.t_ref = num_opt(*it, "$.physics", "t_ref", 0.0);
    s.source_density = num_opt(*it, "$.physics", "source_density", 0.0);
    s.isothermal_adjoint =
        bool_opt(*it, "$.physics", "isothermal_adjoint", false);
  }

  if (auto it = j.find("constraints"); it != j.end()) {
    check_keys(*it, "$.constraints", {"psi_m", "m0", "psi_p", "p0"});
    s.psi_m = num_opt(*it, "$.constraints", "psi_m", -1.0);
    s.m0 = num_opt(*it, "$.constraints", "m0", 0.0);
    s.psi_p = num_opt(*it, "$.constraints", "psi_p", -1.0);
    s.p0 = num_opt(*it, "$.constraints", "p0", 0.0);
  }

  const json& grids = get_req(j, "$", "grids");
  check_keys(grids, "$.grids", {"coarse", "fine", "n_g"});
  s.coarse = vec3i(get_req(grids, "$.grids", "coarse"), "$.grids.coarse", dim);
  s.fine = vec3i(get_req(grids, "$.grids", "fine"), "$.grids.fine", dim);
  s.n_g = int_req(grids, "$.grids", "n_g");

  if (auto it = j.find("net"); it != j.end()) {
    check_keys(*it, "$.net",
               {"n_rep", "n_f", "res", "t_scale", "t_offset", "t_init"});
    s.net.n_rep = int_opt(*it, "$.net", "n_rep", 3);
    s.net.n_f = int_opt(*it, "$.net", "n_f", 32);
    s.net.res = int_opt(*it, "$.net", "res", 36);
    s.net.t_scale = num_opt(*it, "$.net", "t_scale", 1.0);
    s.net.t_offset = num_opt(*it, "$.net", "t_offset", 0.0);
    s.net.t_init = num_opt(*it, "$.net", "t_init", 0.0);
  }

  if (auto it = j.find("train"); it != j.end()) {
    check_keys(*it, "$.train",
               {"n_tol", "gamma", "omega_m", "omega_t", "omega_v", "omega_p",
                "lr", "lr_drop", "penal_final", "seed", "checkpoint_every",
                "adjoint_spring_uses_primary"});
    s.train.n_tol = int_opt(*it, "$.train", "n_tol", 5000);
    s.train.gamma = num_opt(*it, "$.train", "gamma", 0.5);
    s.train.omega_m = num_opt(*it, "$.train", "omega_m", 1.0);
    s.train.omega_t = num_opt(*it, "$.train", "omega_t", 1.0);
    s.train.omega_v = num_opt(*it, "$.train", "omega_v", 100.0);
    s.train.omega_p = num_opt(*it, "$.train", "omega_p", 100.0);
    s.train.lr = num_opt(*it, "$.train", "lr", 1e-3);
    s.train.lr_drop = num_opt(*it, "$.train", "lr_drop", 0.75);
    s.train.penal_final = num_opt(*it, "$.train", "penal_final", 3.0);
    auto sit = it->find("seed");
    if (sit != it->end()) {
      require(sit->is_number_integer() && !sit->is_number_float(),
              "config.parse", "$.train.seed must be an integer");
      s.train.seed = sit->get<std::uint64_t>();
    }
    s.train.checkpoint_every = int_opt(*it, "$.train", "checkpoint_every", 500);
    s.train.adjoint_spring_uses_primary =
        bool_opt(*it, "$.train", "adjoint_spring_uses_primary", false);
  }
  return s;
}

problem::ProblemSpec load_spec(const std::string& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

std::string serialize_spec(const problem::ProblemSpec& s) {
  const int dim = s.domain.dim;
  auto arr = [&](const Eigen::Vector3d& v) {
    json a = json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
  };
  auto arri = [&](const Eigen::Vector3i& v) {
    json a = json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
  };
  json j;
  j["name"] = s.name;
  j["class"] = problem::class_name(s.cls);
  j["domain"]["lengths"] = arr(s.domain.lengths);
  j["domain"]["thickness"] = s.domain.thickness;
  if (!s.domain.cutouts.empty()) {
    json cuts = json::array();
    for (const auto& c : s.domain.cutouts)
      cuts.push_back({{"lo", arr(c.lo)}, {"hi", arr(c.hi)}});
    j["domain"]["cutouts"] = cuts;
  }
  json names = json::array();
  for (const auto& p : s.mats.phases) {
    bool catalog = false;
    try {
      const materials::Phase c = problem::phase_by_name(p.name);
      catalog = c.e == p.e && c.kappa == p.kappa && c.rho_bar == p.rho_bar &&
                c.p_bar == p.p_bar && c.alpha == p.alpha && c.s == p.s;
    } catch (const Error&) {
    }
    if (catalog) {
      names.push_back(p.name);
    } else {
      names.push_back({{"name", p.name}, {"e", p.e}, {"kappa", p.kappa},
                       {"rho_bar", p.rho_bar}, {"cost", p.p_bar},
                       {"alpha", p.alpha}, {"source", p.s}});
    }
  }
  j["materials"]["phases"] = names;
  j["materials"]["nu"] = s.mats.nu;
  j["materials"]["plane_stress"] = s.mats.plane_stress;
  j["materials"]["penalize_source"] = s.mats.penalize_source;
  json bcs = json::array();
  for (const auto& bc : s.bcs) {
    json b;
    b["name"] = bc.name;
    switch (bc.kind) {
      case grid::BcKind::DirichletDisplacement:
        b["kind"] = "dirichlet_displacement";
        b["region"] = {{"lo", arr(bc.region.lo)}, {"hi", arr(bc.region.hi)}};
        b["component"] = bc.component;
        b["value"] = bc.value;
        break;
      case grid::BcKind::DirichletTemperature:
        b["kind"] = "dirichlet_temperature";
        b["region"] = {{"lo", arr(bc.region.lo)}, {"hi", arr(bc.region.hi)}};
        b["value"] = bc.value;
        break;
      case grid::BcKind::DirichletDensity:
        b["kind"] = "dirichlet_density";
        b["region"] = {{"lo", arr(bc.region.lo)}, {"hi", arr(bc.region.hi)}};
        b["value_per_phase"] = bc.density_value;
        break;
      case grid::BcKind::PointLoad:
        b["kind"] = "point_load";
        b["at"] = arr(bc.region.point());
        b["direction"] = arr(bc.direction);
        b["value"] = bc.value;
        break;
      case grid::BcKind::PointSpring:
        b["kind"] = "point_spring";
        b["at"] = arr(bc.region.point());
        b["direction"] = arr(bc.direction);
        b["stiffness"] = bc.stiffness;
        break;
      default:
        fail("config.serialize", "unsupported bc kind in '" + bc.name + "'");
    }
    bcs.push_back(b);
  }
  j["bcs"] = bcs;
  if (s.output.valid()) {
    j["output"]["at"] = arr(s.output.at);
    j["output"]["direction"] = arr(s.output.direction);
  }
  j["physics"] = {{"h_v", s.h_v},
                  {"t_inf", s.t_inf},
                  {"t_ref", s.t_ref},
                  {"source_density", s.source_density},
                  {"isothermal_adjoint", s.isothermal_adjoint}};
  j["constraints"] = {
      {"psi_m", s.psi_m}, {"m0", s.m0}, {"psi_p", s.psi_p}, {"p0", s.p0}};
  j["grids"] = {{"coarse", arri(s.coarse)},
                {"fine", arri(s.fine)},
                {"n_g", s.n_g}};
  j["net"] = {{"n_rep", s.net.n_rep},   {"n_f", s.net.n_f},
              {"res", s.net.res},       {"t_scale", s.net.t_scale},
              {"t_offset", s.net.t_offset}, {"t_init", s.net.t_init}};
  j["train"] = {{"n_tol", s.train.n_tol},
                {"gamma", s.train.gamma},
                {"omega_m", s.train.omega_m},
                {"omega_t", s.train.omega_t},
                {"omega_v", s.train.omega_v},
                {"omega_p", s.train.omega_p},
                {"lr", s.train.lr},
                {"lr_drop", s.train.lr_drop},
                {"penal_final", s.train.penal_final},
                {"seed", s.train.seed},
                {"checkpoint_every", s.train.checkpoint_every},
                {"adjoint_spring_uses_primary",
                 s.train.adjoint_spring_uses_primary}};
  return j.dump(2) + "\n";
}

// --- history -----------------------------------------------------------------

std::string history_header(int n_phases) {
  std::string h = "# schema gptop-history-v1\n";
  h += "epoch,grid,lr,penal,psi_m,psi_p,total,sens,loss_mech,loss_mech_adj,"
       "loss_thermal,loss_thermal_adj,c_mass,c_cost,mass,cost,objective,"
       "strain_energy,spring_energy,external_work,thermal_energy,"
       "convection_energy,source_energy,gray_total";
  for (int i = 0; i < n_phases; ++i) h += ",gray_" + std::to_string(i);
  h += "\n";
  return h;
}

std::string history_row(const trainer::EpochRecord& r, int n_phases) {
  std::string row = std::to_string(r.epoch) + "," + std::to_string(r.grid);
  for (double v :
       {r.lr, r.penal, r.psi_m, r.psi_p, r.loss.total, r.loss.sens,
        r.loss.mech, r.loss.mech_adj, r.loss.thermal, r.loss.thermal_adj,
        r.loss.c_mass, r.loss.c_cost, r.energy.mass, r.energy.cost,
        r.energy.objective, r.energy.strain, r.energy.spring,
        r.energy.external_work, r.energy.thermal, r.energy.convection,
        r.energy.source, r.gray_total})
    row += "," + fmt(v);
  for (int i = 0; i < n_phases; ++i)
    row += "," + fmt(i < r.gray_phase.size() ? r.gray_phase[i] : 0.0);
  row += "\n";
  return row;
}

HistoryWriter::HistoryWriter(const std::string& path, int n_phases)
    : out_(open_out(path)), n_phases_(n_phases) {
  out_ << history_header(n_phases_);
  out_.flush();
}

void HistoryWriter::append(const trainer::EpochRecord& r) {
  out_ << history_row(r, n_phases_);
  out_.flush();
  require(out_.good(), "io.write", "history write failed");
}

void write_history_csv(const std::string& path,
                       const std::vector<trainer::EpochRecord>& hist,
                       int n_phases) {
  std::ofstream out = open_out(path);
  out << history_header(n_phases);
  for (const auto& r : hist) out << history_row(r, n_phases);
  require(out.good(), "io.write", "history write failed");
}

// --- design table ------------------------------------------------------------

void write_design_csv(const std::string& path, const grid::CollocationGrid& g,
                      const Eigen::MatrixXd& rho) {
  require(rho.cols() == g.n_elems(), "io.design", "density count mismatch");
  std::ofstream out = open_out(path);
  out << "# schema gptop-design-v1\n";
  out << "elem,x,y";
  if (g.dim == 3) out << ",z";
  out << ",phase";
  for (int i = 0; i < rho.rows(); ++i) out << ",rho_" << i;
  out << "\n";
  for (int e = 0; e < g.n_elems(); ++e) {
    int best = 0;
    rho.col(e).maxCoeff(&best);
    out << e;
    for (int a = 0; a < g.dim; ++a) out << "," << fmt(g.centers(a, e));
    out << "," << best;
    for (int i = 0; i < rho.rows(); ++i) out << "," << fmt(rho(i, e));
    out << "\n";
  }
  require(out.good(), "io.write", "design write failed");
}

Eigen::MatrixXd load_design_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  require(bool(std::getline(in, line)) && line == "# schema gptop-design-v1",
          "io.design", "'" + path + "' is not a design table");
  require(bool(std::getline(in, line)), "io.design", "missing design header");
  int n_phases = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ','))
      if (col.rfind("rho_", 0) == 0) ++n_phases;
  }
  require(n_phases > 0, "io.design", "no density columns in '" + path + "'");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail("io.design", "non-numeric design cell '" + cell + "'");
      }
    }
    require(int(vals.size()) >= n_phases, "io.design", "short design row");
    rows.emplace_back(vals.end() - n_phases, vals.end());
  }
  MatrixXd rho(n_phases, int(rows.size()));
  for (int e = 0; e < int(rows.size()); ++e)
    for (int i = 0; i < n_phases; ++i) rho(i, e) = rows[e][i];
  return rho;
}

// --- rasters -------------------------------------------------------------

namespace {

std::array<int, 3> phase_color(const std::string& name, int index) {
  if (name == "void") return {255, 255, 255};
  if (name == "m1" || name == "Fe") return {60, 170, 60};
  if (name == "m2" || name == "Al") return {60, 90, 200};
  if (name == "m3" || name == "Ni") return {200, 50, 50};
  if (name == "Cu") return {230, 140, 40};
  if (name == "Ti") return {140, 70, 180};
  static const std::array<std::array<int, 3>, 6> cycle = {{{200, 50, 50},
                                                           {60, 170, 60},
                                                           {60, 90, 200},
                                                           {230, 140, 40},
                                                           {140, 70, 180},
                                                           {90, 200, 200}}};
  return cycle[index % 6];
}

}  // namespace

void write_phase_pgm(const std::string& path, const grid::CollocationGrid& g,
                     const Eigen::RowVectorXd& rho_phase) {
  require(g.dim == 2, "io.raster", "rasters are 2D only");
  require(rho_phase.size() == g.n_elems(), "io.raster", "density mismatch");
  const Eigen::Vector3i c = g.cells();
  std::ofstream out = open_out(path);
  out << "P2\n" << c.x() << " " << c.y() << "\n255\n";
  for (int iy = c.y() - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < c.x(); ++ix) {
      const int e = g.cell_lut[g.cell_index(ix, iy, 0)];
      int v = 0;
      if (e >= 0)
        v = std::clamp(int(std::lround(rho_phase[e] * 255.0)), 0, 255);
      out << v << (ix + 1 == c.x() ? "" : " ");
    }
    out << "\n";
  }
  require(out.good(), "io.write", "raster write failed");
}

void write_phase_ppm(const std::string& path, const grid::CollocationGrid& g,
                     const Eigen::MatrixXd& rho,
                     const std::vector<std::string>& phase_names) {
  require(g.dim == 2, "io.raster", "rasters are 2D only");
  require(rho.cols() == g.n_elems() &&
              int(phase_names.size()) == rho.rows(),
          "io.raster", "density/name mismatch");
  const Eigen::Vector3i c = g.cells();
  std::ofstream out = open_out(path);
  out << "P3\n" << c.x() << " " << c.y() << "\n255\n";
  for (int iy = c.y() - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < c.x(); ++ix) {
      int r = 0, gg = 0, b = 0;
      const int e = g.cell_lut[g.cell_index(ix, iy, 0)];
      if (e >= 0) {
        int best = 0;
        const double w = rho.col(e).maxCoeff(&best);
        const std::array<int, 3> col = phase_color(phase_names[best], best);
        // Blend toward white with the winning density so gray regions wash out.
        r = std::clamp(int(std::lround(255 + (col[0] - 255) * w)), 0, 255);
        gg = std::clamp(int(std::lround(255 + (col[1] - 255) * w)), 0, 255);
        b = std::clamp(int(std::lround(255 + (col[2] - 255) * w)), 0, 255);
      }
      out << r << " " << gg << " " << b << (ix + 1 == c.x() ? "" : "  ");
    }
    out << "\n";
  }
  require(out.good(), "io.write", "raster write failed");
}

// --- VTK -----------------------------------------------------------------

void write_vtk(const std::string& path, const grid::CollocationGrid& g,
               const Eigen::MatrixXd& rho,
               const std::vector<std::string>& phase_names) {
  require(rho.cols() == g.n_elems() &&
              int(phase_names.size()) == rho.rows(),
          "io.vtk", "density/name mismatch");
  const Eigen::Vector3i n = g.npts;
  const Eigen::Vector3i c = g.cells();
  const int n_cells = c.x() * c.y() * c.z();
  std::ofstream out = open_out(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "gptop design\n";
  out << "ASCII\nDATASET RECTILINEAR_GRID\n";
  out << "DIMENSIONS " << n.x() << " " << n.y() << " "
      << (g.dim == 3 ? n.z() : 1) << "\n";
  auto coords = [&](const char* label, int count, double h) {
    out << label << " " << count << " double\n";
    for (int i = 0; i < count; ++i) out << fmt(i * h) << "\n";
  };
  coords("X_COORDINATES", n.x(), g.h.x());
  coords("Y_COORDINATES", n.y(), g.h.y());
  if (g.dim == 3)
    coords("Z_COORDINATES", n.z(), g.h.z());
  else
    out << "Z_COORDINATES 1 double\n0\n";
  out << "CELL_DATA " << n_cells << "\n";
  out << "SCALARS phase int 1\nLOOKUP_TABLE default\n";
  auto for_cells = [&](auto&& emit) {
    for (int iz = 0; iz < c.z(); ++iz)
      for (int iy = 0; iy < c.y(); ++iy)
        for (int ix = 0; ix < c.x(); ++ix)
          emit(g.cell_lut[g.cell_index(ix, iy, iz)]);
  };
  for_cells([&](int e) {
    int best = -1;
    if (e >= 0) rho.col(e).maxCoeff(&best);
    out << best << "\n";
  });
  for (int i = 0; i < rho.rows(); ++i) {
    out << "SCALARS rho_" << phase_names[i] << " double 1\n"
        << "LOOKUP_TABLE default\n";
    for_cells([&](int e) { out << (e >= 0 ? fmt(rho(i, e)) : "-1") << "\n"; });
  }
  require(out.good(), "io.write", "vtk write failed");
}

// --- run metadata ----------------------------------------------------------

void write_run_json(const std::string& path, const problem::Assembled& a,
                    double psi_m0, double psi_p0) {
  const gp::Kernel kernel{};
  json j;
  j["schema"] = "gptop-run-v1";
  j["name"] = a.spec.name;
  j["class"] = problem::class_name(a.spec.cls);
  j["alpha_u"] = a.scales.alpha_u;
  j["alpha_t"] = a.scales.alpha_t;
  j["kernel"] = {{"s2", kernel.s2}, {"phi", kernel.phi},
                 {"delta", kernel.delta}};
  j["conditioning_cap"] = problem::kConditioningCap;
  json cond;
  for (int comp = 0; comp < a.dim(); ++comp)
    cond["u" + std::to_string(comp)] =
        a.u_cond[comp].valid() ? a.u_cond[comp].n() : 0;
  cond["t"] = a.t_cond.valid() ? a.t_cond.n() : 0;
  json rho_cond = json::array();
  for (const auto& f : a.rho_cond) rho_cond.push_back(f.valid() ? f.n() : 0);
  cond["rho"] = rho_cond;
  j["conditioning_points"] = cond;
  j["psi_m0"] = psi_m0;
  j["psi_p0"] = psi_p0;
  j["seed"] = a.spec.train.seed;
  j["grids"] = a.family.size();
  j["finest_nodes"] = a.finest().n_nodes();
  j["finest_elems"] = a.finest().n_elems();
  j["config"] = json::parse(serialize_spec(a.spec));
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  require(out.good(), "io.write", "run metadata write failed");
}

// --- checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'P', 'T', 'O', 'P', 'C', 'K', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  require(in.good(), "checkpoint.read", "truncated checkpoint");
  return v;
}

std::vector<const nn::PgcanNet*> net_slots(const problem::Assembled& a) {
  return {a.u_net.get(), a.t_net.get(), a.rho_net.get(), a.v_net.get(),
          a.vt_net.get()};
}

std::vector<nn::PgcanNet*> net_slots(problem::Assembled& a) {
  return {a.u_net.get(), a.t_net.get(), a.rho_net.get(), a.v_net.get(),
          a.vt_net.get()};
}

}  // namespace

void save_checkpoint(const std::string& path, const problem::Assembled& a) {
  std::ofstream out = open_out(path, true);
  out.write(kMagic, sizeof kMagic);
  for (const nn::PgcanNet* net : net_slots(a)) {
    const std::uint8_t present = net != nullptr;
    out.write(reinterpret_cast<const char*>(&present), 1);
    if (!net) continue;
    write_u32(out, std::uint32_t(net->params().size()));
    for (const auto& p : net->params()) {
      write_u32(out, std::uint32_t(p.rows()));
      write_u32(out, std::uint32_t(p.cols()));
      out.write(reinterpret_cast<const char*>(p.data()),
                std::streamsize(sizeof(double) * p.size()));
    }
  }
  require(out.good(), "io.write", "checkpoint write failed");
}

void load_checkpoint(const std::string& path, problem::Assembled& a) {
  std::ifstream in = open_in(path, true);
  char magic[8];
  in.read(magic, sizeof magic);
  require(in.good() && std::memcmp(magic, kMagic, sizeof kMagic) == 0,
          "checkpoint.magic", "'" + path + "' is not a checkpoint");
  for (nn::PgcanNet* net : net_slots(a)) {
    std::uint8_t present = 0;
    in.read(reinterpret_cast<char*>(&present), 1);
    require(in.good(), "checkpoint.read", "truncated checkpoint");
    require(bool(present) == (net != nullptr), "checkpoint.shape",
            "checkpoint field set does not match the problem");
    if (!net) continue;
    const std::uint32_t n = read_u32(in);
    require(n == net->params().size(), "checkpoint.shape",
            "parameter count mismatch");
    for (auto& p : net->params()) {
      const std::uint32_t rows = read_u32(in), cols = read_u32(in);
      require(rows == std::uint32_t(p.rows()) &&
                  cols == std::uint32_t(p.cols()),
              "checkpoint.shape", "parameter shape mismatch");
      in.read(reinterpret_cast<char*>(p.data()),
              std::streamsize(sizeof(double) * p.size()));
      require(in.good(), "checkpoint.read", "truncated checkpoint");
    }
  }
}

}  // namespace gptop::io
