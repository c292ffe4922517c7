#include "gptop/fem.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <queue>

#include "gptop/common.hpp"
#include "gptop/shapefn.hpp"

namespace gptop::fem {
namespace {

using grid::CollocationGrid;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct GaussPoint {
  VectorXd shape;   // nen
  MatrixXd b_u;     // nvoigt x dim*nen
  MatrixXd b_t;     // dim x nen
  double w = 0.0;   // detJ * weight * thickness
};

// All elements of a collocation grid are congruent axis-aligned boxes, so
// the reference-element data is computed once from element 0.
std::vector<GaussPoint> gauss_points(const CollocationGrid& g,
                                     double thickness) {
  const int dim = g.dim;
  const int nen = dim == 2 ? 4 : 8;
  MatrixXd coords(dim, nen);
  for (int j = 0; j < nen; ++j) coords.col(j) = g.nodes.col(g.elems(j, 0));

  const double a = 1.0 / std::sqrt(3.0);
  std::vector<VectorXd> pts;
  if (dim == 2) {
    for (double e : {-a, a})
      for (double x : {-a, a}) pts.push_back(Eigen::Vector2d(x, e));
  } else {
    for (double z : {-a, a})
      for (double e : {-a, a})
        for (double x : {-a, a}) pts.push_back(Eigen::Vector3d(x, e, z));
  }

  std::vector<GaussPoint> out;
  for (const VectorXd& xi : pts) {
    MatrixXd dndxi(dim, nen);
    VectorXd n(nen);
    if (dim == 2) {
      n = shapefn::quad_values(xi[0], xi[1]);
      dndxi = shapefn::quad_gradients(xi[0], xi[1]);
    } else {
      n = shapefn::hex_values(xi[0], xi[1], xi[2]);
      dndxi = shapefn::hex_gradients(xi[0], xi[1], xi[2]);
    }
    MatrixXd jac = coords * dndxi.transpose();
    const double detj = jac.determinant();
    require(detj > 0.0, "fem.jacobian", "non-positive jacobian");
    MatrixXd dndx = jac.transpose().lu().solve(dndxi);

    GaussPoint gp;
    gp.shape = n;
    gp.b_t = dndx;
    const int nvoigt = dim == 2 ? 3 : 6;
    gp.b_u = MatrixXd::Zero(nvoigt, dim * nen);
    for (int j = 0; j < nen; ++j) {
      if (dim == 2) {
        gp.b_u(0, 2 * j) = dndx(0, j);
        gp.b_u(1, 2 * j + 1) = dndx(1, j);
        gp.b_u(2, 2 * j) = dndx(1, j);
        gp.b_u(2, 2 * j + 1) = dndx(0, j);
      } else {
        gp.b_u(0, 3 * j) = dndx(0, j);
        gp.b_u(1, 3 * j + 1) = dndx(1, j);
        gp.b_u(2, 3 * j + 2) = dndx(2, j);
        gp.b_u(3, 3 * j + 1) = dndx(2, j);
        gp.b_u(3, 3 * j + 2) = dndx(1, j);
        gp.b_u(4, 3 * j) = dndx(2, j);
        gp.b_u(4, 3 * j + 2) = dndx(0, j);
        gp.b_u(5, 3 * j) = dndx(1, j);
        gp.b_u(5, 3 * j + 1) = dndx(0, j);
      }
    }
    gp.w = detj * (dim == 2 ? thickness : 1.0);
    out.push_back(std::move(gp));
  }
  return out;
}

MatrixXd unit_stiffness(const std::vector<GaussPoint>& gps, int dim, double nu,
                        bool plane_stress) {
  MatrixXd c = materials::constitutive_matrix(1.0, nu, dim, plane_stress);
  MatrixXd k = MatrixXd::Zero(gps[0].b_u.cols(), gps[0].b_u.cols());
  for (const auto& gp : gps) k += gp.w * gp.b_u.transpose() * c * gp.b_u;
  return k;
}

MatrixXd unit_conduction(const std::vector<GaussPoint>& gps) {
  MatrixXd k = MatrixXd::Zero(gps[0].b_t.cols(), gps[0].b_t.cols());
  for (const auto& gp : gps) k += gp.w * gp.b_t.transpose() * gp.b_t;
  return k;
}

MatrixXd unit_mass(const std::vector<GaussPoint>& gps) {
  MatrixXd m = MatrixXd::Zero(gps[0].shape.size(), gps[0].shape.size());
  for (const auto& gp : gps) m += gp.w * gp.shape * gp.shape.transpose();
  return m;
}

VectorXd unit_source(const std::vector<GaussPoint>& gps) {
  VectorXd s = VectorXd::Zero(gps[0].shape.size());
  for (const auto& gp : gps) s += gp.w * gp.shape;
  return s;
}

// int B^T C_unit iota N^T dV : maps nodal temperatures to the element
// thermal-load vector for unit modulus and unit expansion coefficient.
MatrixXd unit_coupling(const std::vector<GaussPoint>& gps, int dim, double nu,
                       bool plane_stress) {
  MatrixXd c = materials::constitutive_matrix(1.0, nu, dim, plane_stress);
  VectorXd iota = VectorXd::Zero(dim == 2 ? 3 : 6);
  for (int a = 0; a < dim; ++a) iota[a] = 1.0;
  MatrixXd m = MatrixXd::Zero(gps[0].b_u.cols(), gps[0].shape.size());
  for (const auto& gp : gps)
    m += gp.w * gp.b_u.transpose() * (c * iota) * gp.shape.transpose();
  return m;
}

VectorXd element_dofs(const CollocationGrid& g, const VectorXd& u, int e) {
  const int nen = g.elems.rows();
  VectorXd ue(g.dim * nen);
  for (int j = 0; j < nen; ++j)
    for (int a = 0; a < g.dim; ++a)
      ue[g.dim * j + a] = u[g.dim * g.elems(j, e) + a];
  return ue;
}

VectorXd element_scalars(const CollocationGrid& g, const VectorXd& t, int e) {
  const int nen = g.elems.rows();
  VectorXd te(nen);
  for (int j = 0; j < nen; ++j) te[j] = t[g.elems(j, e)];
  return te;
}

struct ReducedSystem {
  Eigen::SparseMatrix<double> k;
  VectorXd f;
  std::vector<int> map;  // full dof -> reduced index or -1
  int n_free = 0;
};

ReducedSystem reduce(const std::vector<Eigen::Triplet<double>>& trips,
                     const VectorXd& f_full,
                     const std::vector<std::pair<int, double>>& prescribed,
                     int n_dofs) {
  ReducedSystem rs;
  rs.map.assign(n_dofs, 0);
  VectorXd fixed_vals = VectorXd::Zero(n_dofs);
  for (const auto& [dof, val] : prescribed) {
    require(dof >= 0 && dof < n_dofs, "fem.dof", "prescribed dof out of range");
    rs.map[dof] = -1;
    fixed_vals[dof] = val;
  }
  for (int i = 0; i < n_dofs; ++i)
    if (rs.map[i] != -1) rs.map[i] = rs.n_free++;
  require(rs.n_free > 0, "fem.fully_constrained", "no free dofs");

  rs.f = VectorXd::Zero(rs.n_free);
  for (int i = 0; i < n_dofs; ++i)
    if (rs.map[i] >= 0) rs.f[rs.map[i]] = f_full[i];

  std::vector<Eigen::Triplet<double>> red;
  red.reserve(trips.size());
  for (const auto& t : trips) {
    const int ri = rs.map[t.row()], ci = rs.map[t.col()];
    if (ri >= 0 && ci >= 0) {
      red.emplace_back(ri, ci, t.value());
    } else if (ri >= 0 && ci < 0) {
      rs.f[ri] -= t.value() * fixed_vals[t.col()];
    }
  }
  rs.k.resize(rs.n_free, rs.n_free);
  rs.k.setFromTriplets(red.begin(), red.end());
  return rs;
}

VectorXd solve_reduced(const ReducedSystem& rs, double* residual,
                       const std::vector<std::pair<int, double>>& prescribed,
                       int n_dofs) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(rs.k);
  require(ldlt.info() == Eigen::Success, "fem.singular",
          "stiffness factorization failed");
  VectorXd x = ldlt.solve(rs.f);
  if (residual) {
    const double fn = rs.f.norm();
    *residual = (rs.k * x - rs.f).norm() / std::max(1.0, fn);
  }
  VectorXd full = VectorXd::Zero(n_dofs);
  for (int i = 0; i < n_dofs; ++i)
    if (rs.map[i] >= 0) full[i] = x[rs.map[i]];
  for (const auto& [dof, val] : prescribed) full[dof] = val;
  return full;
}

}  // namespace

MechanicalSolution solve_mechanical(const CollocationGrid& g,
                                    const VectorXd& e_elem, double nu,
                                    bool plane_stress, double thickness,
                                    const MechanicalBc& bc,
                                    const VectorXd* alpha_elem,
                                    const VectorXd* t_nodal, double t_ref) {
  const int ne = static_cast<int>(g.elems.cols());
  require(e_elem.size() == ne, "fem.shape", "modulus vector length");
  auto gps = gauss_points(g, thickness);
  MatrixXd k0 = unit_stiffness(gps, g.dim, nu, plane_stress);
  const int nen = g.elems.rows();
  const int n_dofs = g.dim * static_cast<int>(g.nodes.cols());

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(ne) * k0.size());
  VectorXd f = VectorXd::Zero(n_dofs);

  MatrixXd cpl;
  if (alpha_elem) {
    require(t_nodal, "fem.shape", "thermal strain needs a temperature field");
    cpl = unit_coupling(gps, g.dim, nu, plane_stress);
  }

  for (int e = 0; e < ne; ++e) {
    std::vector<int> dofs(g.dim * nen);
    for (int j = 0; j < nen; ++j)
      for (int a = 0; a < g.dim; ++a)
        dofs[g.dim * j + a] = g.dim * g.elems(j, e) + a;
    for (int r = 0; r < k0.rows(); ++r)
      for (int c = 0; c < k0.cols(); ++c)
        trips.emplace_back(dofs[r], dofs[c], e_elem[e] * k0(r, c));
    if (alpha_elem) {
      VectorXd dt = element_scalars(g, *t_nodal, e).array() - t_ref;
      VectorXd fe = e_elem[e] * (*alpha_elem)[e] * (cpl * dt);
      for (int r = 0; r < fe.size(); ++r) f[dofs[r]] += fe[r];
    }
  }

  for (const auto& s : bc.springs) {
    for (int a = 0; a < g.dim; ++a)
      for (int b = 0; b < g.dim; ++b)
        trips.emplace_back(g.dim * s.node + a, g.dim * s.node + b,
                           s.k * s.dir[a] * s.dir[b]);
  }
  for (const auto& [node, force] : bc.loads)
    for (int a = 0; a < g.dim; ++a) f[g.dim * node + a] += force[a];

  std::vector<std::pair<int, double>> prescribed;
  for (int a = 0; a < g.dim; ++a)
    for (int node : bc.fixed[a]) prescribed.emplace_back(g.dim * node + a, 0.0);
  for (const auto& [node, comp, val] : bc.prescribed)
    prescribed.emplace_back(g.dim * node + comp, val);

  ReducedSystem rs = reduce(trips, f, prescribed, n_dofs);
  MechanicalSolution sol;
  sol.u = solve_reduced(rs, &sol.residual, prescribed, n_dofs);
  for (const auto& [node, force] : bc.loads)
    for (int a = 0; a < g.dim; ++a)
      sol.external_work += force[a] * sol.u[g.dim * node + a];
  return sol;
}

ThermalSolution solve_thermal(const CollocationGrid& g,
                              const VectorXd& kappa_elem, double thickness,
                              const ThermalBc& bc, const VectorXd& source_elem,
                              const VectorXd* nodal_rhs) {
  const int ne = static_cast<int>(g.elems.cols());
  require(kappa_elem.size() == ne && source_elem.size() == ne, "fem.shape",
          "per-element vector length");
  auto gps = gauss_points(g, thickness);
  MatrixXd k0 = unit_conduction(gps);
  MatrixXd m0 = bc.h_v > 0.0 ? unit_mass(gps) : MatrixXd();
  VectorXd s0 = unit_source(gps);
  const int nen = g.elems.rows();
  const int n_dofs = static_cast<int>(g.nodes.cols());

  std::vector<Eigen::Triplet<double>> trips;
  VectorXd f = VectorXd::Zero(n_dofs);
  for (int e = 0; e < ne; ++e) {
    for (int r = 0; r < nen; ++r) {
      const int gr = g.elems(r, e);
      for (int c = 0; c < nen; ++c) {
        double v = kappa_elem[e] * k0(r, c);
        if (bc.h_v > 0.0) v += bc.h_v * m0(r, c);
        trips.emplace_back(gr, g.elems(c, e), v);
      }
      f[gr] += source_elem[e] * s0[r];
      if (bc.h_v > 0.0) f[gr] += bc.h_v * bc.t_ambient * s0[r];
    }
  }
  if (nodal_rhs) {
    require(nodal_rhs->size() == n_dofs, "fem.shape", "nodal rhs length");
    f += *nodal_rhs;
  }

  ReducedSystem rs = reduce(trips, f, bc.fixed, n_dofs);
  ThermalSolution sol;
  sol.t = solve_reduced(rs, &sol.residual, bc.fixed, n_dofs);
  return sol;
}

VectorXd element_strain_product(const CollocationGrid& g, const VectorXd& u,
                                const VectorXd& v, double nu,
                                bool plane_stress, double thickness) {
  auto gps = gauss_points(g, thickness);
  MatrixXd k0 = unit_stiffness(gps, g.dim, nu, plane_stress);
  const int ne = static_cast<int>(g.elems.cols());
  VectorXd out(ne);
  for (int e = 0; e < ne; ++e)
    out[e] = element_dofs(g, u, e).dot(k0 * element_dofs(g, v, e));
  return out;
}

VectorXd element_conduction_product(const CollocationGrid& g, const VectorXd& t,
                                    const VectorXd& vt, double thickness) {
  auto gps = gauss_points(g, thickness);
  MatrixXd k0 = unit_conduction(gps);
  const int ne = static_cast<int>(g.elems.cols());
  VectorXd out(ne);
  for (int e = 0; e < ne; ++e)
    out[e] = element_scalars(g, t, e).dot(k0 * element_scalars(g, vt, e));
  return out;
}

VectorXd element_thermal_coupling(const CollocationGrid& g, const VectorXd& v,
                                  const VectorXd& t_nodal, double t_ref,
                                  double nu, bool plane_stress,
                                  double thickness) {
  auto gps = gauss_points(g, thickness);
  MatrixXd cpl = unit_coupling(gps, g.dim, nu, plane_stress);
  const int ne = static_cast<int>(g.elems.cols());
  VectorXd out(ne);
  for (int e = 0; e < ne; ++e) {
    VectorXd dt = element_scalars(g, t_nodal, e).array() - t_ref;
    out[e] = element_dofs(g, v, e).dot(cpl * dt);
  }
  return out;
}

VectorXd assemble_coupling_load(const CollocationGrid& g, const VectorXd& v,
                                const VectorXd& ealpha_elem, double nu,
                                bool plane_stress, double thickness) {
  auto gps = gauss_points(g, thickness);
  MatrixXd cpl = unit_coupling(gps, g.dim, nu, plane_stress);
  VectorXd out = VectorXd::Zero(g.nodes.cols());
  const int nen = g.elems.rows();
  for (int e = 0; e < g.n_elems(); ++e) {
    VectorXd fe = ealpha_elem[e] * (cpl.transpose() * element_dofs(g, v, e));
    for (int j = 0; j < nen; ++j) out[g.elems(j, e)] += fe[j];
  }
  return out;
}

VectorXd element_source_product(const CollocationGrid& g, const VectorXd& vt,
                                double thickness) {
  auto gps = gauss_points(g, thickness);
  VectorXd s0 = unit_source(gps);
  const int ne = static_cast<int>(g.elems.cols());
  VectorXd out(ne);
  for (int e = 0; e < ne; ++e) out[e] = s0.dot(element_scalars(g, vt, e));
  return out;
}

double thermal_compliance(const CollocationGrid& g, const VectorXd& kappa_elem,
                          const VectorXd& t, double thickness) {
  VectorXd per_elem = element_conduction_product(g, t, t, thickness);
  return 0.5 * kappa_elem.dot(per_elem);
}

namespace {

// Solid-path check through node-shared neighbours from seed nodes to
// target nodes; a missing path means the evaluation is meaningless.
bool solid_path_exists(const CollocationGrid& g,
                       const std::vector<int>& phase_per_elem,
                       const std::vector<int>& seed_nodes,
                       const std::vector<int>& target_nodes) {
  const int ne = static_cast<int>(g.elems.cols());
  const int nn = static_cast<int>(g.nodes.cols());
  std::vector<std::vector<int>> node_elems(nn);
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < g.elems.rows(); ++j)
      node_elems[g.elems(j, e)].push_back(e);

  std::vector<char> target_node(nn, 0);
  for (int n : target_nodes) target_node[n] = 1;

  std::vector<char> visited(ne, 0);
  std::queue<int> q;
  for (int n : seed_nodes)
    for (int e : node_elems[n])
      if (phase_per_elem[e] != 0 && !visited[e]) {
        visited[e] = 1;
        q.push(e);
      }
  if (q.empty()) return false;

  while (!q.empty()) {
    int e = q.front();
    q.pop();
    for (int j = 0; j < g.elems.rows(); ++j) {
      const int n = g.elems(j, e);
      if (target_node[n]) return true;
      for (int e2 : node_elems[n])
        if (phase_per_elem[e2] != 0 && !visited[e2]) {
          visited[e2] = 1;
          q.push(e2);
        }
    }
  }
  return false;
}

}  // namespace

DesignEvaluation evaluate_design(const CollocationGrid& g,
                                 const std::vector<int>& phase_per_elem,
                                 const materials::MaterialSet& mats,
                                 const EvalCase& c) {
  const int ne = static_cast<int>(g.elems.cols());
  require(static_cast<int>(phase_per_elem.size()) == ne, "fem.shape",
          "phase vector length");
  const int np = static_cast<int>(mats.phases.size());
  VectorXd e_elem(ne), kappa_elem(ne), alpha_elem(ne), src_elem(ne);
  for (int e = 0; e < ne; ++e) {
    const int p = phase_per_elem[e];
    require(p >= 0 && p < np, "fem.phase", "phase index out of range");
    e_elem[e] = mats.phases[p].e;
    kappa_elem[e] = mats.phases[p].kappa;
    alpha_elem[e] = mats.phases[p].alpha;
    src_elem[e] = mats.penalize_source ? mats.phases[p].s : 0.0;
  }

  DesignEvaluation ev;
  const bool needs_mech = c.problem_class != ProblemClass::ThermalCompliance;
  if (needs_mech) {
    std::vector<int> seeds;
    if (c.problem_class == ProblemClass::Compliance) {
      for (const auto& [node, force] : c.mech.loads) seeds.push_back(node);
    } else {
      seeds.push_back(c.output_node);
    }
    std::vector<int> targets;
    for (int a = 0; a < g.dim; ++a)
      for (int n : c.mech.fixed[a]) targets.push_back(n);
    if (!solid_path_exists(g, phase_per_elem, seeds, targets)) {
      ev.connected = false;
      ev.diagnosis = "no solid path from load/output to supports";
      ev.objective = std::numeric_limits<double>::infinity();
      return ev;
    }
  }

  switch (c.problem_class) {
    case ProblemClass::Compliance: {
      auto sol = solve_mechanical(g, e_elem, mats.nu, mats.plane_stress,
                                  c.thickness, c.mech);
      ev.compliance = sol.external_work;
      ev.objective = ev.compliance;
      break;
    }
    case ProblemClass::ThermalCompliance: {
      VectorXd src = VectorXd::Constant(ne, c.source_density);
      auto sol = solve_thermal(g, kappa_elem, c.thickness, c.thermal, src);
      ev.objective = thermal_compliance(g, kappa_elem, sol.t, c.thickness);
      break;
    }
    case ProblemClass::Mechanism: {
      auto sol = solve_mechanical(g, e_elem, mats.nu, mats.plane_stress,
                                  c.thickness, c.mech);
      ev.compliance = sol.external_work;
      Eigen::Vector3d d = sol.displacement_at(c.output_node, g.dim);
      ev.u_out = c.output_dir.dot(d);
      ev.objective = ev.u_out;
      break;
    }
    case ProblemClass::ThermoDevice: {
      auto tsol = solve_thermal(g, kappa_elem, c.thickness, c.thermal, src_elem);
      auto sol = solve_mechanical(g, e_elem, mats.nu, mats.plane_stress,
                                  c.thickness, c.mech, &alpha_elem, &tsol.t,
                                  c.t_ref);
      Eigen::Vector3d d = sol.displacement_at(c.output_node, g.dim);
      ev.u_out = c.output_dir.dot(d);
      ev.objective = ev.u_out;
      break;
    }
  }
  return ev;
}

VectorXd fd_sensitivity(
    const std::function<double(const VectorXd&)>& objective,
    const VectorXd& rho, double h) {
  VectorXd g(rho.size());
  VectorXd r = rho;
  for (int i = 0; i < rho.size(); ++i) {
    const double base = r[i];
    r[i] = base + h;
    const double fp = objective(r);
    r[i] = base - h;
    const double fm = objective(r);
    r[i] = base;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double OrderedMap::value(double rho) const {
  const int n = static_cast<int>(knots_rho.size());
  rho = std::clamp(rho, knots_rho[0], knots_rho[n - 1]);
  int i = 0;
  while (i + 2 < n && rho > knots_rho[i + 1]) ++i;
  const double dr = knots_rho[i + 1] - knots_rho[i];
  const double t = (rho - knots_rho[i]) / dr;
  return knots_prop[i] + std::pow(t, penal) * (knots_prop[i + 1] - knots_prop[i]);
}

double OrderedMap::derivative(double rho) const {
  const int n = static_cast<int>(knots_rho.size());
  rho = std::clamp(rho, knots_rho[0], knots_rho[n - 1]);
  int i = 0;
  while (i + 2 < n && rho > knots_rho[i + 1]) ++i;
  const double dr = knots_rho[i + 1] - knots_rho[i];
  const double t = (rho - knots_rho[i]) / dr;
  return penal * std::pow(std::max(t, 0.0), penal - 1.0) *
         (knots_prop[i + 1] - knots_prop[i]) / dr;
}

OrderedMap ordered_map(const materials::MaterialSet& mats,
                       double materials::Phase::* prop, double penal) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& ph : mats.phases) pts.emplace_back(ph.rho_bar, ph.*prop);
  std::sort(pts.begin(), pts.end());
  OrderedMap m;
  m.penal = penal;
  m.knots_rho.resize(pts.size());
  m.knots_prop.resize(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i > 0)
      require(pts[i].first > pts[i - 1].first + 1e-12, "fem.ordered_knots",
              "phase mass densities must be distinct");
    m.knots_rho[i] = pts[i].first;
    m.knots_prop[i] = pts[i].second;
  }
  return m;
}

namespace {

// Hat-kernel density filter on element centers; radius in element units.
// The cell lattice bounds the neighbour scan to a fixed window per element.
Eigen::SparseMatrix<double> filter_matrix(const CollocationGrid& g,
                                          double rmin) {
  const int ne = static_cast<int>(g.elems.cols());
  const double radius = rmin * g.h.head(g.dim).minCoeff();
  const Eigen::Vector3i cells = g.cells();

  std::vector<Eigen::Vector3i> coords(ne);
  for (int ix = 0; ix < cells.x(); ++ix)
    for (int iy = 0; iy < cells.y(); ++iy)
      for (int iz = 0; iz < cells.z(); ++iz) {
        const int e = g.cell_lut[g.cell_index(ix, iy, iz)];
        if (e >= 0) coords[e] = {ix, iy, iz};
      }

  Eigen::Vector3i reach = Eigen::Vector3i::Zero();
  for (int a = 0; a < g.dim; ++a)
    reach[a] = static_cast<int>(std::ceil(radius / g.h[a]));

  std::vector<Eigen::Triplet<double>> trips;
  for (int e = 0; e < ne; ++e) {
    const Eigen::Vector3i c = coords[e];
    for (int dx = -reach.x(); dx <= reach.x(); ++dx)
      for (int dy = -reach.y(); dy <= reach.y(); ++dy)
        for (int dz = -reach.z(); dz <= reach.z(); ++dz) {
          const int ix = c.x() + dx, iy = c.y() + dy, iz = c.z() + dz;
          if (ix < 0 || iy < 0 || iz < 0 || ix >= cells.x() ||
              iy >= cells.y() || iz >= cells.z())
            continue;
          const int e2 = g.cell_lut[g.cell_index(ix, iy, iz)];
          if (e2 < 0) continue;
          const double d = (g.centers.col(e) - g.centers.col(e2)).norm();
          if (d <= radius) trips.emplace_back(e, e2, radius - d);
        }
  }
  Eigen::SparseMatrix<double> m(ne, ne);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

}  // namespace

SimpResult run_simp_baseline(const CollocationGrid& g,
                             const materials::MaterialSet& mats,
                             const EvalCase& c, const SimpConfig& cfg) {
  require(c.problem_class == ProblemClass::Compliance ||
              c.problem_class == ProblemClass::ThermalCompliance,
          "fem.baseline_class",
          "baseline supports compliance classes only");
  const int ne = static_cast<int>(g.elems.cols());
  const bool thermal = c.problem_class == ProblemClass::ThermalCompliance;

  OrderedMap emap, kmap;
  const auto& solid = mats.phases.back();
  if (cfg.ordered_multimaterial) {
    emap = ordered_map(mats, &materials::Phase::e, cfg.penal);
    kmap = ordered_map(mats, &materials::Phase::kappa, cfg.penal);
  }
  const double prop_min = thermal ? mats.phases[0].kappa : mats.phases[0].e;
  const double prop_max = thermal ? solid.kappa : solid.e;

  Eigen::SparseMatrix<double> filt = filter_matrix(g, cfg.rmin);
  VectorXd hs = filt * VectorXd::Ones(ne);

  VectorXd x = VectorXd::Constant(ne, cfg.volfrac);
  SimpResult res;
  VectorXd rho = x;

  auto property = [&](double r) {
    if (cfg.ordered_multimaterial)
      return thermal ? kmap.value(r) : emap.value(r);
    return prop_min + std::pow(r, cfg.penal) * (prop_max - prop_min);
  };
  auto dproperty = [&](double r) {
    if (cfg.ordered_multimaterial)
      return thermal ? kmap.derivative(r) : emap.derivative(r);
    return cfg.penal * std::pow(r, cfg.penal - 1.0) * (prop_max - prop_min);
  };

  for (int it = 0; it < cfg.max_iters; ++it) {
    rho = (filt * x).array() / hs.array();

    VectorXd prop(ne);
    for (int e = 0; e < ne; ++e) prop[e] = property(rho[e]);

    double obj;
    VectorXd per_elem;
    if (thermal) {
      VectorXd src = VectorXd::Constant(ne, c.source_density);
      auto sol = solve_thermal(g, prop, c.thickness, c.thermal, src);
      per_elem = element_conduction_product(g, sol.t, sol.t, c.thickness);
      obj = 0.5 * prop.dot(per_elem);
    } else {
      auto sol = solve_mechanical(g, prop, mats.nu, mats.plane_stress,
                                  c.thickness, c.mech);
      per_elem = element_strain_product(g, sol.u, sol.u, mats.nu,
                                        mats.plane_stress, c.thickness);
      obj = sol.external_work;
    }
    res.history.push_back(obj);
    res.objective = obj;
    res.iters = it + 1;

    // dC/drho_e = -dprop * (u_e . k0 u_e); fixed load or source keeps the
    // classical adjoint-free form (factor 1 mech, 1/2+adjoint = 1 thermal
    // since the source term contributes the opposite sign twice).
    VectorXd dc(ne);
    for (int e = 0; e < ne; ++e) dc[e] = -dproperty(rho[e]) * per_elem[e];
    if (thermal) dc *= 0.5;  // obj has the 1/2; source is design independent
    // Chain through the (symmetric) filter.
    dc = filt * (dc.array() / hs.array()).matrix();

    // Mass is linear in the design coordinate for ordered phase knots.
    double l1 = 1e-9, l2 = 1e9;
    VectorXd xnew(ne);
    while ((l2 - l1) / (l1 + l2) > cfg.bisection_tol) {
      const double lmid = 0.5 * (l1 + l2);
      for (int e = 0; e < ne; ++e) {
        const double b = std::sqrt(std::max(-dc[e], 0.0) / lmid);
        double v = x[e] * b;
        v = std::min(v, x[e] + cfg.move);
        v = std::max(v, x[e] - cfg.move);
        xnew[e] = std::clamp(v, 0.0, 1.0);
      }
      VectorXd rnew = (filt * xnew).array() / hs.array();
      if (rnew.sum() > cfg.volfrac * ne)
        l1 = lmid;
      else
        l2 = lmid;
    }
    const double change = (xnew - x).cwiseAbs().maxCoeff();
    x = xnew;
    if (change < cfg.change_tol) break;
  }

  res.rho = (filt * x).array() / hs.array();
  return res;
}

}  // namespace gptop::fem
