#include "gptop/physics.hpp"

namespace gptop::physics {

using ad::Var;

Quadrature build_quadrature(const grid::CollocationGrid& grid,
                            double thickness) {
  Quadrature q;
  q.dim = grid.dim;
  q.thickness = grid.dim == 2 ? thickness : 1.0;
  const auto geom = shapefn::build_element_geometry(grid);
  const int ne = grid.n_elems();
  const int nn = grid.n_nodes();
  const int nen = grid.nodes_per_elem();

  std::vector<std::vector<Eigen::Triplet<double>>> trips(grid.dim);
  std::vector<Eigen::Triplet<double>> ctr;
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < nen; ++j) {
      const int n = grid.elems(j, e);
      for (int a = 0; a < grid.dim; ++a)
        trips[a].emplace_back(n, e, geom.dndx[e](a, j));
      ctr.emplace_back(n, e, 1.0 / nen);
    }
  for (int a = 0; a < grid.dim; ++a) {
    q.grad[a].resize(nn, ne);
    q.grad[a].setFromTriplets(trips[a].begin(), trips[a].end());
  }
  q.center.resize(nn, ne);
  q.center.setFromTriplets(ctr.begin(), ctr.end());

  q.w_geo = (geom.omega_g * geom.detj).transpose();
  q.w = q.thickness * q.w_geo;
  q.volume = q.w_geo.sum();
  return q;
}

Var property_row(Var rho, const Eigen::VectorXd& props, double p) {
  return ad::matmul_const_left(props.transpose(), ad::pow_const(rho, p));
}

Strains strain_rows(const Quadrature& q, Var u1, Var u2, Var u3) {
  Strains s;
  s.e11 = ad::mul_sparse_right(u1, q.grad[0]);
  s.e22 = ad::mul_sparse_right(u2, q.grad[1]);
  s.g12 = ad::add(ad::mul_sparse_right(u1, q.grad[1]),
                  ad::mul_sparse_right(u2, q.grad[0]));
  if (q.dim == 3) {
    require(u3.valid(), "physics.fields", "3D strains need a third component");
    s.e33 = ad::mul_sparse_right(u3, q.grad[2]);
    s.g23 = ad::add(ad::mul_sparse_right(u2, q.grad[2]),
                    ad::mul_sparse_right(u3, q.grad[1]));
    s.g13 = ad::add(ad::mul_sparse_right(u1, q.grad[2]),
                    ad::mul_sparse_right(u3, q.grad[0]));
  }
  return s;
}

std::array<Var, 3> gradient_rows(const Quadrature& q, Var t) {
  std::array<Var, 3> g;
  for (int a = 0; a < q.dim; ++a) g[a] = ad::mul_sparse_right(t, q.grad[a]);
  return g;
}

Var center_values(const Quadrature& q, Var t) {
  return ad::mul_sparse_right(t, q.center);
}

Var elastic_energy(const Quadrature& q, const Strains& s, Var e_row, double nu,
                   bool plane_stress, Var thermal_strain) {
  Var e11 = s.e11, e22 = s.e22, e33 = s.e33;
  if (thermal_strain.valid()) {
    e11 = ad::sub(e11, thermal_strain);
    e22 = ad::sub(e22, thermal_strain);
    if (q.dim == 3) e33 = ad::sub(e33, thermal_strain);
  }

  Var w;  // strain-energy density per unit modulus
  if (q.dim == 2 && plane_stress) {
    const double c11 = 1.0 / (1.0 - nu * nu);
    const double c12 = nu * c11;
    const double g = 1.0 / (2.0 * (1.0 + nu));
    w = ad::add(
        ad::scale(ad::add(ad::square(e11), ad::square(e22)), 0.5 * c11),
        ad::add(ad::scale(ad::cmul(e11, e22), c12),
                ad::scale(ad::square(s.g12), 0.5 * g)));
  } else {
    // Plane strain and 3D share the Lame form; plane strain drops e33.
    const double lam = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = 1.0 / (2.0 * (1.0 + nu));
    Var tr = ad::add(e11, e22);
    Var nrm = ad::add(ad::square(e11), ad::square(e22));
    Var shr = ad::square(s.g12);
    if (q.dim == 3) {
      tr = ad::add(tr, e33);
      nrm = ad::add(nrm, ad::square(e33));
      shr = ad::add(shr, ad::add(ad::square(s.g23), ad::square(s.g13)));
    }
    w = ad::add(ad::scale(ad::square(tr), 0.5 * lam),
                ad::add(ad::scale(nrm, mu), ad::scale(shr, 0.5 * mu)));
  }
  return ad::weighted_sum(ad::cmul(e_row, w), q.w);
}

Var elastic_cross_energy(const Quadrature& q, const Strains& a,
                         const Strains& b, Var e_row, double nu,
                         bool plane_stress, Var thermal_strain) {
  Var a11 = a.e11, a22 = a.e22, a33 = a.e33;
  if (thermal_strain.valid()) {
    a11 = ad::sub(a11, thermal_strain);
    a22 = ad::sub(a22, thermal_strain);
    if (q.dim == 3) a33 = ad::sub(a33, thermal_strain);
  }

  Var w;
  if (q.dim == 2 && plane_stress) {
    const double c11 = 1.0 / (1.0 - nu * nu);
    const double c12 = nu * c11;
    const double g = 1.0 / (2.0 * (1.0 + nu));
    w = ad::add(
        ad::scale(ad::add(ad::cmul(a11, b.e11), ad::cmul(a22, b.e22)), c11),
        ad::add(ad::scale(ad::add(ad::cmul(a11, b.e22), ad::cmul(a22, b.e11)),
                          c12),
                ad::scale(ad::cmul(a.g12, b.g12), g)));
  } else {
    const double lam = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = 1.0 / (2.0 * (1.0 + nu));
    Var tra = ad::add(a11, a22);
    Var trb = ad::add(b.e11, b.e22);
    Var nrm = ad::add(ad::cmul(a11, b.e11), ad::cmul(a22, b.e22));
    Var shr = ad::cmul(a.g12, b.g12);
    if (q.dim == 3) {
      tra = ad::add(tra, a33);
      trb = ad::add(trb, b.e33);
      nrm = ad::add(nrm, ad::cmul(a33, b.e33));
      shr = ad::add(shr, ad::add(ad::cmul(a.g23, b.g23), ad::cmul(a.g13, b.g13)));
    }
    w = ad::add(ad::scale(ad::cmul(tra, trb), lam),
                ad::add(ad::scale(nrm, 2.0 * mu), ad::scale(shr, mu)));
  }
  return ad::weighted_sum(ad::cmul(e_row, w), q.w);
}

Var stress_trace_row(const Quadrature& q, const Strains& s, Var e_row,
                     double nu, bool plane_stress) {
  Var tr = ad::add(s.e11, s.e22);
  double factor;
  if (q.dim == 2 && plane_stress) {
    factor = 1.0 / (1.0 - nu);
  } else {
    const double lam = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = 1.0 / (2.0 * (1.0 + nu));
    if (q.dim == 3) {
      tr = ad::add(tr, s.e33);
      factor = 3.0 * lam + 2.0 * mu;
    } else {
      factor = 2.0 * (lam + mu);
    }
  }
  return ad::cmul(e_row, ad::scale(tr, factor));
}

Var conduction_energy(const Quadrature& q, const std::array<Var, 3>& grad_t,
                      Var kappa_row) {
  Var g2 = ad::square(grad_t[0]);
  for (int a = 1; a < q.dim; ++a) g2 = ad::add(g2, ad::square(grad_t[a]));
  return ad::scale(ad::weighted_sum(ad::cmul(kappa_row, g2), q.w), 0.5);
}

Var conduction_cross_energy(const Quadrature& q,
                            const std::array<Var, 3>& grad_a,
                            const std::array<Var, 3>& grad_b, Var kappa_row) {
  Var dot = ad::cmul(grad_a[0], grad_b[0]);
  for (int a = 1; a < q.dim; ++a)
    dot = ad::add(dot, ad::cmul(grad_a[a], grad_b[a]));
  return ad::weighted_sum(ad::cmul(kappa_row, dot), q.w);
}

Var convection_energy(const Quadrature& q, Var t_center, double h_v,
                      double t_inf) {
  Var d = ad::add_const(t_center, -t_inf);
  return ad::scale(ad::weighted_sum(ad::square(d), q.w), 0.5 * h_v);
}

Var source_work(const Quadrature& q, Var s_row, Var t_center, double t_inf) {
  Var d = ad::add_const(t_center, -t_inf);
  return ad::weighted_sum(ad::cmul(s_row, d), q.w);
}

Var point_value(Var u1, Var u2, Var u3, int node, const Eigen::Vector3d& dir) {
  const std::vector<int> idx{node};
  Var out;
  Var comps[3] = {u1, u2, u3};
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) continue;
    require(comps[a].valid(), "physics.fields",
            "point direction uses a missing component");
    Var term = ad::scale(ad::pick_cols(comps[a], idx), dir[a]);
    out = out.valid() ? ad::add(out, term) : term;
  }
  require(out.valid(), "physics.fields", "zero point direction");
  return out;
}

Var spring_energy(Var projected, double k) {
  return ad::scale(ad::square(projected), 0.5 * k);
}

Var weighted_node_sum(Var t, const std::vector<int>& nodes,
                      const Eigen::VectorXd& weights) {
  require(int(nodes.size()) == weights.size(), "physics.shape",
          "node/weight count mismatch");
  return ad::weighted_sum(ad::pick_cols(t, nodes), weights.transpose());
}

MassCostVars mass_cost(const Quadrature& q, Var rho,
                       const materials::MaterialSet& mats) {
  MassCostVars mc;
  Eigen::MatrixXd rb = mats.property(&materials::Phase::rho_bar).transpose();
  Eigen::MatrixXd pb = mats.property(&materials::Phase::p_bar).transpose();
  mc.mass = ad::weighted_sum(ad::matmul_const_left(rb, rho), q.w_geo);
  mc.cost = ad::weighted_sum(ad::matmul_const_left(pb, rho), q.w_geo);
  return mc;
}

}  // namespace gptop::physics
