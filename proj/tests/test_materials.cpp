#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gptop/materials.hpp"

using namespace gptop;
using namespace gptop::materials;

TEST_CASE("phase catalog values") {
  MaterialSet set = artificial_set(3);
  REQUIRE(set.n_phases() == 4);
  CHECK(set.phases[0].e == 1e-5);
  CHECK(set.phases[0].kappa == 1e-5);
  CHECK(set.phases[0].rho_bar == 0.0);
  CHECK(set.phases[0].p_bar == 0.0);
  CHECK(set.phases[1].e == 0.4);
  CHECK(set.phases[1].kappa == 0.2);
  CHECK(set.phases[1].rho_bar == 0.5);
  CHECK(set.phases[1].p_bar == 1.6);
  CHECK(set.phases[2].e == 0.6);
  CHECK(set.phases[2].kappa == 0.5);
  CHECK(set.phases[2].rho_bar == 0.7);
  CHECK(set.phases[2].p_bar == 1.2);
  CHECK(set.phases[3].e == 1.0);
  CHECK(set.phases[3].kappa == 1.0);
  CHECK(set.phases[3].rho_bar == 1.0);
  CHECK(set.phases[3].p_bar == 1.0);
  CHECK(set.nu == 0.31);

  MaterialSet ni = metal_set("Ni");
  CHECK(ni.phases[1].alpha == 1.5e-5);
  CHECK(ni.phases[1].kappa == 9.07e-5);
  CHECK(ni.phases[1].s == -4.5e-8);
  CHECK_THROWS_AS(metal_set("Unobtainium"), Error);
}

TEST_CASE("penalized interpolation: one-hot exactness and mixing") {
  MaterialSet set = artificial_set(3);
  Eigen::VectorXd e = set.property(&Phase::e);
  Eigen::VectorXd kappa = set.property(&Phase::kappa);

  Eigen::MatrixXd one_hot = Eigen::MatrixXd::Zero(4, 2);
  one_hot(3, 0) = 1.0;  // pure M3
  one_hot(0, 1) = 1.0;  // pure void
  for (double p : {1.0, 2.0, 3.0}) {
    Eigen::VectorXd ei = interpolate(one_hot, e, p);
    CHECK(ei[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ei[1] == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(interpolate(one_hot, kappa, p)[0] == doctest::Approx(1.0));
  }

  Eigen::MatrixXd mixed(4, 1);
  mixed << 0.0, 0.5, 0.5, 0.0;
  CHECK(interpolate(mixed, e, 3.0)[0] == doctest::Approx(0.125));
}

TEST_CASE("interpolation is monotone in each density") {
  MaterialSet set = artificial_set(3);
  Eigen::VectorXd e = set.property(&Phase::e);
  std::mt19937_64 rng(3);
  for (double p : {1.0, 2.0, 3.0}) {
    for (int k = 0; k < 20; ++k) {
      Eigen::MatrixXd rho(4, 1);
      for (int i = 0; i < 4; ++i) rho(i, 0) = unit_uniform(rng);
      for (int i = 0; i < 4; ++i) {
        Eigen::MatrixXd up = rho;
        up(i, 0) = std::min(1.0, rho(i, 0) + 0.05);
        CHECK(interpolate(up, e, p)[0] >= interpolate(rho, e, p)[0]);
      }
    }
  }
}

TEST_CASE("constitutive matrices: closed forms and positive semidefiniteness") {
  Eigen::MatrixXd c = constitutive_matrix(1.0, 0.0, 2, true);
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(1, 1) == doctest::Approx(1.0));
  CHECK(c(0, 1) == doctest::Approx(0.0));
  CHECK(c(2, 2) == doctest::Approx(0.5));

  CHECK(constitutive_matrix(0.0, 0.31, 2, true).norm() == 0.0);

  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const double e = uniform(rng, 1e-5, 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig2(
        constitutive_matrix(e, 0.31, 2, true));
    CHECK(eig2.eigenvalues().minCoeff() >= 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig3(
        constitutive_matrix(e, 0.31, 3, false));
    CHECK(eig3.eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("mass and cost are linear, un-penalized integrals") {
  grid::Domain d;
  d.lengths = {200, 100, 1};
  grid::CollocationGrid g = grid::build_grid(d, {41, 21, 1});
  shapefn::ElementGeometry geom = shapefn::build_element_geometry(g);
  MaterialSet set = artificial_set(3);

  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(4, g.n_elems());
  full.row(3).setOnes();
  MassCost mc = mass_and_cost(full, set, geom);
  CHECK(mc.mass == doctest::Approx(20000.0).epsilon(1e-12));
  CHECK(mc.cost == doctest::Approx(20000.0).epsilon(1e-12));

  Eigen::MatrixXd uniform_rho(4, g.n_elems());
  uniform_rho.row(0).setConstant(0.7);
  uniform_rho.row(1).setConstant(0.1);
  uniform_rho.row(2).setConstant(0.1);
  uniform_rho.row(3).setConstant(0.1);
  mc = mass_and_cost(uniform_rho, set, geom);
  CHECK(mc.mass == doctest::Approx(4400.0).epsilon(1e-12));
}

TEST_CASE("constant-field integrals are grid independent") {
  grid::Domain d;
  d.lengths = {200, 100, 1};
  grid::GridFamily fam =
      grid::build_grid_family(d, {21, 11, 1}, {41, 21, 1}, 5);
  MaterialSet set = artificial_set(3);
  double first = -1;
  for (const auto& g : fam.grids) {
    shapefn::ElementGeometry geom = shapefn::build_element_geometry(g);
    Eigen::MatrixXd rho(4, g.n_elems());
    rho.row(0).setConstant(0.25);
    rho.row(1).setConstant(0.25);
    rho.row(2).setConstant(0.25);
    rho.row(3).setConstant(0.25);
    MassCost mc = mass_and_cost(rho, set, geom);
    if (first < 0)
      first = mc.mass;
    else
      CHECK(std::abs(mc.mass - first) < 1e-10 * first);
  }
}
