#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gptop/gp_field.hpp"
#include "gptop/pgcan.hpp"

using namespace gptop;
using namespace gptop::gp;

namespace {

Eigen::MatrixXd random_points(int dim, int n, std::mt19937_64& rng) {
  Eigen::MatrixXd x(dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dim; ++i) x(i, j) = unit_uniform(rng);
  return x;
}

}  // namespace

TEST_CASE("kernel diagonal, symmetry, positive definiteness") {
  Kernel k;
  std::mt19937_64 rng(41);
  Eigen::MatrixXd x = random_points(2, 200, rng);
  CHECK(k(x.col(0), x.col(0)) == k.s2 + k.delta);
  Eigen::MatrixXd m = kernel_matrix(k, x);
  CHECK((m - m.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("conditioning reproduces prescriptions for random means") {
  std::mt19937_64 rng(43);
  Eigen::MatrixXd xc(2, 21);
  for (int i = 0; i <= 20; ++i) xc.col(i) = Eigen::Vector2d(0.0, i / 20.0);
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Constant(21, 673.0);
  Conditioner cond(Kernel{}, xc, y);

  for (int trial = 0; trial < 10; ++trial) {
    nn::PgcanConfig cfg;
    cfg.n_f = 8;
    cfg.res = 6;
    cfg.out_dim = 1;
    cfg.out_scale = 500.0;
    cfg.transform = nn::OutTransform::Scaled;
    nn::PgcanNet net(cfg, rng);

    Eigen::MatrixXd queries = random_points(2, 40, rng);
    Eigen::MatrixXd stacked(2, 40 + 21);
    stacked << queries, xc;

    ad::Tape tape;
    auto ops = net.build_encoder_ops(stacked);
    auto em = net.forward(tape, ops);
    ad::Var m_q = ad::cols(em.out, 0, 40);
    ad::Var m_c = ad::cols(em.out, 40, 21);
    Eigen::MatrixXd w = cond.solve_weights(stacked);
    ad::Var field = condition(m_q, m_c, y, w.leftCols(40));
    ad::Var at_cond = condition(m_c, m_c, y, w.rightCols(21));
    for (int i = 0; i < 21; ++i)
      CHECK(std::abs(at_cond.val()(0, i) - 673.0) < 1e-6);
    CHECK(field.val().cols() == 40);
  }
}

TEST_CASE("constant mean matching the prescription passes through") {
  Eigen::MatrixXd xc(2, 5);
  xc << 0, 0, 0, 0, 0, 0, 0.25, 0.5, 0.75, 1.0;
  const double c = 3.7;
  Conditioner cond(Kernel{}, xc, Eigen::RowVectorXd::Constant(5, c));
  Eigen::MatrixXd q(2, 3);
  q << 0.3, 0.6, 0.9, 0.1, 0.5, 0.9;
  Eigen::MatrixXd w = cond.solve_weights(q);

  ad::Tape tape;
  ad::Var m_q = tape.constant(Eigen::MatrixXd::Constant(1, 3, c));
  ad::Var m_c = tape.constant(Eigen::MatrixXd::Constant(1, 5, c));
  ad::Var field = condition(m_q, m_c, cond.values(), w);
  for (int j = 0; j < 3; ++j) CHECK(field.val()(0, j) == doctest::Approx(c));
}

TEST_CASE("cached weights agree with the direct solve") {
  std::mt19937_64 rng(47);
  Eigen::MatrixXd xc = random_points(2, 30, rng);
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(30);
  Conditioner cond(Kernel{}, xc, y);
  Eigen::MatrixXd q = random_points(2, 50, rng);
  cond.cache_weights(2, q);
  CHECK(cond.has_cache(2));
  CHECK(!cond.has_cache(1));
  CHECK((cond.cached_weights(2) - cond.solve_weights(q)).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("uniform thinning caps the conditioning set") {
  auto idx = thin_indices(1000, 600);
  CHECK(int(idx.size()) <= 600);
  CHECK(idx.front() == 0);
  CHECK(idx.back() == 999);
  for (size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
  auto all = thin_indices(200, 600);
  CHECK(int(all.size()) == 200);
}

TEST_CASE("gradients flow through both conditioning terms") {
  Eigen::MatrixXd xc(1, 2);
  xc << 0.0, 1.0;
  Eigen::RowVectorXd y(2);
  y << 1.0, -1.0;
  Conditioner cond(Kernel{}, xc, y);
  Eigen::MatrixXd q(1, 3);
  q << 0.25, 0.5, 0.75;
  Eigen::MatrixXd w = cond.solve_weights(q);

  auto eval = [&](const Eigen::MatrixXd& theta) {
    ad::Tape tape;
    ad::Var p = tape.param(theta);
    ad::Var m_q = ad::cols(p, 0, 3);
    ad::Var m_c = ad::cols(p, 3, 2);
    ad::Var field = condition(m_q, m_c, y, w);
    ad::Var loss = ad::sum_all(ad::square(field));
    return std::pair<double, ad::Tape>(loss.val()(0, 0), std::move(tape));
  };

  Eigen::MatrixXd theta(1, 5);
  theta << 0.3, -0.2, 0.7, 0.1, -0.5;
  ad::Tape tape;
  ad::Var p = tape.param(theta);
  ad::Var field = condition(ad::cols(p, 0, 3), ad::cols(p, 3, 2), y, w);
  ad::Var loss = ad::sum_all(ad::square(field));
  tape.backward(loss);
  Eigen::MatrixXd g = tape.grad_of(p.id);

  const double h = 1e-6;
  for (int j = 0; j < 5; ++j) {
    Eigen::MatrixXd tp = theta, tm = theta;
    tp(0, j) += h;
    tm(0, j) -= h;
    const double fd = (eval(tp).first - eval(tm).first) / (2 * h);
    CHECK(std::abs(fd - g(0, j)) < 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("duplicate conditioning points are rejected") {
  Eigen::MatrixXd xc(2, 4);
  xc << 0, 0, 0, 0, 0.0, 0.5, 0.5, 1.0;  // exact duplicate column
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(4);
  CHECK_THROWS_AS(Conditioner(Kernel{}, xc, y), Error);
}
