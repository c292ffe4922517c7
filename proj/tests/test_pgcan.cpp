#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gptop/optim.hpp"
#include "gptop/pgcan.hpp"

using namespace gptop;
using namespace gptop::nn;

namespace {

Eigen::MatrixXd random_queries(int dim, int n, std::mt19937_64& rng) {
  Eigen::MatrixXd q(dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dim; ++i) q(i, j) = unit_uniform(rng);
  return q;
}

PgcanConfig toy_config(int out_dim = 1, OutTransform tr = OutTransform::Identity) {
  PgcanConfig cfg;
  cfg.n_f = 8;
  cfg.res = 4;
  cfg.out_dim = out_dim;
  cfg.transform = tr;
  cfg.lengths = {1, 1, 1};
  return cfg;
}

}  // namespace

TEST_CASE("cosine cell map fixes endpoints and midpoint") {
  CHECK(cosine_cell_map(0.0) == 0.0);
  CHECK(cosine_cell_map(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_cell_map(0.5) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("vertex counts follow the resolution rule per axis") {
  PgcanConfig cfg;
  cfg.res = 36;
  cfg.lengths = {200, 100, 1};
  Eigen::Vector3i v = encoder_vertices(cfg);
  CHECK(v.x() == 37);
  CHECK(v.y() == 19);

  cfg.lengths = {100, 0.1, 1};  // degenerate axis floors at 4 vertices
  CHECK(encoder_vertices(cfg).y() == 4);
}

TEST_CASE("interpolation weights form a partition of unity") {
  std::mt19937_64 rng(7);
  PgcanNet net(toy_config(), rng);
  Eigen::MatrixXd q = random_queries(2, 200, rng);
  auto ops = net.build_encoder_ops(q);
  REQUIRE(int(ops.interp.size()) == net.config().n_rep);
  for (const auto& s : ops.interp) {
    Eigen::RowVectorXd colsum =
        Eigen::RowVectorXd::Ones(s.rows()) * Eigen::MatrixXd(s);
    for (int j = 0; j < colsum.size(); ++j)
      CHECK(colsum[j] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("constant feature maps interpolate to a constant") {
  std::mt19937_64 rng(9);
  PgcanNet net(toy_config(), rng);
  // Freeze the encoder to a constant: conv weights zero, bias b.
  auto& p = net.params();
  for (int r = 0; r < net.config().n_rep; ++r) p[r].setConstant(0.4);
  p[net.config().n_rep].setZero();                 // conv_w
  p[net.config().n_rep + 1].setConstant(0.3);      // conv_b
  Eigen::MatrixXd q = random_queries(2, 64, rng);
  ad::Tape tape;
  auto em = net.forward(tape, net.build_encoder_ops(q));
  // All queries see the same features, so outputs are identical columns.
  Eigen::MatrixXd out = em.out.val();
  for (int j = 1; j < out.cols(); ++j)
    CHECK((out.col(j) - out.col(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zeroed decoder passes the head bias through") {
  std::mt19937_64 rng(11);
  PgcanNet net(toy_config(2), rng);
  for (auto& p : net.params()) p.setZero();
  net.params().back() << 1.25, -0.5;  // head_b
  Eigen::MatrixXd out = net.evaluate(random_queries(2, 5, rng));
  for (int j = 0; j < 5; ++j) {
    CHECK(out(0, j) == doctest::Approx(1.25));
    CHECK(out(1, j) == doctest::Approx(-0.5));
  }
}

TEST_CASE("softmax head outputs a pointwise partition of unity") {
  std::mt19937_64 rng(13);
  PgcanNet net(toy_config(4, OutTransform::Softmax), rng);
  Eigen::MatrixXd out = net.evaluate(random_queries(2, 10000, rng));
  for (int j = 0; j < out.cols(); ++j) {
    CHECK(std::abs(out.col(j).sum() - 1.0) < 1e-12);
    CHECK(out.col(j).minCoeff() > 0.0);
  }
}

TEST_CASE("feature perturbations stay local up to the conv halo") {
  std::mt19937_64 rng(15);
  PgcanConfig cfg = toy_config();
  cfg.res = 8;  // 9x9 vertices
  PgcanNet net(cfg, rng);
  Eigen::MatrixXd q(2, 1);
  q << 0.08, 0.08;  // inside the first cell for every repetition offset
  const double before = net.evaluate(q)(0, 0);
  // Perturb a feature vertex at least 3 cells away on every repetition grid:
  // 1 cell of interpolation support + 1 cell of conv halo stays untouched.
  auto& features = net.params()[0];
  const int n_y = net.vertices().y();
  const int far_site = 6 * n_y + 6;
  features(0, far_site) += 10.0;
  net.params()[1](0, far_site) += 10.0;
  net.params()[2](0, far_site) += 10.0;
  CHECK(net.evaluate(q)(0, 0) == before);
}

TEST_CASE("network gradients match finite differences") {
  std::mt19937_64 rng(17);
  PgcanNet net(toy_config(), rng);
  Eigen::MatrixXd q = random_queries(2, 12, rng);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Random(1, 12);
  auto ops = net.build_encoder_ops(q);

  ad::Tape tape;
  auto em = net.forward(tape, ops);
  ad::Var loss = ad::weighted_sum(em.out, w);
  tape.backward(loss);

  auto value = [&]() {
    ad::Tape t;
    return net.forward(t, ops).out.val().cwiseProduct(w).sum();
  };

  std::mt19937_64 pick(19);
  int checked = 0;
  while (checked < 25) {
    const int pi = uniform_index(pick, int(net.params().size()));
    auto& mat = net.params()[pi];
    if (mat.size() == 0) continue;
    const int idx = uniform_index(pick, int(mat.size()));
    const double keep = mat.data()[idx];
    const double h = 1e-5;
    mat.data()[idx] = keep + h;
    const double fp = value();
    mat.data()[idx] = keep - h;
    const double fm = value();
    mat.data()[idx] = keep;
    const double fd = (fp - fm) / (2 * h);
    const double an = tape.grad_of(em.param_ids[pi]).data()[idx];
    CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd)));
    ++checked;
  }
}

TEST_CASE("construction and evaluation are seed deterministic") {
  std::mt19937_64 a(21), b(21);
  PgcanNet na(toy_config(), a), nb(toy_config(), b);
  for (size_t i = 0; i < na.params().size(); ++i)
    CHECK(na.params()[i] == nb.params()[i]);
  std::mt19937_64 qa(1);
  Eigen::MatrixXd q = random_queries(2, 7, qa);
  CHECK(na.evaluate(q) == nb.evaluate(q));
}

TEST_CASE("output bias shift hits a prescribed mean") {
  std::mt19937_64 rng(23);
  PgcanConfig cfg = toy_config();
  cfg.transform = OutTransform::Scaled;
  cfg.out_scale = 380.0;
  cfg.out_offset = 293.0;
  PgcanNet net(cfg, rng);
  Eigen::MatrixXd q = random_queries(2, 200, rng);
  net.shift_output_bias(1.0, q);  // scaled target for 673 K
  CHECK(net.evaluate(q).mean() == doctest::Approx(673.0).epsilon(1e-10));

  PgcanConfig hcfg = toy_config();
  PgcanNet hnet(hcfg, rng);
  hnet.shift_output_bias(0.0, q);
  CHECK(std::abs(hnet.evaluate(q).mean()) < 1e-12);
}

TEST_CASE("adam: zero gradients leave parameters unchanged, steps count") {
  std::vector<Eigen::MatrixXd> params = {Eigen::MatrixXd::Constant(2, 2, 1.0)};
  std::vector<Eigen::MatrixXd> grads = {Eigen::MatrixXd::Zero(2, 2)};
  AdamState st;
  AdamConfig cfg;
  adam_step(params, grads, st, 1e-3, cfg);
  CHECK(st.step == 1);
  CHECK(params[0] == Eigen::MatrixXd::Constant(2, 2, 1.0));
}

TEST_CASE("adam: constant gradient moves by about lr, sign-following") {
  std::vector<Eigen::MatrixXd> params = {Eigen::MatrixXd::Zero(1, 2)};
  std::vector<Eigen::MatrixXd> grads = {Eigen::MatrixXd::Zero(1, 2)};
  grads[0] << 4.0, -0.25;
  AdamState st;
  AdamConfig cfg;
  adam_step(params, grads, st, 1e-3, cfg);
  CHECK(params[0](0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(params[0](0, 1) == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("learning-rate schedule: stage boundaries and endpoint") {
  AdamConfig cfg;
  CHECK(scheduled_lr(cfg, 0, 10000) == 1e-3);
  CHECK(scheduled_lr(cfg, 1999, 10000) == 1e-3);
  CHECK(scheduled_lr(cfg, 2000, 10000) == doctest::Approx(7.5e-4));
  CHECK(scheduled_lr(cfg, 2500, 10000) == doctest::Approx(7.5e-4));
  CHECK(scheduled_lr(cfg, 9999, 10000) == 1e-3 * 0.75 * 0.75 * 0.75 * 0.75);
  CHECK(scheduled_lr(cfg, 9999, 10000) == doctest::Approx(3.1640625e-4));
}
