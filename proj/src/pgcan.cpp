#include "gptop/pgcan.hpp"

#include <cmath>

namespace gptop::nn {

Eigen::Vector3i encoder_vertices(const PgcanConfig& cfg) {
  const double lmax = cfg.lengths.head(cfg.dim).maxCoeff();
  Eigen::Vector3i v = Eigen::Vector3i::Ones();
  for (int a = 0; a < cfg.dim; ++a)
    v[a] = std::max(4, round_half_up(cfg.res * cfg.lengths[a] / lmax) + 1);
  return v;
}

namespace {

double xavier_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / double(fan_in + fan_out));
}

Eigen::MatrixXd uniform_matrix(int rows, int cols, double lim,
                               std::mt19937_64& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = uniform(rng, -lim, lim);
  return m;
}

}  // namespace

PgcanNet::PgcanNet(PgcanConfig cfg, std::mt19937_64& rng) : cfg_(cfg) {
  require(cfg_.dim == 2 || cfg_.dim == 3, "pgcan.dim", "dim must be 2 or 3");
  require(cfg_.n_f % 2 == 0 && cfg_.n_f >= 4, "pgcan.n_f",
          "feature width must be even (split into two halves)");
  require(cfg_.n_rep >= 1, "pgcan.n_rep", "need at least one repetition");
  verts_ = encoder_vertices(cfg_);
  if (cfg_.dim == 2) verts_.z() = 1;
  for (int a = 0; a < cfg_.dim; ++a) cell_[a] = 1.0 / double(verts_[a] - 1);

  const int w = decoder_width();
  const int taps = cfg_.dim == 2 ? 9 : 27;
  for (int r = 0; r < cfg_.n_rep; ++r) {
    params_.push_back(uniform_matrix(cfg_.n_f, n_sites(), 1e-2, rng));
    names_.push_back("features_" + std::to_string(r));
  }
  params_.push_back(uniform_matrix(
      cfg_.n_f, taps * cfg_.n_f, xavier_limit(taps * cfg_.n_f, taps * cfg_.n_f),
      rng));
  names_.push_back("conv_w");
  params_.push_back(Eigen::MatrixXd::Zero(cfg_.n_f, 1));
  names_.push_back("conv_b");
  for (int l = 0; l < 3; ++l) {
    params_.push_back(uniform_matrix(w, w, xavier_limit(w, w), rng));
    names_.push_back("w" + std::to_string(l));
    params_.push_back(Eigen::MatrixXd::Zero(w, 1));
    names_.push_back("b" + std::to_string(l));
    params_.push_back(uniform_matrix(w, w, xavier_limit(w, w), rng));
    names_.push_back("v" + std::to_string(l));
    params_.push_back(Eigen::MatrixXd::Zero(w, 1));
    names_.push_back("c" + std::to_string(l));
  }
  params_.push_back(
      uniform_matrix(cfg_.out_dim, w, xavier_limit(w, cfg_.out_dim), rng));
  names_.push_back("head_w");
  params_.push_back(Eigen::MatrixXd::Zero(cfg_.out_dim, 1));
  names_.push_back("head_b");

  build_shift_ops();
}

int PgcanNet::n_params() const {
  int n = 0;
  for (const auto& p : params_) n += int(p.size());
  return n;
}

void PgcanNet::build_shift_ops() {
  // One operator per tap: (X * S).col(dest) = X.col(src), zero past borders.
  const int dzlo = cfg_.dim == 3 ? -1 : 0;
  const int dzhi = cfg_.dim == 3 ? 1 : 0;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = dzlo; dz <= dzhi; ++dz) {
        std::vector<Eigen::Triplet<double>> trip;
        for (int ix = 0; ix < verts_.x(); ++ix)
          for (int iy = 0; iy < verts_.y(); ++iy)
            for (int iz = 0; iz < verts_.z(); ++iz) {
              const int sx = ix + dx, sy = iy + dy, sz = iz + dz;
              if (sx < 0 || sy < 0 || sz < 0 || sx >= verts_.x() ||
                  sy >= verts_.y() || sz >= verts_.z())
                continue;
              trip.emplace_back(site_index(sx, sy, sz),
                                site_index(ix, iy, iz), 1.0);
            }
        ad::SpMat s(n_sites(), n_sites());
        s.setFromTriplets(trip.begin(), trip.end());
        shifts_.push_back(std::move(s));
      }
}

EncoderOps PgcanNet::build_encoder_ops(const Eigen::MatrixXd& queries) const {
  require(queries.rows() == cfg_.dim, "pgcan.queries",
          "queries must be dim x n, normalized coordinates");
  EncoderOps ops;
  const int nq = int(queries.cols());
  for (int r = 0; r < cfg_.n_rep; ++r) {
    // Repetition r's grid is offset by (r / (n_rep + 1)) of a cell per axis.
    const double frac = double(r) / double(cfg_.n_rep + 1);
    std::vector<Eigen::Triplet<double>> trip;
    for (int q = 0; q < nq; ++q) {
      int cell_idx[3] = {0, 0, 0};
      double wgt[3][2] = {{1, 0}, {1, 0}, {1, 0}};
      for (int a = 0; a < cfg_.dim; ++a) {
        const double off = frac * cell_[a];
        const double s = (queries(a, q) + off) / cell_[a];
        int j = int(std::floor(s));
        j = std::min(std::max(j, 0), verts_[a] - 2);
        double t = std::min(std::max(s - j, 0.0), 1.0);
        const double xc = cosine_cell_map(t);
        cell_idx[a] = j;
        wgt[a][0] = 1.0 - xc;
        wgt[a][1] = xc;
      }
      const int czhi = cfg_.dim == 3 ? 1 : 0;
      for (int cx = 0; cx <= 1; ++cx)
        for (int cy = 0; cy <= 1; ++cy)
          for (int cz = 0; cz <= czhi; ++cz) {
            const double w = wgt[0][cx] * wgt[1][cy] *
                             (cfg_.dim == 3 ? wgt[2][cz] : 1.0);
            if (w == 0.0) continue;
            trip.emplace_back(site_index(cell_idx[0] + cx, cell_idx[1] + cy,
                                         cell_idx[2] + cz),
                              q, w);
          }
    }
    ad::SpMat s(n_sites(), nq);
    s.setFromTriplets(trip.begin(), trip.end());
    ops.interp.push_back(std::move(s));
  }
  return ops;
}

EmittedNet PgcanNet::forward(ad::Tape& tape, const EncoderOps& ops) const {
  EmittedNet em;
  std::vector<ad::Var> leaves;
  for (const auto& p : params_) {
    ad::Var v = tape.param(p);
    leaves.push_back(v);
    em.param_ids.push_back(v.id);
  }

  const int taps = int(shifts_.size());
  ad::Var feat;  // n_f x n_q, summed over repetitions
  for (int r = 0; r < cfg_.n_rep; ++r) {
    ad::Var pre;
    for (int k = 0; k < taps; ++k) {
      ad::Var shifted = ad::mul_sparse_right(leaves[idx_features(r)],
                                             shifts_[k]);
      ad::Var wk = ad::cols(leaves[idx_conv_w()], k * cfg_.n_f, cfg_.n_f);
      ad::Var term = ad::matmul(wk, shifted);
      pre = pre.valid() ? ad::add(pre, term) : term;
    }
    pre = ad::add_col_broadcast(pre, leaves[idx_conv_b()]);
    ad::Var fc = ad::tanh_(pre);
    ad::Var interp = ad::mul_sparse_right(fc, ops.interp[r]);
    feat = feat.valid() ? ad::add(feat, interp) : interp;
  }

  const int w = decoder_width();
  ad::Var f1 = ad::rows(feat, 0, w);
  ad::Var f2 = ad::rows(feat, w, w);
  ad::Var h = f1;
  for (int l = 0; l < 3; ++l) {
    ad::Var a = ad::tanh_(ad::add_col_broadcast(
        ad::matmul(leaves[idx_layer(l, 0)], h), leaves[idx_layer(l, 1)]));
    ad::Var z = ad::sigmoid_(ad::add_col_broadcast(
        ad::matmul(leaves[idx_layer(l, 2)], h), leaves[idx_layer(l, 3)]));
    ad::Var one_minus_z = ad::sub_from_const(
        Eigen::MatrixXd::Ones(z.val().rows(), z.val().cols()), z);
    h = ad::add(ad::cmul(one_minus_z, a), ad::cmul(z, f2));
  }
  ad::Var out = ad::add_col_broadcast(ad::matmul(leaves[idx_head_w()], h),
                                      leaves[idx_head_b()]);
  switch (cfg_.transform) {
    case OutTransform::Identity:
      break;
    case OutTransform::Softmax:
      out = ad::softmax_cols(out);
      break;
    case OutTransform::Scaled:
      out = ad::add_const(ad::scale(out, cfg_.out_scale), cfg_.out_offset);
      break;
  }
  em.out = out;
  return em;
}

Eigen::MatrixXd PgcanNet::evaluate(const Eigen::MatrixXd& queries) const {
  ad::Tape tape;
  EncoderOps ops = build_encoder_ops(queries);
  return forward(tape, ops).out.val();
}

void PgcanNet::shift_output_bias(double target_scaled_mean,
                                 const Eigen::MatrixXd& queries) {
  // Undo the Scaled transform: bias lives upstream of scale/offset.
  ad::Tape tape;
  EncoderOps ops = build_encoder_ops(queries);
  // Temporarily evaluate the raw head output by reading pre-transform value:
  // cheapest correct route is to evaluate and invert the affine transform.
  Eigen::MatrixXd out = forward(tape, ops).out.val();
  double mean_raw = out.mean();
  if (cfg_.transform == OutTransform::Scaled)
    mean_raw = (mean_raw - cfg_.out_offset) / cfg_.out_scale;
  params_[idx_head_b()].array() += target_scaled_mean - mean_raw;
}

}  // namespace gptop::nn
