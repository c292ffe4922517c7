#pragma once

#include <random>
#include <string>
#include <vector>

#include "gptop/common.hpp"
#include "gptop/tape.hpp"

namespace gptop::nn {

enum class OutTransform { Identity, Softmax, Scaled };

struct PgcanConfig {
  int dim = 2;
  int n_rep = 3;
  int n_f = 32;  // feature channels; decoder width is n_f / 2
  int res = 36;  // vertices per unit of the longest axis
  int out_dim = 1;
  OutTransform transform = OutTransform::Identity;
  double out_scale = 1.0;   // Scaled only
  double out_offset = 0.0;  // Scaled only
  Eigen::Vector3d lengths = Eigen::Vector3d::Ones();  // physical, sets aspect
};

// Feature-grid vertex counts: round(res * L_a / max L) + 1, floor 4.
Eigen::Vector3i encoder_vertices(const PgcanConfig& cfg);

// x in [0,1] within a cell; fixes endpoints and midpoint.
inline double cosine_cell_map(double t) {
  return 0.5 * (1.0 - std::cos(M_PI * t));
}

// Static per-(net, query set) interpolation operators, one per repetition:
// n_sites x n_q, 2^dim weights per column on cosine-warped local coords.
struct EncoderOps {
  std::vector<ad::SpMat> interp;
};

struct EmittedNet {
  ad::Var out;                 // out_dim x n_q, post-transform
  std::vector<int> param_ids;  // leaf ids, same order as PgcanNet::params
};

// Feature-grid network: trainable features per repetition, a shared 3^dim
// conv (zero padding, tanh), bilinear/trilinear feature interpolation at the
// queries summed over repetitions, then a gated three-hidden-layer decoder
//   a_l = tanh(W_l h_l + b_l), z_l = sigmoid(V_l h_l + c_l),
//   h_{l+1} = (1 - z_l) .* a_l + z_l .* f_t2,  h_0 = f_t1.
class PgcanNet {
public:
  PgcanNet(PgcanConfig cfg, std::mt19937_64& rng);

  const PgcanConfig& config() const { return cfg_; }
  const Eigen::Vector3i& vertices() const { return verts_; }
  int n_sites() const { return verts_.prod(); }
  int decoder_width() const { return cfg_.n_f / 2; }

  // Queries are normalized per-axis to [0,1]; columns are points.
  EncoderOps build_encoder_ops(const Eigen::MatrixXd& queries) const;

  EmittedNet forward(ad::Tape& tape, const EncoderOps& ops) const;

  // Plain forward without a tape (init helpers, design extraction).
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& queries) const;

  // Shifts the final bias so the mean raw output over `queries` equals the
  // scaled-unit target. Used to start temperature fields near prescribed data.
  void shift_output_bias(double target_scaled_mean,
                         const Eigen::MatrixXd& queries);

  std::vector<Eigen::MatrixXd>& params() { return params_; }
  const std::vector<Eigen::MatrixXd>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }
  int n_params() const;

private:
  void build_shift_ops();
  int site_index(int ix, int iy, int iz) const {
    return (ix * verts_.y() + iy) * verts_.z() + iz;
  }

  PgcanConfig cfg_;
  Eigen::Vector3i verts_ = Eigen::Vector3i::Ones();
  Eigen::Vector3d cell_ = Eigen::Vector3d::Ones();  // normalized units
  std::vector<ad::SpMat> shifts_;                   // 3^dim operators
  std::vector<Eigen::MatrixXd> params_;
  std::vector<std::string> names_;
  // params_ layout: [features x n_rep][conv_w][conv_b]
  //                 [W_l b_l V_l c_l] x 3 [head_w][head_b]
  int idx_features(int rep) const { return rep; }
  int idx_conv_w() const { return cfg_.n_rep; }
  int idx_conv_b() const { return cfg_.n_rep + 1; }
  int idx_layer(int l, int slot) const { return cfg_.n_rep + 2 + 4 * l + slot; }
  int idx_head_w() const { return cfg_.n_rep + 2 + 12; }
  int idx_head_b() const { return cfg_.n_rep + 2 + 13; }
};

}  // namespace gptop::nn
