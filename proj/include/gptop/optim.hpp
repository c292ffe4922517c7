#pragma once

#include <vector>

#include "gptop/common.hpp"

namespace gptop::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 0.75;  // applied at each stage boundary
  int decay_stages = 4;        // boundaries at {1..4}/5-free: i/5? see lr
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;
};

// Stage boundaries at {0.2, 0.4, 0.6, 0.8} * n_tol; piecewise constant.
double scheduled_lr(const AdamConfig& cfg, int epoch, int n_tol);

// One Adam update with bias correction. Shapes of grads must match params.
void adam_step(std::vector<Eigen::MatrixXd>& params,
               const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               double lr, const AdamConfig& cfg);

}  // namespace gptop::nn
