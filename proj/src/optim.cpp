#include "gptop/optim.hpp"

#include <cmath>

namespace gptop::nn {

double scheduled_lr(const AdamConfig& cfg, int epoch, int n_tol) {
  double lr = cfg.lr;
  for (int i = 1; i <= cfg.decay_stages; ++i)
    if (double(epoch) >= 0.2 * double(i) * double(n_tol))
      lr *= cfg.decay_factor;
  return lr;
}

void adam_step(std::vector<Eigen::MatrixXd>& params,
               const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  require(params.size() == grads.size(), "adam.shapes",
          "one gradient per parameter tensor required");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
      state.v.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i].array().matrix() +
                 (1.0 - cfg.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -=
        lr * (state.m[i].array() / bc1) /
        ((state.v[i].array() / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace gptop::nn
