#pragma once

#include <Eigen/Cholesky>
#include <vector>

#include "gptop/common.hpp"
#include "gptop/tape.hpp"

namespace gptop::gp {

// Gaussian kernel with a nugget that fires only on exactly coincident
// inputs; coordinates are expected pre-normalized to [0,1] per axis.
struct Kernel {
  double s2 = 1.0;
  double phi = 0.5;
  double delta = 1e-5;

  template <typename A, typename B>
  double operator()(const A& a, const B& b) const {
    const double d2 = (a - b).squaredNorm();
    double c = s2 * std::exp(-phi * d2);
    if ((a.array() == b.array()).all()) c += delta;
    return c;
  }
};

Eigen::MatrixXd kernel_matrix(const Kernel& k, const Eigen::MatrixXd& x);
Eigen::MatrixXd cross_covariance(const Kernel& k, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& queries);

// Uniform thinning of n indices down to cap, deterministic, endpoints kept.
std::vector<int> thin_indices(int n, int cap);

// Posterior-mean conditioner for one scalar field: factorizes K(X,X) once,
// caches W = K^{-1} c(X,Q) per query set, leaves residuals to the tape.
class Conditioner {
public:
  Conditioner(Kernel k, Eigen::MatrixXd x_cond, Eigen::RowVectorXd values);

  int n_cond() const { return int(x_.cols()); }
  const Eigen::MatrixXd& x_cond() const { return x_; }
  const Eigen::RowVectorXd& values() const { return y_; }

  // Direct solve, no cache. Reference path for cache-consistency tests.
  Eigen::MatrixXd solve_weights(const Eigen::MatrixXd& queries) const;

  void cache_weights(int slot, const Eigen::MatrixXd& queries);
  bool has_cache(int slot) const {
    return slot < int(cache_.size()) && cache_[slot].size() > 0;
  }
  const Eigen::MatrixXd& cached_weights(int slot) const;

private:
  Kernel kernel_;
  Eigen::MatrixXd x_;
  Eigen::RowVectorXd y_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::vector<Eigen::MatrixXd> cache_;
};

// field(Q) = m(Q) + (y - m(X)) * W. Differentiable through both mean terms.
ad::Var condition(ad::Var mean_at_queries, ad::Var mean_at_cond,
                  const Eigen::RowVectorXd& values, const Eigen::MatrixXd& w);

}  // namespace gptop::gp
