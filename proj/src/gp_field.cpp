#include "gptop/gp_field.hpp"

namespace gptop::gp {

Eigen::MatrixXd kernel_matrix(const Kernel& k, const Eigen::MatrixXd& x) {
  const int n = int(x.cols());
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double c = k(x.col(i), x.col(j));
      m(i, j) = c;
      m(j, i) = c;
    }
  return m;
}

Eigen::MatrixXd cross_covariance(const Kernel& k, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& queries) {
  Eigen::MatrixXd m(x.cols(), queries.cols());
  for (int j = 0; j < queries.cols(); ++j)
    for (int i = 0; i < x.cols(); ++i) m(i, j) = k(x.col(i), queries.col(j));
  return m;
}

std::vector<int> thin_indices(int n, int cap) {
  std::vector<int> idx;
  if (n <= cap) {
    idx.resize(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(cap);
  int prev = -1;
  for (int i = 0; i < cap; ++i) {
    const int j = round_half_up(double(i) * double(n - 1) / double(cap - 1));
    if (j != prev) idx.push_back(j);
    prev = j;
  }
  return idx;
}

Conditioner::Conditioner(Kernel k, Eigen::MatrixXd x_cond,
                         Eigen::RowVectorXd values)
    : kernel_(k), x_(std::move(x_cond)), y_(std::move(values)) {
  require(x_.cols() == y_.cols(), "gp.conditioner",
          "one prescribed value per conditioning point required");
  require(x_.cols() > 0, "gp.conditioner", "empty conditioning set");
  // Coincident points make K exactly singular (the nugget keys on location,
  // not index), so reject them up front instead of failing in the solver.
  for (int i = 0; i < x_.cols(); ++i)
    for (int j = i + 1; j < x_.cols(); ++j)
      require(!(x_.col(i).array() == x_.col(j).array()).all(), "gp.duplicate",
              "duplicated conditioning points; deduplicate the prescription");
  llt_.compute(kernel_matrix(kernel_, x_));
  require(llt_.info() == Eigen::Success, "gp.factorization",
          "kernel matrix factorization failed; check for duplicated "
          "conditioning points or a vanishing nugget");
}

Eigen::MatrixXd Conditioner::solve_weights(const Eigen::MatrixXd& queries) const {
  return llt_.solve(cross_covariance(kernel_, x_, queries));
}

void Conditioner::cache_weights(int slot, const Eigen::MatrixXd& queries) {
  if (slot >= int(cache_.size())) cache_.resize(slot + 1);
  cache_[slot] = solve_weights(queries);
}

const Eigen::MatrixXd& Conditioner::cached_weights(int slot) const {
  require(has_cache(slot), "gp.cache", "weights were not precomputed");
  return cache_[slot];
}

ad::Var condition(ad::Var mean_at_queries, ad::Var mean_at_cond,
                  const Eigen::RowVectorXd& values, const Eigen::MatrixXd& w) {
  ad::Var r = ad::sub_from_const(values, mean_at_cond);
  return ad::add(mean_at_queries, ad::matmul_const_right(r, w));
}

}  // namespace gptop::gp
