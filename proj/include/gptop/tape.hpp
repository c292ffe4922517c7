#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "gptop/common.hpp"

namespace gptop::ad {

using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

class Tape;

// Handle into a tape; cheap to copy, valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Mat& val() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Eager reverse-mode tape over dense matrices. Ops append nodes; backward()
// walks them once in reverse. One tape per training step.
class Tape {
public:
  Var constant(Mat value) { return make(std::move(value), false); }
  Var param(Mat value) { return make(std::move(value), true); }

  const Mat& val(int id) const { return nodes_[id].value; }
  bool needs(int id) const { return nodes_[id].needs; }

  // Gradient of the last backward() root w.r.t. node `id`; zero matrix if the
  // node never received adjoint flow.
  Mat grad_of(int id) const;

  void backward(const Var& root);

  int size() const { return int(nodes_.size()); }

  // Internal: used by op implementations.
  Var make(Mat value, bool needs,
           std::function<void(Tape&)> back = nullptr);
  void accum(int id, const Mat& g);
  Mat& grad_ref(int id);
  bool has_grad(int id) const { return nodes_[id].has_grad; }

private:
  struct Node {
    Mat value;
    Mat grad;
    bool has_grad = false;
    bool needs = false;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
};

// --- elementwise and affine ops ---
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var sub_from_const(const Mat& c, Var a);  // c - a
Var neg(Var a);
Var scale(Var a, double s);
Var add_const(Var a, double s);
Var cmul(Var a, Var b);                 // elementwise a .* b
Var cmul_const(Var a, const Mat& c);    // elementwise a .* c
Var tanh_(Var a);
Var sigmoid_(Var a);
Var square(Var a);
Var pow_const(Var a, double p);         // elementwise, expects a >= 0 or p >= 1
Var clamp01(Var a);                     // elementwise clamp to [0,1]; zero gradient outside
Var softmax_cols(Var a);

// --- products and reductions ---
Var matmul(Var a, Var b);
Var matmul_const_right(Var a, const Mat& b);
Var matmul_const_left(const Mat& a, Var b);
Var mul_sparse_right(Var a, const SpMat& s);          // a * s
Var add_col_broadcast(Var a, Var col);                // a + col * ones^T
Var colsum_weighted(Var a, const Mat& w);             // row_j = sum_i w_ij a_ij
Var weighted_sum(Var a, const Mat& w);                // 1x1 = sum(w .* a)
Var sum_all(Var a);                                   // 1x1

// --- views ---
Var vstack(const std::vector<Var>& parts);  // same width, rows concatenated
Var rows(Var a, int r0, int n);
Var cols(Var a, int c0, int n);
Var pick_cols(Var a, const std::vector<int>& idx);
Var detach(Var a);

}  // namespace gptop::ad
