#include "gptop/tape.hpp"

namespace gptop::ad {

const Mat& Var::val() const { return tape->val(id); }

Var Tape::make(Mat value, bool needs, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs = needs;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, int(nodes_.size()) - 1};
}

Mat& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accum(int id, const Mat& g) {
  if (!nodes_[id].needs) return;
  grad_ref(id) += g;
}

Mat Tape::grad_of(int id) const {
  const Node& n = nodes_[id];
  if (n.has_grad) return n.grad;
  return Mat::Zero(n.value.rows(), n.value.cols());
}

void Tape::backward(const Var& root) {
  require(root.tape == this, "tape.backward", "root from another tape");
  require(nodes_[root.id].value.size() == 1, "tape.backward",
          "backward root must be scalar (1x1)");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  grad_ref(root.id)(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.needs && n.has_grad) n.back(*this);
  }
}

namespace {

Tape& tp(const Var& a) {
  require(a.valid(), "tape.op", "invalid operand");
  return *a.tape;
}

void check_pair(const Var& a, const Var& b) {
  require(a.tape == b.tape, "tape.op", "operands from different tapes");
}

}  // namespace

Var add(Var a, Var b) {
  check_pair(a, b);
  Tape& t = tp(a);
  const int ia = a.id, ib = b.id, out = t.size();
  return t.make(a.val() + b.val(), t.needs(ia) || t.needs(ib),
                [=](Tape& g) {
                  g.accum(ia, g.grad_ref(out));
                  g.accum(ib, g.grad_ref(out));
                });
}

Var sub(Var a, Var b) {
  check_pair(a, b);
  Tape& t = tp(a);
  const int ia = a.id, ib = b.id, out = t.size();
  return t.make(a.val() - b.val(), t.needs(ia) || t.needs(ib),
                [=](Tape& g) {
                  g.accum(ia, g.grad_ref(out));
                  g.accum(ib, -g.grad_ref(out));
                });
}

Var sub_from_const(const Mat& c, Var a) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(c - a.val(), t.needs(ia),
                [=](Tape& g) { g.accum(ia, -g.grad_ref(out)); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(s * a.val(), t.needs(ia),
                [=](Tape& g) { g.accum(ia, s * g.grad_ref(out)); });
}

Var add_const(Var a, double s) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().array() + s, t.needs(ia),
                [=](Tape& g) { g.accum(ia, g.grad_ref(out)); });
}

Var cmul(Var a, Var b) {
  check_pair(a, b);
  Tape& t = tp(a);
  const int ia = a.id, ib = b.id, out = t.size();
  return t.make(a.val().cwiseProduct(b.val()), t.needs(ia) || t.needs(ib),
                [=](Tape& g) {
                  g.accum(ia, g.grad_ref(out).cwiseProduct(g.val(ib)));
                  g.accum(ib, g.grad_ref(out).cwiseProduct(g.val(ia)));
                });
}

Var cmul_const(Var a, const Mat& c) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().cwiseProduct(c), t.needs(ia), [=](Tape& g) {
    g.accum(ia, g.grad_ref(out).cwiseProduct(c));
  });
}

Var tanh_(Var a) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().array().tanh(), t.needs(ia), [=](Tape& g) {
    const Mat& y = g.val(out);
    g.accum(ia, g.grad_ref(out).cwiseProduct(
                    (1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid_(Var a) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  Mat y = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
  return t.make(std::move(y), t.needs(ia), [=](Tape& g) {
    const Mat& yv = g.val(out);
    g.accum(ia, g.grad_ref(out).cwiseProduct(
                    (yv.array() * (1.0 - yv.array())).matrix()));
  });
}

Var square(Var a) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().array().square(), t.needs(ia), [=](Tape& g) {
    g.accum(ia, 2.0 * g.grad_ref(out).cwiseProduct(g.val(ia)));
  });
}

Var pow_const(Var a, double p) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().array().pow(p), t.needs(ia), [=](Tape& g) {
    g.accum(ia, p * g.grad_ref(out).cwiseProduct(
                        g.val(ia).array().pow(p - 1.0).matrix()));
  });
}

Var clamp01(Var a) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().cwiseMax(0.0).cwiseMin(1.0), t.needs(ia), [=](Tape& g) {
    const Mat& x = g.val(ia);
    Eigen::ArrayXXd mask =
        ((x.array() > 0.0) && (x.array() < 1.0)).cast<double>();
    g.accum(ia, (g.grad_ref(out).array() * mask).matrix());
  });
}

Var softmax_cols(Var a) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  Mat y = a.val();
  for (int j = 0; j < y.cols(); ++j) {
    Eigen::ArrayXd c = y.col(j).array();
    c -= c.maxCoeff();
    c = c.exp();
    y.col(j) = (c / c.sum()).matrix();
  }
  return t.make(std::move(y), t.needs(ia), [=](Tape& g) {
    const Mat& yv = g.val(out);
    const Mat& gy = g.grad_ref(out);
    Mat gx(yv.rows(), yv.cols());
    for (int j = 0; j < yv.cols(); ++j) {
      const double dot = yv.col(j).dot(gy.col(j));
      gx.col(j) = yv.col(j).cwiseProduct(gy.col(j)) - dot * yv.col(j);
    }
    g.accum(ia, gx);
  });
}

Var matmul(Var a, Var b) {
  check_pair(a, b);
  Tape& t = tp(a);
  const int ia = a.id, ib = b.id, out = t.size();
  return t.make(a.val() * b.val(), t.needs(ia) || t.needs(ib),
                [=](Tape& g) {
                  const Mat& gy = g.grad_ref(out);
                  g.accum(ia, gy * g.val(ib).transpose());
                  g.accum(ib, g.val(ia).transpose() * gy);
                });
}

Var matmul_const_right(Var a, const Mat& b) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val() * b, t.needs(ia), [=](Tape& g) {
    g.accum(ia, g.grad_ref(out) * b.transpose());
  });
}

Var matmul_const_left(const Mat& a, Var b) {
  Tape& t = tp(b);
  const int ib = b.id, out = t.size();
  return t.make(a * b.val(), t.needs(ib), [=](Tape& g) {
    g.accum(ib, a.transpose() * g.grad_ref(out));
  });
}

Var mul_sparse_right(Var a, const SpMat& s) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  const SpMat* sp = &s;  // caller keeps the operator alive for the step
  return t.make(a.val() * s, t.needs(ia), [=](Tape& g) {
    g.accum(ia, g.grad_ref(out) * sp->transpose());
  });
}

Var add_col_broadcast(Var a, Var col) {
  check_pair(a, col);
  Tape& t = tp(a);
  require(col.val().cols() == 1 && col.val().rows() == a.val().rows(),
          "tape.op", "broadcast column shape mismatch");
  const int ia = a.id, ic = col.id, out = t.size();
  return t.make(a.val().colwise() + Eigen::VectorXd(col.val().col(0)),
                t.needs(ia) || t.needs(ic), [=](Tape& g) {
                  const Mat& gy = g.grad_ref(out);
                  g.accum(ia, gy);
                  g.accum(ic, gy.rowwise().sum());
                });
}

Var colsum_weighted(Var a, const Mat& w) {
  Tape& t = tp(a);
  require(w.rows() == a.val().rows() && w.cols() == a.val().cols(), "tape.op",
          "weight shape mismatch");
  const int ia = a.id, out = t.size();
  Mat y = a.val().cwiseProduct(w).colwise().sum();
  return t.make(std::move(y), t.needs(ia), [=](Tape& g) {
    const Mat& gy = g.grad_ref(out);  // 1 x n
    Mat gx = w;
    gx.array().rowwise() *= gy.row(0).array();
    g.accum(ia, gx);
  });
}

Var weighted_sum(Var a, const Mat& w) {
  Tape& t = tp(a);
  require(w.rows() == a.val().rows() && w.cols() == a.val().cols(), "tape.op",
          "weight shape mismatch");
  const int ia = a.id, out = t.size();
  Mat y(1, 1);
  y(0, 0) = a.val().cwiseProduct(w).sum();
  return t.make(std::move(y), t.needs(ia), [=](Tape& g) {
    g.accum(ia, g.grad_ref(out)(0, 0) * w);
  });
}

Var sum_all(Var a) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  Mat y(1, 1);
  y(0, 0) = a.val().sum();
  return t.make(std::move(y), t.needs(ia), [=](Tape& g) {
    g.accum(ia, Mat::Constant(g.val(ia).rows(), g.val(ia).cols(),
                              g.grad_ref(out)(0, 0)));
  });
}

Var vstack(const std::vector<Var>& parts) {
  require(!parts.empty(), "tape.op", "vstack needs at least one part");
  Tape& t = tp(parts[0]);
  const int width = int(parts[0].val().cols());
  int total = 0;
  bool needs = false;
  for (const auto& p : parts) {
    require(p.tape == &t, "tape.op", "vstack parts from different tapes");
    require(int(p.val().cols()) == width, "tape.op", "vstack width mismatch");
    total += int(p.val().rows());
    needs = needs || t.needs(p.id);
  }
  Mat y(total, width);
  std::vector<int> ids(parts.size()), offs(parts.size()), sizes(parts.size());
  int off = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    ids[i] = parts[i].id;
    offs[i] = off;
    sizes[i] = int(parts[i].val().rows());
    y.middleRows(off, sizes[i]) = parts[i].val();
    off += sizes[i];
  }
  const int out = t.size();
  return t.make(std::move(y), needs, [=](Tape& g) {
    const Mat gy = g.grad_ref(out);
    for (size_t i = 0; i < ids.size(); ++i)
      g.accum(ids[i], gy.middleRows(offs[i], sizes[i]));
  });
}

Var rows(Var a, int r0, int n) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().middleRows(r0, n), t.needs(ia), [=](Tape& g) {
    if (!g.needs(ia)) return;
    g.grad_ref(ia).middleRows(r0, n) += g.grad_ref(out);
  });
}

Var cols(Var a, int c0, int n) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  return t.make(a.val().middleCols(c0, n), t.needs(ia), [=](Tape& g) {
    if (!g.needs(ia)) return;
    g.grad_ref(ia).middleCols(c0, n) += g.grad_ref(out);
  });
}

Var pick_cols(Var a, const std::vector<int>& idx) {
  Tape& t = tp(a);
  const int ia = a.id, out = t.size();
  Mat y(a.val().rows(), idx.size());
  for (int k = 0; k < int(idx.size()); ++k) y.col(k) = a.val().col(idx[k]);
  return t.make(std::move(y), t.needs(ia), [=, indices = idx](Tape& g) {
    if (!g.needs(ia)) return;
    const Mat& gy = g.grad_ref(out);
    Mat& gx = g.grad_ref(ia);
    for (int k = 0; k < int(indices.size()); ++k)
      gx.col(indices[k]) += gy.col(k);
  });
}

Var detach(Var a) { return tp(a).constant(a.val()); }

}  // namespace gptop::ad
