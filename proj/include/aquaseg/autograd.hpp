#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <numbers>
#include <vector>

#include "aquaseg/types.hpp"

namespace aquaseg::ad {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over dense matrices. Nodes are immutable once recorded; backward
/// walks them in reverse order and accumulates gradients into parameter sinks.
template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixX<Scalar>;
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr, {}); }

  /// Leaf whose gradient is added into *sink on backward. A null sink makes it a constant.
  Var parameter(const Matrix& value, Matrix* sink) { return push(value, sink != nullptr, sink, {}); }

  /// Records an op result. fn runs only if some input requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_[v.id].requires_grad;
    return push(std::move(value), needs, nullptr, needs ? std::move(fn) : BackwardFn{});
  }
  Var record(Matrix value, const std::vector<Var>& inputs, BackwardFn fn) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_[v.id].requires_grad;
    return push(std::move(value), needs, nullptr, needs ? std::move(fn) : BackwardFn{});
  }

  [[nodiscard]] const Matrix& value(Var v) const { return nodes_[v.id].value; }
  [[nodiscard]] bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Adds delta into v's gradient buffer (no-op for constants).
  void accumulate(Var v, const Matrix& delta) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
      n.grad = delta;
    else
      n.grad += delta;
  }

  /// Seeds d(loss)/d(root) and propagates to every parameter sink.
  void backward(Var root, const Matrix& seed) {
    accumulate(root, seed);
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.sink != nullptr) *n.sink += n.grad;
      if (n.backward) n.backward(*this, n.grad);
      n.grad.resize(0, 0);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    Matrix* sink;
    BackwardFn backward;
  };

  Var push(Matrix value, bool requires_grad, Matrix* sink, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, sink, std::move(fn)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::deque<Node> nodes_;
};

template <typename Scalar>
Var matmul(Tape<Scalar>& t, Var a, Var b) {
  return t.record(t.value(a) * t.value(b), {a, b}, [a, b](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

/// a * b^T
template <typename Scalar>
Var matmul_nt(Tape<Scalar>& t, Var a, Var b) {
  return t.record(t.value(a) * t.value(b).transpose(), {a, b}, [a, b](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b));
    if (tp.requires_grad(b)) tp.accumulate(b, g.transpose() * tp.value(a));
  });
}

template <typename Scalar>
Var add(Tape<Scalar>& t, Var a, Var b) {
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

/// a + row broadcast over rows of a.
template <typename Scalar>
Var add_row(Tape<Scalar>& t, Var a, Var row) {
  MatrixX<Scalar> v = t.value(a);
  v.rowwise() += t.value(row).row(0);
  return t.record(std::move(v), {a, row}, [a, row](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(row)) tp.accumulate(row, g.colwise().sum());
  });
}

template <typename Scalar>
Var scale(Tape<Scalar>& t, Var a, Scalar s) {
  return t.record(t.value(a) * s, {a}, [a, s](Tape<Scalar>& tp, const MatrixX<Scalar>& g) { tp.accumulate(a, g * s); });
}

template <typename Scalar>
Var relu(Tape<Scalar>& t, Var a) {
  return t.record(t.value(a).cwiseMax(Scalar(0)), {a}, [a](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    tp.accumulate(a, (tp.value(a).array() > Scalar(0)).select(g, Scalar(0)).matrix());
  });
}

/// Exact (erf) GELU.
template <typename Scalar>
Var gelu(Tape<Scalar>& t, Var a) {
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  MatrixX<Scalar> v = t.value(a).unaryExpr(
      [inv_sqrt2](Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::erf(x * inv_sqrt2)); });
  return t.record(std::move(v), {a}, [a, inv_sqrt2](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    const Scalar inv_sqrt_2pi = Scalar(1) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
    MatrixX<Scalar> d = tp.value(a).unaryExpr([&](Scalar x) {
      return Scalar(0.5) * (Scalar(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(Scalar(-0.5) * x * x);
    });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

/// Normalizes each row to zero mean and unit variance, then applies gamma/beta (1 x n).
template <typename Scalar>
Var layer_norm(Tape<Scalar>& t, Var x, Var gamma, Var beta, Scalar eps) {
  const MatrixX<Scalar>& xv = t.value(x);
  const Eigen::Index n = xv.cols();
  VectorX<Scalar> mean = xv.rowwise().mean();
  MatrixX<Scalar> centered = xv.colwise() - mean;
  VectorX<Scalar> inv_std = ((centered.array().square().rowwise().sum() / Scalar(n)) + eps).rsqrt().matrix();
  MatrixX<Scalar> xhat = inv_std.asDiagonal() * centered;
  MatrixX<Scalar> y = xhat * t.value(gamma).row(0).asDiagonal();
  y.rowwise() += t.value(beta).row(0);
  return t.record(std::move(y), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n](
                      Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
                    if (tp.requires_grad(gamma)) tp.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                    if (tp.requires_grad(beta)) tp.accumulate(beta, g.colwise().sum());
                    if (!tp.requires_grad(x)) return;
                    MatrixX<Scalar> dxhat = g * tp.value(gamma).row(0).asDiagonal();
                    VectorX<Scalar> m1 = dxhat.rowwise().mean();
                    VectorX<Scalar> m2 = dxhat.cwiseProduct(xhat).rowwise().sum() / Scalar(n);
                    MatrixX<Scalar> dx = dxhat;
                    dx.colwise() -= m1;
                    dx -= m2.asDiagonal() * xhat;
                    tp.accumulate(x, inv_std.asDiagonal() * dx);
                  });
}

template <typename Scalar>
Var softmax_rows(Tape<Scalar>& t, Var a) {
  MatrixX<Scalar> p = t.value(a);
  p.colwise() -= p.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p = p.cwiseQuotient(p.rowwise().sum().replicate(1, p.cols()));
  MatrixX<Scalar> saved = p;
  return t.record(std::move(p), {a}, [a, saved = std::move(saved)](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    VectorX<Scalar> dot = g.cwiseProduct(saved).rowwise().sum();
    MatrixX<Scalar> d = g;
    d.colwise() -= dot;
    tp.accumulate(a, saved.cwiseProduct(d));
  });
}

template <typename Scalar>
Var slice_rows(Tape<Scalar>& t, Var a, Eigen::Index start, Eigen::Index count) {
  const Eigen::Index rows = t.value(a).rows(), cols = t.value(a).cols();
  return t.record(t.value(a).middleRows(start, count), {a},
                  [a, start, count, rows, cols](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
                    MatrixX<Scalar> d = MatrixX<Scalar>::Zero(rows, cols);
                    d.middleRows(start, count) = g;
                    tp.accumulate(a, d);
                  });
}

template <typename Scalar>
Var slice_cols(Tape<Scalar>& t, Var a, Eigen::Index start, Eigen::Index count) {
  const Eigen::Index rows = t.value(a).rows(), cols = t.value(a).cols();
  return t.record(t.value(a).middleCols(start, count), {a},
                  [a, start, count, rows, cols](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
                    MatrixX<Scalar> d = MatrixX<Scalar>::Zero(rows, cols);
                    d.middleCols(start, count) = g;
                    tp.accumulate(a, d);
                  });
}

template <typename Scalar>
Var concat_rows(Tape<Scalar>& t, const std::vector<Var>& parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.value(parts.front()).cols();
  for (Var p : parts) rows += t.value(p).rows();
  MatrixX<Scalar> v(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    v.middleRows(r, t.value(p).rows()) = t.value(p);
    r += t.value(p).rows();
  }
  return t.record(std::move(v), parts, [parts](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    Eigen::Index r0 = 0;
    for (Var p : parts) {
      const Eigen::Index n = tp.value(p).rows();
      if (tp.requires_grad(p)) tp.accumulate(p, g.middleRows(r0, n));
      r0 += n;
    }
  });
}

template <typename Scalar>
Var concat_cols(Tape<Scalar>& t, const std::vector<Var>& parts) {
  Eigen::Index cols = 0;
  const Eigen::Index rows = t.value(parts.front()).rows();
  for (Var p : parts) cols += t.value(p).cols();
  MatrixX<Scalar> v(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    v.middleCols(c, t.value(p).cols()) = t.value(p);
    c += t.value(p).cols();
  }
  return t.record(std::move(v), parts, [parts](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    Eigen::Index c0 = 0;
    for (Var p : parts) {
      const Eigen::Index n = tp.value(p).cols();
      if (tp.requires_grad(p)) tp.accumulate(p, g.middleCols(c0, n));
      c0 += n;
    }
  });
}

/// Depth-to-space for a 2x2 stride-2 transposed convolution.
///
/// Input rows are the pixels of an h x w grid (row-major); column block k = 2*dy + dx of width
/// `channels` holds the output for sub-position (dy, dx). Output rows are the pixels of the
/// 2h x 2w grid, row-major.
template <typename Scalar>
Var pixel_shuffle(Tape<Scalar>& t, Var a, int h, int w, Eigen::Index channels) {
  const MatrixX<Scalar>& in = t.value(a);
  const int out_w = 2 * w;
  MatrixX<Scalar> out(static_cast<Eigen::Index>(4) * h * w, channels);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < 4; ++k)
        out.row((2 * i + k / 2) * out_w + 2 * j + k % 2) = in.block(i * w + j, k * channels, 1, channels);
  return t.record(std::move(out), {a}, [a, h, w, channels](Tape<Scalar>& tp, const MatrixX<Scalar>& g) {
    const int ow = 2 * w;
    MatrixX<Scalar> d(static_cast<Eigen::Index>(h) * w, 4 * channels);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int k = 0; k < 4; ++k)
          d.block(i * w + j, k * channels, 1, channels) = g.row((2 * i + k / 2) * ow + 2 * j + k % 2);
    tp.accumulate(a, d);
  });
}

/// x * weight^T + bias, weight is out x in, bias is 1 x out.
template <typename Scalar>
Var linear(Tape<Scalar>& t, Var x, Var weight, Var bias) {
  return add_row(t, matmul_nt(t, x, weight), bias);
}

}  // namespace aquaseg::ad
