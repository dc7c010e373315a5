#pragma once

// 1D layers with explicit forward/backward passes.
//
// Activations are column-major matrices of shape channels x (batch * length):
// column b*len + t holds every channel at position t of sample b. Forward
// passes are const; anything backward needs is written to a caller-owned
// cache, so eval-mode inference on shared parameters is thread-safe.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stitch/rng.hpp"

namespace stitch::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
struct Param {
  Mat<T> value;
  Mat<T> grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Mat<T>::Zero(rows, cols);
    grad = Mat<T>::Zero(rows, cols);
  }
};

/// He-style fan-in uniform initialization: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <class T>
void fan_in_uniform(Mat<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<T>(uniform(rng, -bound, bound));
  }
}

// ---------------------------------------------------------------------------

/// Same-padded 1D convolution. Weight column index is tap * in + channel.
template <class T>
struct Conv1d {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  Param<T> weight;
  Param<T> bias;

  struct Cache {
    Mat<T> col;
    std::size_t len = 0;
  };

  Conv1d() = default;
  Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t k, Rng& rng) : in(in_ch), out(out_ch), kernel(k) {
    weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(kernel * in));
    bias.resize(static_cast<Eigen::Index>(out), 1);
    fan_in_uniform(weight.value, kernel * in, rng);
  }

  Mat<T> im2col(const Mat<T>& x, std::size_t len) const {
    if (kernel == 1) return x;
    const auto cin = static_cast<Eigen::Index>(in);
    const Eigen::Index total = x.cols();
    const auto L = static_cast<Eigen::Index>(len);
    const Eigen::Index pad = static_cast<Eigen::Index>(kernel / 2);
    Mat<T> col = Mat<T>::Zero(static_cast<Eigen::Index>(kernel) * cin, total);
    for (Eigen::Index b = 0; b < total / L; ++b) {
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(kernel); ++k) {
        const Eigen::Index shift = k - pad;
        const Eigen::Index t_lo = std::max<Eigen::Index>(0, -shift);
        const Eigen::Index t_hi = std::min<Eigen::Index>(L, L - shift);
        if (t_hi <= t_lo) continue;
        col.block(k * cin, b * L + t_lo, cin, t_hi - t_lo) = x.block(0, b * L + t_lo + shift, cin, t_hi - t_lo);
      }
    }
    return col;
  }

  Mat<T> col2im(const Mat<T>& dcol, std::size_t len) const {
    if (kernel == 1) return dcol;
    const auto cin = static_cast<Eigen::Index>(in);
    const Eigen::Index total = dcol.cols();
    const auto L = static_cast<Eigen::Index>(len);
    const Eigen::Index pad = static_cast<Eigen::Index>(kernel / 2);
    Mat<T> dx = Mat<T>::Zero(cin, total);
    for (Eigen::Index b = 0; b < total / L; ++b) {
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(kernel); ++k) {
        const Eigen::Index shift = k - pad;
        const Eigen::Index t_lo = std::max<Eigen::Index>(0, -shift);
        const Eigen::Index t_hi = std::min<Eigen::Index>(L, L - shift);
        if (t_hi <= t_lo) continue;
        dx.block(0, b * L + t_lo + shift, cin, t_hi - t_lo) += dcol.block(k * cin, b * L + t_lo, cin, t_hi - t_lo);
      }
    }
    return dx;
  }

  Mat<T> forward(const Mat<T>& x, std::size_t len, Cache* cache) const {
    Mat<T> col = im2col(x, len);
    Mat<T> y(weight.value.rows(), x.cols());
    y.noalias() = weight.value * col;
    y.colwise() += bias.value.col(0);
    if (cache) {
      cache->col = std::move(col);
      cache->len = len;
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, const Cache& cache) {
    weight.grad.noalias() += dy * cache.col.transpose();
    bias.grad += dy.rowwise().sum();
    Mat<T> dcol(weight.value.cols(), dy.cols());
    dcol.noalias() = weight.value.transpose() * dy;
    return col2im(dcol, cache.len);
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

// ---------------------------------------------------------------------------

/// Per-channel batch normalization over all batch positions.
template <class T>
struct BatchNorm1d {
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  Param<T> gamma;
  Param<T> beta;
  Mat<T> running_mean;
  Mat<T> running_var;

  struct Cache {
    Mat<T> xhat;
    Mat<T> inv_std;     // channels x 1
    Mat<T> batch_mean;  // channels x 1
    Mat<T> batch_var;   // channels x 1, unbiased
  };

  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t ch) {
    const auto c = static_cast<Eigen::Index>(ch);
    gamma.resize(c, 1);
    gamma.value.setOnes();
    beta.resize(c, 1);
    running_mean = Mat<T>::Zero(c, 1);
    running_var = Mat<T>::Ones(c, 1);
  }

  /// Training mode when `cache` is non-null (batch statistics), eval mode
  /// (running statistics) otherwise.
  Mat<T> forward(const Mat<T>& x, Cache* cache) const {
    Mat<T> y(x.rows(), x.cols());
    if (!cache) {
      for (Eigen::Index c = 0; c < x.rows(); ++c) {
        const T scale = gamma.value(c) / std::sqrt(running_var(c) + static_cast<T>(kEps));
        const T shift = beta.value(c) - running_mean(c) * scale;
        y.row(c) = (x.row(c).array() * scale + shift).matrix();
      }
      return y;
    }
    const auto n = static_cast<T>(x.cols());
    cache->xhat.resize(x.rows(), x.cols());
    cache->inv_std.resize(x.rows(), 1);
    cache->batch_mean.resize(x.rows(), 1);
    cache->batch_var.resize(x.rows(), 1);
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      const T mean = x.row(c).sum() / n;
      const T var = (x.row(c).array() - mean).square().sum() / n;
      const T inv_std = static_cast<T>(1) / std::sqrt(var + static_cast<T>(kEps));
      cache->xhat.row(c) = ((x.row(c).array() - mean) * inv_std).matrix();
      cache->inv_std(c) = inv_std;
      cache->batch_mean(c) = mean;
      cache->batch_var(c) = x.cols() > 1 ? var * n / (n - 1) : var;
      y.row(c) = (cache->xhat.row(c).array() * gamma.value(c) + beta.value(c)).matrix();
    }
    return y;
  }

  void update_running(const Cache& cache) {
    const auto m = static_cast<T>(kMomentum);
    running_mean = (1 - m) * running_mean + m * cache.batch_mean;
    running_var = (1 - m) * running_var + m * cache.batch_var;
  }

  Mat<T> backward(const Mat<T>& dy, const Cache& cache) {
    const auto n = static_cast<T>(dy.cols());
    Mat<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index c = 0; c < dy.rows(); ++c) {
      const auto dyc = dy.row(c).array();
      const auto xh = cache.xhat.row(c).array();
      gamma.grad(c) += (dyc * xh).sum();
      beta.grad(c) += dyc.sum();
      const T g = gamma.value(c);
      const T sum_dxhat = g * dyc.sum();
      const T sum_dxhat_xhat = g * (dyc * xh).sum();
      dx.row(c) = ((g * dyc * n - sum_dxhat - xh * sum_dxhat_xhat) * (cache.inv_std(c) / n)).matrix();
    }
    return dx;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

// ---------------------------------------------------------------------------

template <class T>
Mat<T> relu(const Mat<T>& x) {
  return x.cwiseMax(static_cast<T>(0));
}

/// Backward through ReLU given its output.
template <class T>
Mat<T> relu_backward(const Mat<T>& dy, const Mat<T>& y) {
  return (y.array() > static_cast<T>(0)).select(dy, static_cast<T>(0));
}

/// Max over adjacent column pairs. `argmax` records which of the pair won.
template <class T>
Mat<T> maxpool2(const Mat<T>& x, std::vector<std::uint8_t>* argmax) {
  const Eigen::Index half = x.cols() / 2;
  Mat<T> y(x.rows(), half);
  if (argmax) argmax->assign(static_cast<std::size_t>(x.rows() * half), 0);
  for (Eigen::Index m = 0; m < half; ++m) {
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      const T a = x(c, 2 * m);
      const T b = x(c, 2 * m + 1);
      const bool second = b > a;
      y(c, m) = second ? b : a;
      if (argmax && second) (*argmax)[static_cast<std::size_t>(m * x.rows() + c)] = 1;
    }
  }
  return y;
}

template <class T>
Mat<T> maxpool2_backward(const Mat<T>& dy, const std::vector<std::uint8_t>& argmax) {
  Mat<T> dx = Mat<T>::Zero(dy.rows(), dy.cols() * 2);
  for (Eigen::Index m = 0; m < dy.cols(); ++m) {
    for (Eigen::Index c = 0; c < dy.rows(); ++c) {
      const auto sel = argmax[static_cast<std::size_t>(m * dy.rows() + c)];
      dx(c, 2 * m + sel) = dy(c, m);
    }
  }
  return dx;
}

/// Nearest-neighbour x2 upsampling along positions.
template <class T>
Mat<T> upsample2(const Mat<T>& x) {
  Mat<T> y(x.rows(), x.cols() * 2);
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    y.col(2 * m) = x.col(m);
    y.col(2 * m + 1) = x.col(m);
  }
  return y;
}

template <class T>
Mat<T> upsample2_backward(const Mat<T>& dy) {
  Mat<T> dx(dy.rows(), dy.cols() / 2);
  for (Eigen::Index m = 0; m < dx.cols(); ++m) dx.col(m) = dy.col(2 * m) + dy.col(2 * m + 1);
  return dx;
}

// ---------------------------------------------------------------------------

/// Self-attention over positions:
///   Q = Wq x, K = Wk x, V = Wv x
///   A = softmax(Q^T K / sqrt(d)) row-wise (one row per query position)
///   y = x + Wo (V A^T)          (residual form)
///   y = Wo (V A^T)              (residual disabled)
/// A is kept transposed (column i is the distribution of query i) so the
/// softmax runs down contiguous columns.
template <class T>
struct NonLocalBlock {
  std::size_t channels = 0;
  std::size_t dim = 0;
  bool residual = true;
  Conv1d<T> query;
  Conv1d<T> key;
  Conv1d<T> value;
  Conv1d<T> project;

  struct Cache {
    Mat<T> x;
    Mat<T> q;
    Mat<T> k;
    Mat<T> v;
    std::vector<Mat<T>> attention_t;  // A^T per sample, len x len, columns sum to 1
    Mat<T> attended;                  // V A^T for every sample
    std::size_t len = 0;
  };

  NonLocalBlock() = default;
  NonLocalBlock(std::size_t ch, std::size_t d, bool residual_connection, Rng& rng)
      : channels(ch),
        dim(d),
        residual(residual_connection),
        query(ch, d, 1, rng),
        key(ch, d, 1, rng),
        value(ch, ch, 1, rng),
        project(ch, ch, 1, rng) {
    // With the residual path the block starts as the identity.
    if (residual) project.weight.value.setZero();
  }

  T scale() const { return static_cast<T>(1.0 / std::sqrt(static_cast<double>(dim))); }

  /// A^T for one sample: column i = softmax over keys of query i.
  Mat<T> attention_t(const Mat<T>& q, const Mat<T>& k) const {
    Mat<T> s(k.cols(), q.cols());
    s.noalias() = k.transpose() * q;
    s *= scale();
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
      auto col = s.col(i);
      const T mx = col.maxCoeff();
      col = (col.array() - mx).exp().matrix();
      col /= col.sum();
    }
    return s;
  }

  Mat<T> forward(const Mat<T>& x, std::size_t len, Cache* cache) const {
    Mat<T> q = query.forward(x, len, nullptr);
    Mat<T> k = key.forward(x, len, nullptr);
    Mat<T> v = value.forward(x, len, nullptr);
    const auto L = static_cast<Eigen::Index>(len);
    const Eigen::Index batch = x.cols() / L;
    Mat<T> attended(v.rows(), v.cols());
    if (cache) cache->attention_t.resize(static_cast<std::size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
      Mat<T> at = attention_t(q.middleCols(b * L, L), k.middleCols(b * L, L));
      attended.middleCols(b * L, L).noalias() = v.middleCols(b * L, L) * at;
      if (cache) cache->attention_t[static_cast<std::size_t>(b)] = std::move(at);
    }
    Mat<T> y = project.forward(attended, len, nullptr);
    if (residual) y += x;
    if (cache) {
      cache->x = x;
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->attended = std::move(attended);
      cache->len = len;
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, const Cache& cache) {
    const auto L = static_cast<Eigen::Index>(cache.len);
    const Eigen::Index batch = dy.cols() / L;
    Mat<T> dx = residual ? dy : Mat<T>::Zero(dy.rows(), dy.cols());

    // y = Wo * attended + bo
    project.weight.grad.noalias() += dy * cache.attended.transpose();
    project.bias.grad += dy.rowwise().sum();
    Mat<T> d_att(project.weight.value.cols(), dy.cols());
    d_att.noalias() = project.weight.value.transpose() * dy;

    Mat<T> dq(cache.q.rows(), cache.q.cols());
    Mat<T> dk(cache.k.rows(), cache.k.cols());
    Mat<T> dv(cache.v.rows(), cache.v.cols());
    Mat<T> dat(L, L);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Mat<T>& at = cache.attention_t[static_cast<std::size_t>(b)];
      const auto d_att_b = d_att.middleCols(b * L, L);
      dv.middleCols(b * L, L).noalias() = d_att_b * at.transpose();
      dat.noalias() = cache.v.middleCols(b * L, L).transpose() * d_att_b;
      // softmax backward, per column
      const auto dots = (at.array() * dat.array()).colwise().sum().eval();
      dat = (at.array() * (dat.array().rowwise() - dots)).matrix() * scale();
      dq.middleCols(b * L, L).noalias() = cache.k.middleCols(b * L, L) * dat;
      dk.middleCols(b * L, L).noalias() = cache.q.middleCols(b * L, L) * dat.transpose();
    }
    typename Conv1d<T>::Cache xc{cache.x, cache.len};
    dx += query.backward(dq, xc);
    dx += key.backward(dk, xc);
    dx += value.backward(dv, xc);
    return dx;
  }

  void collect(std::vector<Param<T>*>& out) {
    query.collect(out);
    key.collect(out);
    value.collect(out);
    project.collect(out);
  }
};

}  // namespace stitch::nn
