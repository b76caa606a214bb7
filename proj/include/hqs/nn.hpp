#pragma once

// Dense building blocks with hand-written backward passes. Templated on the
// scalar so the same code runs in float for training and in double for
// finite-difference checks.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "hqs/random.hpp"

namespace hqs::nn {

// Flushes subnormal floats to zero for the lifetime of the guard. Adam moment
// estimates decay into the subnormal range and slow training several-fold
// otherwise.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
 public:
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  Mat<S> m;
  Mat<S> v;
  bool trainable = true;

  Param() = default;
  // Optimizer state is allocated by reset_state(), not here, so inference-only
  // models stay at one copy of the weights.
  Param(std::string n, Mat<S> init) : name(std::move(n)), value(std::move(init)) {}

  void reset_state() {
    grad = Mat<S>::Zero(value.rows(), value.cols());
    m = grad;
    v = grad;
  }
  void release_state() {
    grad.resize(0, 0);
    m.resize(0, 0);
    v.resize(0, 0);
  }
  void zero_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Mat<S>::Zero(value.rows(), value.cols());
    else grad.setZero();
  }
};

// Keras-style Adam (epsilon added outside the square root).
template <class S>
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Param<S>*>& params) {
    ++t_;
    const double lr_t = lr_ * std::sqrt(1.0 - std::pow(b2_, t_)) / (1.0 - std::pow(b1_, t_));
    const S b1 = static_cast<S>(b1_), b2 = static_cast<S>(b2_), eps = static_cast<S>(eps_), lr = static_cast<S>(lr_t);
    for (auto* p : params) {
      if (!p->trainable) continue;
      auto g = p->grad.array();
      p->m.array() = b1 * p->m.array() + (S(1) - b1) * g;
      p->v.array() = b2 * p->v.array() + (S(1) - b2) * g.square();
      p->value.array() -= lr * p->m.array() / (p->v.array().sqrt() + eps);
    }
  }
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

template <class S>
Mat<S> glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<S>(rng.uniform(-limit, limit));
  return m;
}

// rows x cols with orthonormal columns (or rows, whichever is shorter).
template <class S>
Mat<S> orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const bool tall = rows >= cols;
  const Eigen::Index big = tall ? rows : cols, small = tall ? cols : rows;
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index j = 0; j < small; ++j)
    for (Eigen::Index i = 0; i < big; ++i) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // sign fix makes the decomposition unique
  Eigen::MatrixXd r = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  Eigen::MatrixXd out = tall ? q : Eigen::MatrixXd(q.transpose());
  return out.cast<S>();
}

template <class S>
inline S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

// Column-wise softmax, numerically stabilized.
template <class S>
Mat<S> softmax_columns(const Mat<S>& logits) {
  Mat<S> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const S mx = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - mx).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

inline constexpr double kLogEpsilon = 1e-12;

// -sum a ln max(p, eps) over one column pair.
template <class S>
double cross_entropy(const Eigen::Ref<const Vec<S>>& target, const Eigen::Ref<const Vec<S>>& probs) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i)
    if (target(i) != S(0))
      loss -= static_cast<double>(target(i)) * std::log(std::max(static_cast<double>(probs(i)), kLogEpsilon));
  return loss;
}

// One LSTM direction. Inputs and outputs hold one time step per column block:
// column t * batch + b is step t of item b.
template <class S>
class Lstm {
 public:
  struct Cache {
    Mat<S> gates;  // 4H x TB, post-activation (i, f, g, o)
    Mat<S> c;      // H x TB
    Mat<S> h;      // H x TB
  };

  Lstm() = default;
  Lstm(const std::string& prefix, int input_dim, int hidden, Rng& rng) : hidden_(hidden) {
    w_ = Param<S>(prefix + ".W", glorot_uniform<S>(4 * hidden, input_dim, rng));
    // Keras builds the recurrent kernel as (H, 4H); transpose keeps the same draw semantics
    u_ = Param<S>(prefix + ".U", Mat<S>(orthogonal<S>(hidden, 4 * hidden, rng).transpose()));
    Mat<S> b = Mat<S>::Zero(4 * hidden, 1);
    b.block(hidden, 0, hidden, 1).setOnes();
    b_ = Param<S>(prefix + ".b", b);
  }

  int hidden() const { return hidden_; }
  std::vector<Param<S>*> params() { return {&w_, &u_, &b_}; }

  Mat<S> forward(const Mat<S>& x, int steps, int batch, bool reverse, Cache* cache) const {
    const int H = hidden_;
    const Mat<S> wx = w_.value * x;
    Mat<S> h_all(H, static_cast<Eigen::Index>(steps) * batch);
    Mat<S> gates(4 * H, h_all.cols()), c_all(H, h_all.cols());
    Mat<S> h = Mat<S>::Zero(H, batch), c = Mat<S>::Zero(H, batch);
    for (int k = 0; k < steps; ++k) {
      const int t = reverse ? steps - 1 - k : k;
      const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
      Mat<S> z = wx.middleCols(col, batch) + u_.value * h;
      z.colwise() += b_.value.col(0);
      Mat<S> g(4 * H, batch);
      g.topRows(H) = z.topRows(H).unaryExpr([](S v) { return sigmoid(v); });
      g.middleRows(H, H) = z.middleRows(H, H).unaryExpr([](S v) { return sigmoid(v); });
      g.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
      g.bottomRows(H) = z.bottomRows(H).unaryExpr([](S v) { return sigmoid(v); });
      c = (g.middleRows(H, H).array() * c.array() + g.topRows(H).array() * g.middleRows(2 * H, H).array()).matrix();
      h = (g.bottomRows(H).array() * c.array().tanh()).matrix();
      gates.middleCols(col, batch) = g;
      c_all.middleCols(col, batch) = c;
      h_all.middleCols(col, batch) = h;
    }
    if (cache) *cache = Cache{std::move(gates), std::move(c_all), h_all};
    return h_all;
  }

  // Accumulates parameter gradients; returns dL/dx when need_dx.
  Mat<S> backward(const Mat<S>& x, const Mat<S>& dh_all, int steps, int batch, bool reverse, const Cache& cache,
                  bool need_dx) {
    const int H = hidden_;
    Mat<S> dz_all(4 * H, dh_all.cols());
    Mat<S> dh_next = Mat<S>::Zero(H, batch), dc_next = Mat<S>::Zero(H, batch);
    for (int k = steps - 1; k >= 0; --k) {
      const int t = reverse ? steps - 1 - k : k;
      const int prev_t = reverse ? t + 1 : t - 1;
      const bool has_prev = k > 0;
      const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
      const auto g = cache.gates.middleCols(col, batch);
      const auto i = g.topRows(H).array(), f = g.middleRows(H, H).array(), gg = g.middleRows(2 * H, H).array(),
                 o = g.bottomRows(H).array();
      const auto c = cache.c.middleCols(col, batch).array();
      Mat<S> c_prev = has_prev ? Mat<S>(cache.c.middleCols(static_cast<Eigen::Index>(prev_t) * batch, batch))
                               : Mat<S>(Mat<S>::Zero(H, batch));
      const Mat<S> tc = c.tanh().matrix();
      Mat<S> dh = dh_all.middleCols(col, batch) + dh_next;
      Mat<S> dc = (dc_next.array() + dh.array() * o * (S(1) - tc.array().square())).matrix();
      auto dz = dz_all.middleCols(col, batch);
      dz.topRows(H) = (dc.array() * gg * i * (S(1) - i)).matrix();
      dz.middleRows(H, H) = (dc.array() * c_prev.array() * f * (S(1) - f)).matrix();
      dz.middleRows(2 * H, H) = (dc.array() * i * (S(1) - gg.square())).matrix();
      dz.bottomRows(H) = (dh.array() * tc.array() * o * (S(1) - o)).matrix();
      dc_next = (dc.array() * f).matrix();
      if (has_prev) {
        const auto h_prev = cache.h.middleCols(static_cast<Eigen::Index>(prev_t) * batch, batch);
        u_.grad.noalias() += dz * h_prev.transpose();
      }
      dh_next.noalias() = u_.value.transpose() * dz;
    }
    w_.grad.noalias() += dz_all * x.transpose();
    b_.grad.col(0) += dz_all.rowwise().sum();
    if (!need_dx) return {};
    return w_.value.transpose() * dz_all;
  }

  Param<S> w_, u_, b_;

 private:
  int hidden_ = 0;
};

// Normalizes each row (feature) over all columns (batch x time).
template <class S>
class BatchNorm {
 public:
  struct Cache {
    Mat<S> xhat;
    Vec<S> inv_std;
  };

  BatchNorm() = default;
  BatchNorm(const std::string& prefix, int features, double momentum, double eps)
      : momentum_(momentum), eps_(eps) {
    gamma_ = Param<S>(prefix + ".gamma", Mat<S>::Ones(features, 1));
    beta_ = Param<S>(prefix + ".beta", Mat<S>::Zero(features, 1));
    running_mean = Vec<S>::Zero(features);
    running_var = Vec<S>::Ones(features);
  }

  std::vector<Param<S>*> params() { return {&gamma_, &beta_}; }

  Mat<S> forward_train(const Mat<S>& x, Cache* cache) {
    const S n = static_cast<S>(x.cols());
    Vec<S> mean = x.rowwise().sum() / n;
    Mat<S> centered = x.colwise() - mean;
    Vec<S> var = centered.array().square().rowwise().sum().matrix() / n;
    Vec<S> inv_std = (var.array() + static_cast<S>(eps_)).rsqrt().matrix();
    Mat<S> xhat = centered.array().colwise() * inv_std.array();
    const S mom = static_cast<S>(momentum_);
    running_mean = mom * running_mean + (S(1) - mom) * mean;
    running_var = mom * running_var + (S(1) - mom) * var;
    Mat<S> y = (xhat.array().colwise() * gamma_.value.col(0).array()).colwise() + beta_.value.col(0).array();
    if (cache) *cache = Cache{std::move(xhat), std::move(inv_std)};
    return y;
  }

  Mat<S> forward_inference(const Mat<S>& x) const {
    Vec<S> scale = gamma_.value.col(0).array() * (running_var.array() + static_cast<S>(eps_)).rsqrt();
    Vec<S> shift = beta_.value.col(0).array() - running_mean.array() * scale.array();
    return (x.array().colwise() * scale.array()).colwise() + shift.array();
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    const S n = static_cast<S>(dy.cols());
    gamma_.grad.col(0) += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
    beta_.grad.col(0) += dy.rowwise().sum();
    Mat<S> dxhat = dy.array().colwise() * gamma_.value.col(0).array();
    Vec<S> sum_dxhat = dxhat.rowwise().sum();
    Vec<S> sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix();
    Mat<S> dx = (n * dxhat.array() - cache.xhat.array().colwise() * sum_dxhat_xhat.array()).colwise() -
                sum_dxhat.array();
    return dx.array().colwise() * (cache.inv_std.array() / n);
  }

  Param<S> gamma_, beta_;
  Vec<S> running_mean, running_var;

 private:
  double momentum_ = 0.99;
  double eps_ = 1e-3;
};

}  // namespace hqs::nn
