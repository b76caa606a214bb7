#pragma once

// Bi-LSTM question encoder, tile-and-concatenate fusion with batch
// normalization, and the two answer heads, with an explicit backward pass.

#include <optional>
#include <stdexcept>
#include <vector>

#include "hqs/nn.hpp"

namespace hqs::fusion {

enum class HeadKind { kYesNo, kOthers };

struct NetConfig {
  int seq_len = 21;      // m
  int answer_len = 11;   // r
  int hidden = 128;      // per direction
  int embed_dim = 600;   // d
  int image_dim = 1000;
  int step_hidden = 256; // h; the pre-softmax dense layer has answer_len * step_hidden units
  double dropout = 0.5;
  double bn_momentum = 0.99;
  double bn_eps = 1e-3;

  int fused_dim() const { return 2 * hidden + image_dim; }
  int flat_dim() const { return seq_len * fused_dim(); }
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Inputs for B items. ids is seq_len x B; images is image_dim x B.
struct Batch {
  Eigen::MatrixXi ids;
  Eigen::MatrixXf images;
  // kYesNo: 0 = yes, 1 = no. kOthers: answer_len x B answer-vocab ids.
  std::vector<int> labels;
  Eigen::MatrixXi answers;

  int size() const { return static_cast<int>(ids.cols()); }
};

template <class S>
class FusionModel {
 public:
  using M = nn::Mat<S>;

  struct Tape {
    M x;                  // embedded inputs, D x TB
    typename nn::Lstm<S>::Cache fwd, bwd;
    M dropout_mask;       // 2H x TB, empty when not training
    typename nn::BatchNorm<S>::Cache bn;
    M flat;               // flat_dim x B
    M step_hidden;        // h x rB (Others only)
    M probs;
  };

  FusionModel() = default;
  FusionModel(HeadKind kind, const NetConfig& cfg, int output_vocab, Rng& rng)
      : kind_(kind), cfg_(cfg), vocab_(kind == HeadKind::kYesNo ? 2 : output_vocab) {
    if (vocab_ < 1) throw std::invalid_argument("output vocabulary must be nonempty");
    fwd_ = nn::Lstm<S>("lstm_fwd", cfg.embed_dim, cfg.hidden, rng);
    bwd_ = nn::Lstm<S>("lstm_bwd", cfg.embed_dim, cfg.hidden, rng);
    bn_ = nn::BatchNorm<S>("bn", cfg.fused_dim(), cfg.bn_momentum, cfg.bn_eps);
    if (kind == HeadKind::kYesNo) {
      dense_w_ = nn::Param<S>("yes_no.W", nn::glorot_uniform<S>(2, cfg.flat_dim(), rng));
      dense_b_ = nn::Param<S>("yes_no.b", M::Zero(2, 1));
    } else {
      const int t = cfg.answer_len * cfg.step_hidden;
      dense_w_ = nn::Param<S>("others.W1", nn::glorot_uniform<S>(t, cfg.flat_dim(), rng));
      dense_b_ = nn::Param<S>("others.b1", M::Zero(t, 1));
      proj_w_ = nn::Param<S>("others.W2", nn::glorot_uniform<S>(vocab_, cfg.step_hidden, rng));
      proj_b_ = nn::Param<S>("others.b2", M::Zero(vocab_, 1));
    }
  }

  HeadKind kind() const { return kind_; }
  const NetConfig& config() const { return cfg_; }
  int output_vocab() const { return vocab_; }

  std::vector<nn::Param<S>*> params() {
    std::vector<nn::Param<S>*> out;
    for (auto* p : fwd_.params()) out.push_back(p);
    for (auto* p : bwd_.params()) out.push_back(p);
    for (auto* p : bn_.params()) out.push_back(p);
    out.push_back(&dense_w_);
    out.push_back(&dense_b_);
    if (kind_ == HeadKind::kOthers) {
      out.push_back(&proj_w_);
      out.push_back(&proj_b_);
    }
    return out;
  }
  nn::BatchNorm<S>& batch_norm() { return bn_; }
  const nn::BatchNorm<S>& batch_norm() const { return bn_; }

  // embedding: D x V, one column per question-vocab id.
  M embed(const Eigen::MatrixXi& ids, const M& embedding) const {
    const int T = static_cast<int>(ids.rows()), B = static_cast<int>(ids.cols());
    if (T != cfg_.seq_len) throw std::invalid_argument("question sequence length mismatch");
    M x(cfg_.embed_dim, static_cast<Eigen::Index>(T) * B);
    for (int t = 0; t < T; ++t)
      for (int b = 0; b < B; ++b) x.col(static_cast<Eigen::Index>(t) * B + b) = embedding.col(ids(t, b));
    return x;
  }

  // Bi-LSTM outputs, 2H x TB. Forward state on top, backward (aligned to the
  // same step) below.
  M encode(const M& x, int batch, Tape* tape) const {
    const int T = cfg_.seq_len, H = cfg_.hidden;
    M out(2 * H, x.cols());
    out.topRows(H) = fwd_.forward(x, T, batch, false, tape ? &tape->fwd : nullptr);
    out.bottomRows(H) = bwd_.forward(x, T, batch, true, tape ? &tape->bwd : nullptr);
    return out;
  }

  // Pre-normalization fusion: encoding rows followed by the tiled image.
  M tile_concat(const M& enc, const M& images) const {
    const int B = static_cast<int>(images.cols()), T = cfg_.seq_len;
    if (images.rows() != cfg_.image_dim || enc.rows() != 2 * cfg_.hidden ||
        enc.cols() != static_cast<Eigen::Index>(T) * B)
      throw std::invalid_argument("fusion shape mismatch");
    M fused(cfg_.fused_dim(), enc.cols());
    fused.topRows(enc.rows()) = enc;
    for (int t = 0; t < T; ++t) fused.bottomRows(cfg_.image_dim).middleCols(static_cast<Eigen::Index>(t) * B, B) = images;
    return fused;
  }

  M flatten(const M& y, int batch) const {
    const int T = cfg_.seq_len, F = cfg_.fused_dim();
    M flat(static_cast<Eigen::Index>(T) * F, batch);
    for (int t = 0; t < T; ++t) flat.middleRows(static_cast<Eigen::Index>(t) * F, F) = y.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
    return flat;
  }

  M unflatten(const M& flat, int batch) const {
    const int T = cfg_.seq_len, F = cfg_.fused_dim();
    M y(F, static_cast<Eigen::Index>(T) * batch);
    for (int t = 0; t < T; ++t) y.middleCols(static_cast<Eigen::Index>(t) * batch, batch) = flat.middleRows(static_cast<Eigen::Index>(t) * F, F);
    return y;
  }

  // Returns probabilities: 2 x B (row 0 = yes) or z x rB (column s * B + b is
  // step s of item b). rng is only consulted for dropout when training.
  M forward(const Batch& batch, const M& embedding, bool training, Rng* rng, Tape* tape) {
    const int B = batch.size();
    Tape local;
    Tape& tp = tape ? *tape : local;
    tp.x = embed(batch.ids, embedding);
    M enc = encode(tp.x, B, &tp);
    if (training && cfg_.dropout > 0.0) {
      if (!rng) throw std::invalid_argument("training forward needs an rng for dropout");
      const S keep = static_cast<S>(1.0 - cfg_.dropout);
      tp.dropout_mask = M(enc.rows(), enc.cols());
      for (Eigen::Index j = 0; j < enc.cols(); ++j)
        for (Eigen::Index i = 0; i < enc.rows(); ++i)
          tp.dropout_mask(i, j) = rng->uniform() < static_cast<double>(keep) ? S(1) / keep : S(0);
      enc.array() *= tp.dropout_mask.array();
    } else {
      tp.dropout_mask.resize(0, 0);
    }
    M fused = tile_concat(enc, batch.images.template cast<S>());
    M y = training ? bn_.forward_train(fused, &tp.bn) : bn_.forward_inference(fused);
    tp.flat = flatten(y, B);
    return head_forward(tp, B);
  }

  // Inference path: no dropout, running statistics, no tape kept.
  M infer(const Batch& batch, const M& embedding) const {
    Tape tp;
    const int B = batch.size();
    tp.flat = flatten(bn_.forward_inference(prenorm(batch, embedding)), B);
    return head_forward(tp, B);
  }

  // Fused features before normalization, F x TB, in inference mode.
  M prenorm(const Batch& batch, const M& embedding) const {
    const M x = embed(batch.ids, embedding);
    return tile_concat(encode(x, batch.size(), nullptr), batch.images.template cast<S>());
  }

  M head_forward(Tape& tp, int B) const {
    if (kind_ == HeadKind::kYesNo) {
      M logits = dense_w_.value * tp.flat;
      logits.colwise() += dense_b_.value.col(0);
      tp.probs = nn::softmax_columns<S>(logits);
      return tp.probs;
    }
    const int r = cfg_.answer_len, h = cfg_.step_hidden;
    M hid = dense_w_.value * tp.flat;
    hid.colwise() += dense_b_.value.col(0);
    tp.step_hidden = M(h, static_cast<Eigen::Index>(r) * B);
    for (int s = 0; s < r; ++s) tp.step_hidden.middleCols(static_cast<Eigen::Index>(s) * B, B) = hid.middleRows(static_cast<Eigen::Index>(s) * h, h);
    M logits = proj_w_.value * tp.step_hidden;
    logits.colwise() += proj_b_.value.col(0);
    tp.probs = nn::softmax_columns<S>(logits);
    return tp.probs;
  }

  // One-hot targets laid out like the probabilities.
  M targets(const Batch& batch) const {
    const int B = batch.size();
    if (kind_ == HeadKind::kYesNo) {
      M t = M::Zero(2, B);
      for (int b = 0; b < B; ++b) t(batch.labels.at(static_cast<std::size_t>(b)), b) = S(1);
      return t;
    }
    const int r = cfg_.answer_len;
    M t = M::Zero(vocab_, static_cast<Eigen::Index>(r) * B);
    for (int s = 0; s < r; ++s)
      for (int b = 0; b < B; ++b) t(batch.answers(s, b), static_cast<Eigen::Index>(s) * B + b) = S(1);
    return t;
  }

  // Batch mean of the per-item loss (summed over output steps).
  double loss(const M& target, const M& probs, int batch) const {
    double total = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j)
      total += nn::cross_entropy<S>(target.col(j), probs.col(j));
    return total / batch;
  }

  // Gradients of loss(targets, probs) into every parameter.
  // dx, when given, receives dL/d(embedded inputs), D x TB.
  void backward(const Tape& tp, const M& target, int B, M* dx = nullptr) {
    const M dlogits = (tp.probs - target) / static_cast<S>(B);
    M dflat;
    if (kind_ == HeadKind::kYesNo) {
      dense_w_.grad.noalias() += dlogits * tp.flat.transpose();
      dense_b_.grad.col(0) += dlogits.rowwise().sum();
      dflat.noalias() = dense_w_.value.transpose() * dlogits;
    } else {
      const int r = cfg_.answer_len, h = cfg_.step_hidden;
      proj_w_.grad.noalias() += dlogits * tp.step_hidden.transpose();
      proj_b_.grad.col(0) += dlogits.rowwise().sum();
      M dsh = proj_w_.value.transpose() * dlogits;
      M dhid(static_cast<Eigen::Index>(r) * h, B);
      for (int s = 0; s < r; ++s) dhid.middleRows(static_cast<Eigen::Index>(s) * h, h) = dsh.middleCols(static_cast<Eigen::Index>(s) * B, B);
      dense_w_.grad.noalias() += dhid * tp.flat.transpose();
      dense_b_.grad.col(0) += dhid.rowwise().sum();
      dflat.noalias() = dense_w_.value.transpose() * dhid;
    }
    M dy = unflatten(dflat, B);
    M dfused = bn_.backward(dy, tp.bn);
    M denc = dfused.topRows(2 * cfg_.hidden);
    if (tp.dropout_mask.size() > 0) denc.array() *= tp.dropout_mask.array();
    const int T = cfg_.seq_len, H = cfg_.hidden;
    M dx_f = fwd_.backward(tp.x, denc.topRows(H), T, B, false, tp.fwd, dx != nullptr);
    M dx_b = bwd_.backward(tp.x, denc.bottomRows(H), T, B, true, tp.bwd, dx != nullptr);
    if (dx) *dx = dx_f + dx_b;
  }

  // Replaces running statistics with exact population statistics from the
  // pre-normalization fusion of the given batches (no dropout).
  void set_population_statistics(const nn::Vec<S>& mean, const nn::Vec<S>& var) {
    bn_.running_mean = mean;
    bn_.running_var = var;
  }

  nn::Lstm<S> fwd_, bwd_;
  nn::BatchNorm<S> bn_;
  nn::Param<S> dense_w_, dense_b_, proj_w_, proj_b_;

 private:
  HeadKind kind_ = HeadKind::kOthers;
  NetConfig cfg_;
  int vocab_ = 0;
};

}  // namespace hqs::fusion
