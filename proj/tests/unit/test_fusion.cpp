#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "hqs/error.hpp"
#include "hqs/fusion_net.hpp"
#include "hqs/vocab.hpp"
#include "test_support.hpp"

using namespace hqs;
using namespace hqs::fusion;
using M = nn::Mat<float>;

namespace {

text::Vocab answer_vocab() {
  return text::build_unbounded_vocab({{"right", "lobe"}, {"left", "lung"}, {"ct"}}, text::Vocab::answer_reserved());
}

Batch random_batch(const NetConfig& cfg, int n, int question_vocab, int answer_vocab, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  b.ids = Eigen::MatrixXi::Zero(cfg.seq_len, n);
  b.images = Eigen::MatrixXf(cfg.image_dim, n);
  b.answers = Eigen::MatrixXi::Zero(cfg.answer_len, n);
  for (int j = 0; j < n; ++j) {
    for (int t = 0; t < 4 && t < cfg.seq_len; ++t) b.ids(t, j) = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(question_vocab - 1)));
    for (int i = 0; i < cfg.image_dim; ++i) b.images(i, j) = static_cast<float>(rng.normal());
    b.labels.push_back(static_cast<int>(rng.below(2)));
    for (int s = 0; s < 2; ++s) b.answers(s, j) = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(answer_vocab - 2)));
  }
  return b;
}

Eigen::MatrixXf random_embedding(int dim, int vocab, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXf e(dim, vocab);
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = static_cast<float>(rng.normal());
  e.col(0).setZero();
  return e;
}

NetConfig small_config() {
  auto c = hqs::testing::tiny_net_config(0.5);
  c.seq_len = 6;
  c.answer_len = 4;
  c.hidden = 8;
  c.embed_dim = 10;
  c.image_dim = 12;
  c.step_hidden = 8;
  return c;
}

}  // namespace

TEST(Fusion, SoftmaxClosedForms) {
  M logits(2, 2);
  logits << 0, std::log(3.0f), 0, 0;
  auto p = nn::softmax_columns<float>(logits);
  EXPECT_FLOAT_EQ(p(0, 0), 0.5f);
  EXPECT_FLOAT_EQ(p(1, 0), 0.5f);
  EXPECT_NEAR(p(0, 1), 0.75f, 1e-7);
  EXPECT_NEAR(p(1, 1), 0.25f, 1e-7);
}

TEST(Fusion, LossClosedForms) {
  EXPECT_NEAR(yes_no_loss({1, 0}, {1, 0}), 0.0, 1e-12);
  EXPECT_NEAR(yes_no_loss({1, 0}, {0.5, 0.5}), std::log(2.0), 1e-12);
  EXPECT_NEAR(yes_no_loss({0, 1}, {0.25, 0.75}), -std::log(0.75), 1e-12);
  EXPECT_THROW(yes_no_loss({1}, {1, 0}), Error);

  const int z = 9, r = 11;
  std::vector<std::vector<double>> uniform(r, std::vector<double>(z, 1.0 / z));
  std::vector<std::vector<double>> onehot(r, std::vector<double>(z, 0.0));
  for (int s = 0; s < r; ++s) onehot[static_cast<std::size_t>(s)][static_cast<std::size_t>(s % z)] = 1.0;
  EXPECT_NEAR(others_loss(onehot, onehot), 0.0, 1e-12);
  EXPECT_NEAR(others_loss(onehot, uniform), r * std::log(static_cast<double>(z)), 1e-9);
  EXPECT_THROW(others_loss(onehot, {}), Error);
}

TEST(Fusion, DecodeRules) {
  auto v = answer_vocab();
  EXPECT_EQ(decode_answer(std::vector<int>(11, text::Vocab::kBlank), v), "");
  std::vector<int> ids(11, text::Vocab::kBlank);
  ids[0] = v.index("right");
  ids[1] = v.index("lobe");
  ids[3] = v.index("ct");  // after the first blank: ignored
  EXPECT_EQ(decode_answer(ids, v), "right lobe");
  EXPECT_EQ(decode_yes_no(0.7, 0.3), "yes");
  EXPECT_EQ(decode_yes_no(0.3, 0.7), "no");
}

TEST(Fusion, ShapeContractAtFullWidth) {
  NetConfig cfg;  // 21 steps, 128 per direction, 1000-dim images, 11 outputs
  cfg.step_hidden = 16;
  cfg.embed_dim = 20;
  EXPECT_EQ(cfg.fused_dim(), 1256);
  const auto vocab = answer_vocab();
  const int z = static_cast<int>(vocab.size());
  const auto emb = random_embedding(cfg.embed_dim, 30, 1);
  const int n = 3;
  auto batch = random_batch(cfg, n, 30, z, 2);

  HeadModel yn(HeadKind::kYesNo, cfg, vocab, emb, 3);
  HeadModel ot(HeadKind::kOthers, cfg, vocab, emb, 3);
  auto py = yn.probabilities(batch);
  auto po = ot.probabilities(batch);
  EXPECT_EQ(py.rows(), 2);
  EXPECT_EQ(py.cols(), n);
  EXPECT_EQ(po.rows(), z);
  EXPECT_EQ(po.cols(), n * 11);
  for (Eigen::Index j = 0; j < py.cols(); ++j) EXPECT_NEAR(py.col(j).sum(), 1.0f, 1e-5);
  for (Eigen::Index j = 0; j < po.cols(); ++j) {
    EXPECT_NEAR(po.col(j).sum(), 1.0f, 1e-5);
    EXPECT_GE(po.col(j).minCoeff(), 0.0f);
  }

  auto x = ot.net().embed(batch.ids, emb);
  auto enc = ot.net().encode(x, n, nullptr);
  EXPECT_EQ(enc.rows(), 256);
  EXPECT_EQ(enc.cols(), 21 * n);
  EXPECT_TRUE(enc.allFinite());
  auto preds = ot.predict(batch);
  ASSERT_EQ(preds.size(), static_cast<std::size_t>(n));
  for (const auto& p : preds) {
    EXPECT_EQ(p.step_distributions.size(), 11u);
    EXPECT_EQ(p.step_confidences.size(), 11u);
  }
  for (const auto& p : yn.predict(batch)) EXPECT_TRUE(p.decoded_text == "yes" || p.decoded_text == "no");
}

TEST(Fusion, TilingAndZeroImage) {
  const auto cfg = small_config();
  Rng rng(1);
  FusionModel<float> net(HeadKind::kYesNo, cfg, 2, rng);
  auto batch = random_batch(cfg, 3, 15, 5, 4);
  const auto emb = random_embedding(cfg.embed_dim, 15, 5);
  auto pre = net.prenorm(batch, emb);
  ASSERT_EQ(pre.rows(), cfg.fused_dim());
  for (int t = 0; t < cfg.seq_len; ++t)
    for (int b = 0; b < 3; ++b)
      EXPECT_EQ(pre.col(t * 3 + b).tail(cfg.image_dim), batch.images.col(b));

  batch.images.setZero();
  pre = net.prenorm(batch, emb);
  EXPECT_EQ(pre.bottomRows(cfg.image_dim).cwiseAbs().maxCoeff(), 0.0f);

  EXPECT_THROW(net.tile_concat(pre.topRows(2 * cfg.hidden), Eigen::MatrixXf::Zero(cfg.image_dim + 1, 3)),
               std::invalid_argument);
}

TEST(Fusion, InferenceIsDeterministicAndAffine) {
  const auto cfg = small_config();
  const auto vocab = answer_vocab();
  const auto emb = random_embedding(cfg.embed_dim, 15, 5);
  HeadModel head(HeadKind::kOthers, cfg, vocab, emb, 9);
  auto batch = random_batch(cfg, 4, 15, static_cast<int>(vocab.size()), 6);
  EXPECT_EQ(head.probabilities(batch), head.probabilities(batch));

  Batch blank = batch;
  blank.ids.setZero();
  EXPECT_EQ(head.probabilities(blank), head.probabilities(blank));

  auto& bn = head.net().batch_norm();
  Rng rng(3);
  bn.running_mean = nn::Vec<float>::Random(cfg.fused_dim());
  bn.running_var = nn::Vec<float>::Random(cfg.fused_dim()).cwiseAbs() + nn::Vec<float>::Constant(cfg.fused_dim(), 0.5f);
  M a = M::Random(cfg.fused_dim(), 5), b = M::Random(cfg.fused_dim(), 5);
  const float alpha = 0.3f;
  M lhs = bn.forward_inference(alpha * a + (1 - alpha) * b);
  M rhs = alpha * bn.forward_inference(a) + (1 - alpha) * bn.forward_inference(b);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(Fusion, ZeroWeightOthersHeadIsUniform) {
  const auto cfg = small_config();
  const auto vocab = answer_vocab();
  HeadModel head(HeadKind::kOthers, cfg, vocab, random_embedding(cfg.embed_dim, 15, 5), 1);
  head.net().dense_w_.value.setZero();
  head.net().dense_b_.value.setZero();
  head.net().proj_w_.value.setZero();
  head.net().proj_b_.value.setZero();
  auto p = head.probabilities(random_batch(cfg, 3, 15, static_cast<int>(vocab.size()), 2));
  const float z = static_cast<float>(vocab.size());
  EXPECT_LT((p.array() - 1.0f / z).abs().maxCoeff(), 1e-7f);
}

TEST(Fusion, GradientCheckYesNo) {
  for (double dropout : {0.0, 0.5}) {
    auto r = hqs::testing::gradient_check(HeadKind::kYesNo, 11, dropout);
    EXPECT_GT(r.checked, 400u);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
    EXPECT_NEAR(r.loss, r.reference_loss, 1e-12);
  }
}

TEST(Fusion, GradientCheckOthers) {
  for (double dropout : {0.0, 0.5}) {
    auto r = hqs::testing::gradient_check(HeadKind::kOthers, 12, dropout);
    EXPECT_GT(r.checked, 1000u);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
    EXPECT_NEAR(r.loss, r.reference_loss, 1e-12);
  }
}

TEST(Fusion, HeadTrainingSnapshotsAndCheckpoints) {
  const auto cfg = small_config();
  const auto vocab = answer_vocab();
  HeadModel head(HeadKind::kOthers, cfg, vocab, random_embedding(cfg.embed_dim, 15, 5), 1);
  auto data = random_batch(cfg, 12, 15, static_cast<int>(vocab.size()), 8);

  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 4;
  tc.learning_rate = 1e-2;
  tc.seed = 5;
  int seen = 0;
  tc.on_epoch_model = [&](const EpochLog&, HeadModel&) { ++seen; };
  auto log = head.train(data, tc);
  ASSERT_EQ(log.size(), 30u);
  EXPECT_EQ(seen, 30);
  EXPECT_LT(log.back().loss, log.front().loss);
  for (const auto& e : log) {
    EXPECT_GE(e.categorical_accuracy, 0.0);
    EXPECT_LE(e.categorical_accuracy, 1.0);
  }

  auto snap = head.snapshot();
  const M before = head.probabilities(data);
  head.net().dense_w_.value.setZero();
  EXPECT_NE(head.probabilities(data), before);
  head.restore(snap);
  EXPECT_EQ(head.probabilities(data), before);

  hqs::testing::TempDir tmp;
  head.save(tmp / "head");
  auto loaded = HeadModel::load(tmp / "head");
  EXPECT_EQ(loaded.probabilities(data), before);
  EXPECT_EQ(loaded.answer_vocab(), head.answer_vocab());
  EXPECT_EQ(loaded.config(), head.config());

  EXPECT_THROW(head.train(slice(data, {}), tc), Error);
  EXPECT_THROW(HeadModel::load(tmp / "missing"), IoError);
}

TEST(Fusion, TrainingIsSeedDeterministic) {
  const auto cfg = small_config();
  const auto vocab = answer_vocab();
  auto data = random_batch(cfg, 8, 15, static_cast<int>(vocab.size()), 8);
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 3;
  auto run = [&] {
    HeadModel h(HeadKind::kYesNo, cfg, vocab, random_embedding(cfg.embed_dim, 15, 5), 4);
    h.train(data, tc);
    return h.probabilities(data);
  };
  EXPECT_EQ(run(), run());
}
