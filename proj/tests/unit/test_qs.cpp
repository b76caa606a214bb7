#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "hqs/corpus.hpp"
#include "hqs/error.hpp"
#include "hqs/pipeline.hpp"
#include "hqs/qs.hpp"
#include "hqs/random.hpp"
#include "test_support.hpp"

using namespace hqs;
using namespace hqs::qs;
using corpus::QType;

namespace {

const std::vector<std::string> kIds = default_identifier_words();

std::size_t slot(const std::string& w) {
  return static_cast<std::size_t>(std::find(kIds.begin(), kIds.end(), w) - kIds.begin());
}

corpus::Dataset rad_train() {
  auto cfg = hqs::testing::surrogate_config("rad");
  return corpus::load_dataset(cfg.rad_train, corpus::Format::kRadJson, corpus::Split::kTrain).dataset;
}

const QsModel& trained_rad_model() {
  static const QsModel m = train_qs(rad_train(), QsConfig{});
  return m;
}

}  // namespace

TEST(Qs, IdentifierWords) {
  ASSERT_EQ(kIds.size(), 10u);
  auto bits = identifier_vector(qs_tokens("Is the spleen present?"), kIds);
  for (std::size_t i = 0; i < bits.size(); ++i) EXPECT_EQ(bits[i], i == slot("is") ? 1.0 : 0.0) << kIds[i];

  EXPECT_EQ(identifier_vector(qs_tokens(""), kIds), std::vector<double>(10, 0.0));

  auto b = identifier_vector(qs_tokens("what type is there"), kIds);
  for (const char* w : {"what", "type", "is", "there"}) EXPECT_EQ(b[slot(w)], 1.0) << w;
  EXPECT_EQ(std::accumulate(b.begin(), b.end(), 0.0), 4.0);
}

TEST(Qs, TfIdf) {
  std::vector<std::vector<std::string>> qs{{"is", "there", "mass"}, {"is", "it", "ct"}};
  auto stats = CorpusStats::build(qs);
  EXPECT_EQ(stats.idf("is"), 0.0);
  EXPECT_EQ(tfidf("is", qs[0], stats), 0.0);
  EXPECT_EQ(tfidf("ct", qs[0], stats), 0.0);
  EXPECT_EQ(tfidf("unseen", qs[0], stats), 0.0);
  EXPECT_DOUBLE_EQ(tfidf("mass", qs[0], stats), std::log(2.0) / 3.0);

  auto s2 = CorpusStats::build({{"a", "b"}, {"c"}});
  EXPECT_NEAR(tfidf("a", {"a", "b"}, s2), 0.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(tfidf("a", {"a", "b"}, s2), 0.3466, 1e-4);

  // summed-tf mode counts repeated occurrences in the denominator
  auto st = CorpusStats::build({{"a", "a"}, {"b"}, {"c"}, {"d"}}, IdfMode::kSummedTf);
  EXPECT_DOUBLE_EQ(st.idf("a"), std::log(4.0 / 2.0));
}

TEST(Qs, TopWordsMatchBruteForce) {
  std::vector<std::vector<std::string>> qs{
      {"what", "is", "the", "mass"}, {"is", "there", "a", "cyst"}, {"where", "is", "the", "cyst"}, {"ct"}, {"mri", "or", "ct"}};
  auto stats = CorpusStats::build(qs);
  // independent scan: best value per word, then sort by (-value, word)
  std::map<std::string, double> best;
  for (const auto& q : qs)
    for (const auto& w : q) {
      double df = 0;
      for (const auto& o : qs) df += std::find(o.begin(), o.end(), w) != o.end();
      const double tf = static_cast<double>(std::count(q.begin(), q.end(), w)) / static_cast<double>(q.size());
      best[w] = std::max(best[w], tf * std::log(static_cast<double>(qs.size()) / df));
    }
  std::vector<std::pair<double, std::string>> order;
  for (auto& [w, v] : best) order.push_back({-v, w});
  std::sort(order.begin(), order.end());
  auto top = top_tfidf_words(qs, stats, 6);
  ASSERT_EQ(top.size(), 6u);
  for (std::size_t i = 0; i < top.size(); ++i) EXPECT_EQ(top[i], order[i].second) << i;
}

TEST(Qs, Hinge) {
  EXPECT_EQ(hinge_loss(1, 2.0), 0.0);
  EXPECT_EQ(hinge_loss(1, 0.25), 0.75);
  EXPECT_EQ(hinge_loss(-1, 0.5), 1.5);
  EXPECT_EQ(hinge_loss(-1, -1.0), 0.0);
}

TEST(Qs, SvmSeparableToyAndErrors) {
  std::vector<std::vector<double>> x{{1.0, 0.0}, {0.0, 1.0}};
  std::vector<int> y{1, -1};
  auto m = train_svm(x, y, {});
  EXPECT_GT(m.decision(x[0]), 0.0);
  EXPECT_LT(m.decision(x[1]), 0.0);
  EXPECT_THROW(train_svm(x, {1, 1}, {}), Error);
  EXPECT_THROW(train_svm({}, {}, {}), Error);
  EXPECT_THROW(train_svm(x, {1, 0}, {}), Error);
  EXPECT_THROW(train_svm(x, {1}, {}), Error);
}

TEST(Qs, SingleClassTrainingSetIsRejected) {
  corpus::QAItem it{"1", "i", "p", "is it?", "yes", QType::kUnknown, corpus::Source::kRad};
  EXPECT_THROW(train_qs(corpus::Dataset("d", corpus::Split::kTrain, {it, it}), QsConfig{}), Error);
}

TEST(Qs, SmallVocabularyIsPaddedToFixedWidth) {
  std::vector<corpus::QAItem> items{
      {"1", "i", "p", "is it normal?", "yes", QType::kUnknown, corpus::Source::kRad},
      {"2", "i", "p", "what organ is shown?", "lung", QType::kUnknown, corpus::Source::kRad}};
  const auto m = train_qs(corpus::Dataset("d", corpus::Split::kTrain, items), QsConfig{});
  ASSERT_EQ(m.tfidf_words.size(), 500u);
  ASSERT_EQ(m.idf_values.size(), 500u);
  std::size_t real = 0;
  for (std::size_t j = 0; j < 500; ++j) {
    if (m.tfidf_words[j].empty()) {
      EXPECT_EQ(m.idf_values[j], 0.0);
    } else {
      EXPECT_EQ(real, j) << "padding precedes a real word";
      ++real;
    }
  }
  EXPECT_EQ(real, 6u);  // is it normal what organ shown
  const auto v = m.featurize("what organ is shown?");
  ASSERT_EQ(v.size(), 510u);
  for (std::size_t j = 10 + real; j < v.size(); ++j) EXPECT_EQ(v[j], 0.0);
  EXPECT_EQ(QsModel::from_json(m.to_json()).featurize("is it normal?"), m.featurize("is it normal?"));
}

TEST(Qs, FeatureLengthAndZeroCase) {
  const auto& m = trained_rad_model();
  ASSERT_EQ(m.identifier_words.size(), 10u);
  ASSERT_EQ(m.tfidf_words.size(), 500u);
  EXPECT_EQ(m.feature_dim(), 510u);
  for (const char* q : {"", "Is the spleen present?", "zzz qqq", "What is the modality of this image?"}) {
    auto v = m.featurize(q);
    ASSERT_EQ(v.size(), 510u) << q;
    for (std::size_t i = 0; i < 10; ++i) EXPECT_TRUE(v[i] == 0.0 || v[i] == 1.0);
    for (std::size_t i = 10; i < v.size(); ++i) EXPECT_GE(v[i], 0.0);
    EXPECT_EQ(v, m.featurize(q));
  }
  auto z = m.featurize("zzz qqq");
  EXPECT_TRUE(std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; }));
  EXPECT_EQ(m.predict("zzz qqq").qtype, m.bias >= 0 ? QType::kYesNo : QType::kOthers);
  EXPECT_EQ(m.predict("zzz qqq").margin, m.bias);
}

TEST(Qs, ZeroVectorFollowsBiasSign) {
  QsModel m = trained_rad_model();
  const std::vector<double> zero(m.feature_dim(), 0.0);
  m.bias = 0.3;
  EXPECT_EQ(m.predict_features(zero).qtype, QType::kYesNo);
  m.bias = -0.3;
  EXPECT_EQ(m.predict_features(zero).qtype, QType::kOthers);
  m.bias = 0.0;
  EXPECT_EQ(m.predict_features(zero).qtype, QType::kYesNo);
}

TEST(Qs, PositiveScalingLeavesDecisionsUnchanged) {
  const auto& base = trained_rad_model();
  const auto ds = rad_train();
  Rng rng(5);
  for (double k : {1e-3, 0.5, 7.0, 1e4}) {
    QsModel s = base;
    for (auto& w : s.weights) w *= k;
    s.bias *= k;
    for (int i = 0; i < 200; ++i) {
      const auto& q = ds[rng.below(ds.size())].question;
      EXPECT_EQ(s.predict(q).qtype, base.predict(q).qtype) << q;
    }
  }
}

TEST(Qs, TrainingIsDeterministicAndSerializable) {
  const auto ds = rad_train();
  auto a = train_qs(ds, QsConfig{});
  auto b = train_qs(ds, QsConfig{});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  hqs::testing::TempDir tmp;
  a.save(tmp / "qs.json");
  auto c = QsModel::load(tmp / "qs.json");
  EXPECT_EQ(c.to_json().dump(), a.to_json().dump());
  EXPECT_THROW(QsModel::load(tmp / "nope.json"), IoError);
}

TEST(Qs, SurrogateQuestionsFromTheRoutingIllustration) {
  const auto& m = trained_rad_model();
  EXPECT_EQ(m.predict("Evidence of hemorrhage in the kidneys?").qtype, QType::kOthers);
  EXPECT_EQ(m.predict("Is the spleen present?").qtype, QType::kYesNo);
}

TEST(Qs, RadTestScores) {
  auto cfg = hqs::testing::surrogate_config("rad");
  auto test = corpus::load_dataset(cfg.rad_test, corpus::Format::kRadJson, corpus::Split::kTest).dataset;
  auto ev = harness::evaluate_qs(trained_rad_model(), test);
  EXPECT_EQ(ev.count, 451u);
  EXPECT_GE(ev.prf.macro_p, 0.95);
  EXPECT_GE(ev.prf.macro_r, 0.95);
  EXPECT_GE(ev.prf.macro_f1, 0.95);
}
