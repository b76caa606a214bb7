#include <gtest/gtest.h>

#include "hqs/config.hpp"
#include "hqs/error.hpp"
#include "test_support.hpp"

using namespace hqs;
using namespace hqs::harness;

TEST(Config, DefaultsFollowTheModelDescription) {
  RunConfig c;
  EXPECT_EQ(c.net.seq_len, 21);
  EXPECT_EQ(c.net.answer_len, 11);
  EXPECT_EQ(c.net.hidden, 128);
  EXPECT_EQ(c.net.embed_dim, 600);
  EXPECT_EQ(c.net.image_dim, 1000);
  EXPECT_EQ(c.net.fused_dim(), 1256);
  EXPECT_DOUBLE_EQ(c.net.dropout, 0.5);
  EXPECT_EQ(c.question_vocab_size, 1050u);
  EXPECT_EQ(c.epochs, 251);
  EXPECT_EQ(c.batch_size, 256);
  EXPECT_EQ(c.qs.tfidf_words, 500u);
  EXPECT_EQ(c.qs.identifier_words.size(), 10u);
  EXPECT_EQ(c.select, "final");
}

TEST(Config, TextRoundTrip) {
  RunConfig c;
  c.seed = 99;
  c.mode = Mode::kWithoutQs;
  c.dataset = DatasetChoice::kCombined;
  c.rad_train = "/data/rad train.json";
  c.clef_delimiter = '|';
  c.net.hidden = 17;
  c.learning_rate = 3.5e-4;
  c.qs.identifier_words = {"is", "what"};
  c.select = "best_val_bleu";
  auto back = RunConfig::parse(c.to_text());
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.net.hidden, 17);
  EXPECT_EQ(back.clef_delimiter, '|');
  EXPECT_EQ(back.qs.identifier_words, (std::vector<std::string>{"is", "what"}));

  hqs::testing::TempDir tmp;
  c.save(tmp / "run.conf");
  EXPECT_EQ(RunConfig::load(tmp / "run.conf"), c);

  RunConfig d;
  EXPECT_EQ(RunConfig::parse(d.to_text()), d);
  for (const auto& k : RunConfig::keys()) EXPECT_NE(d.to_text().find(k + " = "), std::string::npos) << k;
}

TEST(Config, CommentsBlanksAndPartialFiles) {
  auto c = RunConfig::parse("# comment\n\n  seed = 7  \ntrain.epochs = 3 # trailing\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.batch_size, 256);
}

TEST(Config, Errors) {
  EXPECT_THROW(RunConfig::parse("no_such_key = 1\n"), Error);
  EXPECT_THROW(RunConfig::parse("seed = abc\n"), Error);
  EXPECT_THROW(RunConfig::parse("mode = SOMETIMES\n"), Error);
  EXPECT_THROW(RunConfig::parse("seed\n"), Error);
  EXPECT_THROW(RunConfig::load("/no/such/run.conf"), IoError);
  try {
    RunConfig::parse("seed = 1\ntrain.epochs = x\n", "run.conf");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  RunConfig c;
  EXPECT_THROW(c.set("train.select", "sometimes"), Error);
  EXPECT_EQ(c.select, "final");
  EXPECT_THROW(c.set("seed", "x"), Error);
  EXPECT_EQ(c.seed, RunConfig{}.seed);
  c.set("train.epochs", "12");
  EXPECT_EQ(c.epochs, 12);
}

TEST(Config, EnumNames) {
  EXPECT_EQ(parse_mode(to_string(Mode::kWithQs)), Mode::kWithQs);
  EXPECT_EQ(parse_mode("WITHOUT_QS"), Mode::kWithoutQs);
  EXPECT_EQ(parse_dataset("clef18"), DatasetChoice::kClef18);
  EXPECT_THROW(parse_dataset("mimic"), Error);
}
