#include <gtest/gtest.h>

#include <json.hpp>

#include "test_support.hpp"

using hqs::testing::read_file;
using hqs::testing::run_cli;
using hqs::testing::TempDir;
using hqs::testing::write_file;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const char* kTiny =
    " --set text.word_dim=8 --set text.subword_dim=8 --set text.subword_buckets=2000 --set text.subword_epochs=1"
    " --set net.hidden=8 --set net.step_hidden=8 --set train.epochs=1 --set qs.epochs=2";

}  // namespace

TEST(Cli, MakeSurrogateIsReproducible) {
  TempDir tmp;
  const auto small = " --rad-train 40 --rad-test 10 --rad-images 12 --clef-train 30 --clef-val 8 --clef-test 8";
  auto a = run_cli("-q make-surrogate --out " + q(tmp / "a") + small);
  auto b = run_cli("-q make-surrogate --out " + q(tmp / "b") + small);
  ASSERT_EQ(a.status, 0) << a.err;
  ASSERT_EQ(b.status, 0) << b.err;
  EXPECT_EQ(read_file(tmp / "a/rad/train.json"), read_file(tmp / "b/rad/train.json"));
  EXPECT_EQ(read_file(tmp / "a/clef18/train.txt"), read_file(tmp / "b/clef18/train.txt"));
  for (auto name : {"rad.conf", "clef18.conf", "combined.conf"}) EXPECT_TRUE(fs::exists(tmp / "a" / name)) << name;
  EXPECT_FALSE(fs::exists(tmp / "a.partial"));
}

TEST(Cli, EvaluateIdenticalPredictions) {
  TempDir tmp;
  write_file(tmp / "refs.jsonl",
             "{\"qa_id\":\"1\",\"answer\":\"yes\"}\n{\"qa_id\":\"2\",\"answer\":\"mass in the left lung\"}\n"
             "{\"qa_id\":\"3\",\"answer\":\"axial ct\"}\n");
  write_file(tmp / "preds.jsonl",
             "{\"qa_id\":\"3\",\"prediction\":\"axial ct\"}\n{\"qa_id\":\"1\",\"prediction\":\"yes\"}\n"
             "{\"qa_id\":\"2\",\"prediction\":\"mass in the left lung\"}\n");
  const auto r = run_cli("-q evaluate --predictions " + q(tmp / "preds.jsonl") + " --references " +
                         q(tmp / "refs.jsonl") + " --out " + q(tmp / "eval.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(read_file(tmp / "eval.json"));
  EXPECT_DOUBLE_EQ(j.at("overall").at("bleu").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j.at("overall").at("accuracy").get<double>(), 1.0);
  EXPECT_EQ(j.at("overall").at("count").get<int>(), 3);
  EXPECT_TRUE(fs::exists(tmp / "eval.predictions.jsonl"));
  EXPECT_NE(r.out.find("Overall"), std::string::npos);
}

TEST(Cli, ErrorsAreJsonWithExitCodes) {
  TempDir tmp;
  write_file(tmp / "bad.conf", "seed = 1\ntrain.epochs = many\n");
  auto r = run_cli("-q train-qs --config " + q(tmp / "bad.conf") + " --out " + q(tmp / "qs.json"));
  EXPECT_EQ(r.status, 2);
  auto err = json::parse(r.err.substr(r.err.find('{')));
  EXPECT_EQ(err.at("error").at("type"), "ParseError");
  EXPECT_FALSE(fs::exists(tmp / "qs.json"));

  r = run_cli("-q error-report --annotations /no/such/file.jsonl");
  EXPECT_EQ(r.status, 3);
  EXPECT_EQ(json::parse(r.err.substr(r.err.find('{'))).at("error").at("type"), "IoError");

  write_file(tmp / "preds.jsonl", "{\"qa_id\":\"9\",\"prediction\":\"yes\"}\n");
  write_file(tmp / "refs.jsonl", "{\"qa_id\":\"1\",\"answer\":\"yes\"}\n");
  r = run_cli("-q evaluate --predictions " + q(tmp / "preds.jsonl") + " --references " + q(tmp / "refs.jsonl") +
              " --out " + q(tmp / "eval.json"));
  EXPECT_EQ(r.status, 1);
  EXPECT_FALSE(fs::exists(tmp / "eval.json"));
  EXPECT_FALSE(fs::exists(tmp / "eval.json.partial"));

  EXPECT_NE(run_cli("no-such-command").status, 0);
}

TEST(Cli, ErrorReportMatchesFixture) {
  TempDir tmp;
  const auto r = run_cli("-q error-report --annotations " + q(hqs::testing::data_dir() / "error_annotations.jsonl") +
                         " --out " + q(tmp / "report.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(read_file(tmp / "report.json"));
  EXPECT_EQ(j.at("total").get<int>(), 1772);
  EXPECT_DOUBLE_EQ(j.at("categories").at("MISCELLANEOUS").at("percent").get<double>(), 28.33);
}

TEST(Cli, TrainEvaluatePredict) {
  TempDir tmp;
  const auto conf = hqs::testing::surrogate_dir() / "rad.conf";
  auto r = run_cli("-q train-vqa --config " + q(conf) + kTiny + " --out " + q(tmp / "ckpt"));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(tmp / "ckpt/training_log.jsonl"));

  r = run_cli("-q evaluate --checkpoint " + q(tmp / "ckpt") + " --out " + q(tmp / "eval.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(read_file(tmp / "eval.json"));
  EXPECT_EQ(j.at("overall").at("count").get<int>(), 451);
  EXPECT_EQ(j.at("meta").at("model"), "hqs-vqa/WITH_QS/seed-42");

  const auto image = hqs::testing::surrogate_dir() / "rad/images";
  fs::path first;
  for (const auto& e : fs::directory_iterator(image)) {
    first = e.path();
    break;
  }
  r = run_cli("-q predict --checkpoint " + q(tmp / "ckpt") + " --question 'Is there a mass?' --image " + q(first));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto p = json::parse(r.out);
  EXPECT_TRUE(p.at("answer") == "yes" || p.at("answer") == "no") << p.dump();

  r = run_cli("-q predict --checkpoint " + q(tmp / "ckpt") + " --question 'what?'");
  EXPECT_EQ(r.status, 1);
}
