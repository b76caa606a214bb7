#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "hqs/error.hpp"
#include "hqs/pipeline.hpp"
#include "hqs/service.hpp"
#include "test_support.hpp"

// after Eigen: <resolv.h> defines _res
#include <httplib.h>

using namespace hqs;
using namespace hqs::service;
using nlohmann::json;

namespace {

struct Model {
  std::shared_ptr<const harness::VqaSystem> system;
  std::shared_ptr<const vision::Backbone> backbone;
  std::shared_ptr<vision::FeatureCache> cache;
  std::string image_path;
  std::string image_id;
};

const Model& model() {
  static const Model m = [] {
    auto cfg = hqs::testing::surrogate_config("rad");
    for (auto [k, v] : {std::pair{"text.word_dim", "8"}, {"text.subword_dim", "8"}, {"text.subword_buckets", "2000"},
                        {"text.subword_epochs", "1"}, {"net.hidden", "8"}, {"net.step_hidden", "8"},
                        {"train.epochs", "2"}, {"qs.epochs", "3"}})
      cfg.set(k, v);
    const auto train = corpus::head(harness::load_splits(cfg).train, 200);
    Model x;
    x.backbone = vision::make_backbone(cfg.backbone);
    x.cache = std::make_shared<vision::FeatureCache>(vision::FeatureCache::root_from_env(cfg.cache_dir));
    const auto features = harness::build_features({&train}, *x.backbone, x.cache.get());
    x.system = std::make_shared<harness::VqaSystem>(harness::train_vqa(cfg, train, features, x.backbone->tag()).system);
    x.image_path = train[0].image_path;
    x.image_id = train[0].image_id;
    return x;
  }();
  return m;
}

std::string image_b64() { return base64_encode(hqs::testing::read_file(model().image_path)); }

}  // namespace

TEST(Base64, RoundTripAndErrors) {
  for (const std::string& s : std::vector<std::string>{"", "a", "ab", "abc", "abcd", std::string("\0\xff\x10", 3)})
    EXPECT_EQ(base64_decode(base64_encode(s)), s);
  EXPECT_EQ(base64_encode("Man"), "TWFu");
  EXPECT_EQ(base64_encode("Ma"), "TWE=");
  EXPECT_EQ(base64_decode("TW\nFu"), "Man");
  EXPECT_THROW(base64_decode("TW$u"), Error);
  EXPECT_THROW(base64_decode("TWE=x"), Error);
  EXPECT_THROW(base64_decode("T"), Error);
}

TEST(Service, LoadingThenReady) {
  InferenceService svc;
  EXPECT_EQ(svc.health().status, 503);
  EXPECT_EQ(svc.ask(R"({"question":"is this a ct?"})").status, 503);
  const auto& m = model();
  svc.set_model(m.system, m.backbone, m.cache);
  const auto h = svc.health();
  EXPECT_EQ(h.status, 200);
  EXPECT_EQ(h.body.at("status"), "ok");
  EXPECT_EQ(h.body.at("model"), m.system->model_tag());
  EXPECT_EQ(h.body.at("mode"), "WITH_QS");
}

TEST(Service, RejectsMismatchedBackbone) {
  InferenceService svc;
  const auto& m = model();
  std::shared_ptr<const vision::Backbone> other = vision::make_backbone("random:999");
  EXPECT_THROW(svc.set_model(m.system, other), Error);
  EXPECT_FALSE(svc.ready());
}

TEST(Service, BadRequests) {
  InferenceService svc;
  const auto& m = model();
  svc.set_model(m.system, m.backbone, m.cache);
  EXPECT_EQ(svc.ask("not json").status, 400);
  EXPECT_EQ(svc.ask("[1,2]").status, 400);
  EXPECT_EQ(svc.ask(R"({"image_id":"x"})").status, 400);
  EXPECT_EQ(svc.ask(R"({"question":"   ","image_id":"x"})").status, 400);
  EXPECT_EQ(svc.ask(R"({"question":"what organ?"})").status, 400);
  EXPECT_EQ(svc.ask(R"({"question":"what organ?","image":"@@@"})").status, 400);
  EXPECT_EQ(svc.ask(R"({"question":"what organ?","image":""})").status, 400);
  EXPECT_EQ(svc.ask(R"({"question":"what organ?","image_id":5})").status, 400);
  const auto junk = json{{"question", "what organ?"}, {"image", base64_encode("definitely not an image")}};
  const auto r = svc.ask(junk.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(r.body.contains("error"));
  EXPECT_EQ(svc.ask(R"({"question":"what organ?","image_id":"no-such-image"})").status, 422);
}

TEST(Service, AnswersByImageAndById) {
  InferenceService svc;
  const auto& m = model();
  svc.set_model(m.system, m.backbone, m.cache);
  const auto by_image = svc.ask(json{{"question", "Is there a mass?"}, {"image", image_b64()}}.dump());
  ASSERT_EQ(by_image.status, 200) << by_image.body.dump();
  EXPECT_EQ(by_image.body.at("qtype"), "YES_NO");
  const auto a = by_image.body.at("answer").get<std::string>();
  EXPECT_TRUE(a == "yes" || a == "no") << a;
  EXPECT_GE(by_image.body.at("latency_ms").get<double>(), 0.0);

  const auto by_id = svc.ask(json{{"question", "Is there a mass?"}, {"image_id", m.image_id}}.dump());
  ASSERT_EQ(by_id.status, 200) << by_id.body.dump();
  EXPECT_EQ(by_id.body.at("answer"), by_image.body.at("answer"));
  EXPECT_DOUBLE_EQ(by_id.body.at("margin").get<double>(), by_image.body.at("margin").get<double>());

  const auto others = svc.ask(json{{"question", "What organ is shown?"}, {"image_id", m.image_id}}.dump());
  ASSERT_EQ(others.status, 200);
  EXPECT_EQ(others.body.at("qtype"), "OTHERS");
  EXPECT_EQ(others.body.at("step_confidences").size(), 11u);
}

TEST(Service, ConcurrentRequestsAgree) {
  InferenceService svc;
  const auto& m = model();
  svc.set_model(m.system, m.backbone, m.cache);
  const auto body = json{{"question", "What organ is shown?"}, {"image", image_b64()}}.dump();
  const auto expected = svc.ask(body).body.at("answer");
  std::vector<std::future<Response>> futs;
  for (int i = 0; i < 8; ++i) futs.push_back(std::async(std::launch::async, [&] { return svc.ask(body); }));
  for (auto& f : futs) {
    const auto r = f.get();
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body.at("answer"), expected);
  }
}

TEST(Service, OverHttp) {
  ServiceOptions opts;
  opts.port = 0;
  InferenceService svc(opts);
  const int port = svc.start();
  ASSERT_GT(port, 0);
  httplib::Client cli("127.0.0.1", port);
  auto h = cli.Get("/v1/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 503);

  const auto& m = model();
  svc.set_model(m.system, m.backbone, m.cache);
  h = cli.Get("/v1/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(json::parse(h->body).at("status"), "ok");

  auto r = cli.Post("/v1/ask", json{{"question", "Is the lung normal?"}, {"image", image_b64()}}.dump(),
                    "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto body = json::parse(r->body);
  EXPECT_TRUE(body.at("answer") == "yes" || body.at("answer") == "no");

  r = cli.Post("/v1/ask", "{", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  svc.stop();
}
