#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "hqs/pipeline.hpp"
#include "hqs/vision.hpp"

namespace httplib {
class Server;
}

namespace hqs::service {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t workers = 4;
  std::size_t max_queue = 64;  // further requests are refused with 503
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

std::string base64_decode(std::string_view in);  // throws Error on bad input
std::string base64_encode(std::string_view in);

// Handles /v1/health and /v1/ask. Until set_model is called every request
// answers 503. The model is never mutated once installed.
class InferenceService {
 public:
  explicit InferenceService(ServiceOptions options = {});
  ~InferenceService();
  InferenceService(const InferenceService&) = delete;
  InferenceService& operator=(const InferenceService&) = delete;

  // Throws if the backbone tag differs from the one the system was trained on.
  void set_model(std::shared_ptr<const harness::VqaSystem> system, std::shared_ptr<const vision::Backbone> backbone,
                 std::shared_ptr<vision::FeatureCache> cache = nullptr);
  bool ready() const { return ready_.load(); }

  Response health() const;
  Response ask(const std::string& body) const;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();

 private:
  std::vector<float> resolve_image(const nlohmann::json& req) const;

  ServiceOptions options_;
  std::shared_ptr<const harness::VqaSystem> system_;
  std::shared_ptr<const vision::Backbone> backbone_;
  std::shared_ptr<vision::FeatureCache> cache_;
  std::atomic<bool> ready_{false};
  mutable std::mutex extract_mu_;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace hqs::service
