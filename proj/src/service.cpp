#include "hqs/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <array>
#include <chrono>

#include "hqs/error.hpp"

namespace hqs::service {

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

Response error(int status, const std::string& message) { return {status, {{"error", message}}}; }

// Bad request content, as opposed to an image that cannot be decoded.
struct BadRequest : Error {
  using Error::Error;
};
struct BadImage : Error {
  using Error::Error;
};

}  // namespace

std::string base64_decode(std::string_view in) {
  std::array<int, 256> rev{};
  rev.fill(-1);
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) rev[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
  // also accept the URL-safe alphabet
  rev['-'] = 62;
  rev['_'] = 63;
  std::string out;
  unsigned buf = 0;
  int bits = 0;
  std::size_t pad = 0;
  for (char ch : in) {
    if (ch == '\n' || ch == '\r' || ch == ' ') continue;
    if (ch == '=') {
      ++pad;
      continue;
    }
    if (pad > 0) throw Error("base64: data after padding");
    const int v = rev[static_cast<unsigned char>(ch)];
    if (v < 0) throw Error("base64: invalid character");
    buf = (buf << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buf >> bits) & 0xFF));
    }
  }
  if (pad > 2 || bits >= 6) throw Error("base64: truncated input");
  return out;
}

std::string base64_encode(std::string_view in) {
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8) |
                       static_cast<unsigned char>(in[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  const std::size_t rest = in.size() - i;
  if (rest > 0) {
    unsigned v = static_cast<unsigned char>(in[i]) << 16;
    if (rest == 2) v |= static_cast<unsigned char>(in[i + 1]) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

InferenceService::InferenceService(ServiceOptions options) : options_(std::move(options)) {}

InferenceService::~InferenceService() { stop(); }

void InferenceService::set_model(std::shared_ptr<const harness::VqaSystem> system,
                                 std::shared_ptr<const vision::Backbone> backbone,
                                 std::shared_ptr<vision::FeatureCache> cache) {
  if (!system || !backbone) throw Error("service needs a system and a backbone");
  if (backbone->tag() != system->backbone_tag)
    throw Error("backbone '" + backbone->tag() + "' does not match the checkpoint's '" + system->backbone_tag + "'");
  system_ = std::move(system);
  backbone_ = std::move(backbone);
  cache_ = std::move(cache);
  ready_.store(true);
}

Response InferenceService::health() const {
  if (!ready()) return {503, {{"status", "loading"}}};
  return {200,
          {{"status", "ok"},
           {"model", system_->model_tag()},
           {"backbone", backbone_->tag()},
           {"mode", std::string(harness::to_string(system_->mode))}}};
}

std::vector<float> InferenceService::resolve_image(const nlohmann::json& req) const {
  if (req.contains("image") && !req["image"].is_null()) {
    if (!req["image"].is_string()) throw BadRequest("'image' must be a base64 string");
    std::string bytes;
    try {
      bytes = base64_decode(req["image"].get<std::string>());
    } catch (const Error& e) {
      throw BadRequest(e.what());
    }
    if (bytes.empty()) throw BadRequest("'image' is empty");
    vision::ImageTensor img;
    try {
      img = vision::decode_and_resize(
          std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), "request");
    } catch (const Error& e) {
      throw BadImage(e.what());
    }
    std::lock_guard lock(extract_mu_);
    return backbone_->extract(img);
  }
  if (req.contains("image_id") && !req["image_id"].is_null()) {
    if (!req["image_id"].is_string()) throw BadRequest("'image_id' must be a string");
    const auto id = req["image_id"].get<std::string>();
    if (!cache_) throw BadImage("no feature cache configured for image_id lookups");
    for (const auto& key : {id, "RAD/" + id, "CLEF18/" + id})
      if (auto f = cache_->get(key, backbone_->tag())) return std::move(f->vector);
    throw BadImage("no cached features for image_id '" + id + "'");
  }
  throw BadRequest("request needs 'image' (base64) or 'image_id'");
}

Response InferenceService::ask(const std::string& body) const {
  const auto t0 = std::chrono::steady_clock::now();
  if (!ready()) return error(503, "model is loading");
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error(400, "body is not valid JSON");
  }
  if (!req.is_object()) return error(400, "body must be a JSON object");
  if (!req.contains("question") || !req["question"].is_string()) return error(400, "'question' must be a string");
  const auto question = req["question"].get<std::string>();
  if (question.find_first_not_of(" \t\r\n") == std::string::npos) return error(400, "'question' is empty");
  std::vector<float> image;
  try {
    image = resolve_image(req);
  } catch (const BadRequest& e) {
    return error(400, e.what());
  } catch (const BadImage& e) {
    return error(422, e.what());
  }
  try {
    const auto pred = system_->answer({harness::Query{question, std::move(image)}}).at(0);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {200,
            {{"answer", pred.decoded_text},
             {"qtype", std::string(corpus::to_string(pred.qtype))},
             {"margin", pred.margin},
             {"step_confidences", pred.step_confidences},
             {"latency_ms", ms}}};
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

int InferenceService::start() {
  if (server_) throw Error("service already started");
  server_ = std::make_unique<httplib::Server>();
  const auto workers = options_.workers, queue = options_.max_queue;
  server_->new_task_queue = [workers, queue] { return new httplib::ThreadPool(workers, queue); };
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
  server_->Post("/v1/ask",
                [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, ask(req.body)); });
  int port = options_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(options_.host);
  } else if (!server_->bind_to_port(options_.host, port)) {
    port = -1;
  }
  if (port < 0) {
    server_.reset();
    throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("serving on http://{}:{}", options_.host, port);
  return port;
}

void InferenceService::wait() {
  if (thread_.joinable()) thread_.join();
}

void InferenceService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace hqs::service
