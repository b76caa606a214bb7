#include "hqs/vision.hpp"

#include <spdlog/spdlog.h>

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hqs/error.hpp"
#include "hqs/random.hpp"

namespace hqs::vision {

namespace fs = std::filesystem;

std::vector<float> ImageTensor::normalized() const {
  std::vector<float> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = static_cast<float>(pixels[i]) / 127.5f - 1.0f;
  return out;
}

ImageTensor from_mat(const cv::Mat& src) {
  if (src.empty()) throw IoError("empty image");
  cv::Mat img = src;
  if (img.depth() == CV_16U) img.convertTo(img, CV_8U, 1.0 / 256.0);
  else if (img.depth() != CV_8U) img.convertTo(img, CV_8U);
  cv::Mat rgb;
  switch (img.channels()) {
    case 1: cv::cvtColor(img, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(img, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(img, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw IoError("unsupported channel count " + std::to_string(img.channels()));
  }
  if (rgb.rows != kInputSize || rgb.cols != kInputSize) {
    cv::Mat resized;
    cv::resize(rgb, resized, cv::Size(kInputSize, kInputSize), 0, 0, cv::INTER_LINEAR);
    rgb = resized;
  }
  if (!rgb.isContinuous()) rgb = rgb.clone();
  ImageTensor t;
  t.height = rgb.rows;
  t.width = rgb.cols;
  t.pixels.assign(rgb.data, rgb.data + rgb.total() * 3);
  return t;
}

ImageTensor decode_and_resize(std::span<const std::uint8_t> encoded, const std::string& label) {
  if (encoded.empty()) throw IoError("cannot decode image " + label + ": no data");
  cv::Mat buf(1, static_cast<int>(encoded.size()), CV_8U, const_cast<std::uint8_t*>(encoded.data()));
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw IoError("cannot decode image " + label);
  return from_mat(img);
}

ImageTensor load_and_resize(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_and_resize(bytes, path.string());
}

RandomFeatureBackbone::RandomFeatureBackbone(std::uint64_t seed) : seed_(seed) {
  Rng rng(derive_seed(seed, "random-feature-backbone"));
  const int per = kKernel * kKernel * 3;
  filters_.resize(static_cast<std::size_t>(kFilters * per));
  for (int f = 0; f < kFilters; ++f) {
    double mean = 0;
    for (int i = 0; i < per; ++i) {
      filters_[static_cast<std::size_t>(f * per + i)] = static_cast<float>(rng.normal());
      mean += filters_[static_cast<std::size_t>(f * per + i)];
    }
    mean /= per;
    double norm = 0;
    for (int i = 0; i < per; ++i) {
      auto& w = filters_[static_cast<std::size_t>(f * per + i)];
      w = static_cast<float>(w - mean);
      norm += static_cast<double>(w) * w;
    }
    norm = std::sqrt(norm);
    for (int i = 0; i < per; ++i) filters_[static_cast<std::size_t>(f * per + i)] /= static_cast<float>(norm);
  }
  descriptor_dim_ = static_cast<std::size_t>(kFilters * kGrid * kGrid + 6 + kHistBins);
  projection_.resize(kFeatureDim * descriptor_dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(descriptor_dim_));
  for (auto& p : projection_) p = static_cast<float>(rng.normal() * scale);
}

std::string RandomFeatureBackbone::tag() const { return "random-conv-v1/seed-" + std::to_string(seed_); }

std::vector<float> RandomFeatureBackbone::extract(const ImageTensor& image) const {
  if (image.height <= 0 || image.width <= 0) throw Error("empty image tensor");
  auto norm = image.normalized();
  cv::Mat full(image.height, image.width, CV_32FC3, norm.data());
  cv::Mat small;
  constexpr int kSmall = 75;
  cv::resize(full, small, cv::Size(kSmall, kSmall), 0, 0, cv::INTER_AREA);

  const int out = (kSmall - kKernel) / 2 + 1;
  const int cell = out / kGrid;
  std::vector<double> desc;
  desc.reserve(descriptor_dim_);
  std::vector<double> pooled(static_cast<std::size_t>(kFilters * kGrid * kGrid), 0.0);
  const int per = kKernel * kKernel * 3;
  for (int f = 0; f < kFilters; ++f) {
    const float* w = &filters_[static_cast<std::size_t>(f * per)];
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        double acc = 0;
        for (int ky = 0; ky < kKernel; ++ky) {
          const auto* row = small.ptr<cv::Vec3f>(oy * 2 + ky);
          for (int kx = 0; kx < kKernel; ++kx) {
            const auto& px = row[ox * 2 + kx];
            const float* wk = w + (ky * kKernel + kx) * 3;
            acc += wk[0] * px[0] + wk[1] * px[1] + wk[2] * px[2];
          }
        }
        int gy = std::min(oy / cell, kGrid - 1), gx = std::min(ox / cell, kGrid - 1);
        pooled[static_cast<std::size_t>((f * kGrid + gy) * kGrid + gx)] += std::max(0.0, acc);
      }
    }
  }
  const double cells = static_cast<double>(out * out) / (kGrid * kGrid);
  for (auto v : pooled) desc.push_back(v / cells);

  cv::Scalar mean, stddev;
  cv::meanStdDev(full, mean, stddev);
  for (int c = 0; c < 3; ++c) desc.push_back(mean[c]);
  for (int c = 0; c < 3; ++c) desc.push_back(stddev[c]);

  std::vector<double> hist(kHistBins, 0.0);
  const std::size_t npx = static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width);
  for (std::size_t i = 0; i < npx; ++i) {
    double g = (image.pixels[i * 3] + image.pixels[i * 3 + 1] + image.pixels[i * 3 + 2]) / 3.0;
    auto b = std::min(kHistBins - 1, static_cast<int>(g / 256.0 * kHistBins));
    hist[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto h : hist) desc.push_back(h / static_cast<double>(npx) * kHistBins);

  std::vector<float> feat(kFeatureDim, 0.0f);
  for (std::size_t o = 0; o < kFeatureDim; ++o) {
    double acc = 0;
    const float* p = &projection_[o * descriptor_dim_];
    for (std::size_t i = 0; i < descriptor_dim_; ++i) acc += p[i] * desc[i];
    feat[o] = static_cast<float>(acc);
  }
  return feat;
}

OnnxBackbone::OnnxBackbone(const fs::path& model, std::string tag, TensorLayout layout)
    : tag_(std::move(tag)), layout_(layout) {
  if (!fs::is_regular_file(model))
    throw IoError("backbone weights not found at " + model.string() +
                  "; export an ImageNet classifier (e.g. Inception-ResNet-v2) to ONNX and pass "
                  "--backbone onnx:<path>");
  try {
    net_ = cv::dnn::readNetFromONNX(model.string());
  } catch (const cv::Exception& e) {
    throw IoError("cannot load backbone " + model.string() + ": " + e.what());
  }
  if (net_.empty()) throw IoError("cannot load backbone " + model.string());
}

std::vector<float> OnnxBackbone::extract(const ImageTensor& image) const {
  auto x = image.normalized();
  const int h = image.height, w = image.width;
  cv::Mat blob;
  if (layout_ == TensorLayout::kNhwc) {
    int dims[] = {1, h, w, 3};
    blob = cv::Mat(4, dims, CV_32F, x.data()).clone();
  } else {
    int dims[] = {1, 3, h, w};
    blob = cv::Mat(4, dims, CV_32F);
    auto* dst = blob.ptr<float>();
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          dst[(static_cast<std::size_t>(c) * h + y) * w + xx] = x[(static_cast<std::size_t>(y) * w + xx) * 3 + c];
  }
  std::lock_guard lock(mu_);
  net_.setInput(blob);
  cv::Mat out = net_.forward();
  if (out.total() != kFeatureDim)
    throw Error("backbone " + tag_ + " produced " + std::to_string(out.total()) + " outputs, expected 1000");
  const auto* p = out.ptr<float>();
  return std::vector<float>(p, p + kFeatureDim);
}

std::unique_ptr<Backbone> make_backbone(const std::string& spec) {
  if (spec == "random" || spec.rfind("random:", 0) == 0) {
    std::uint64_t seed = 1;
    if (spec.size() > 7) seed = std::stoull(spec.substr(7));
    return std::make_unique<RandomFeatureBackbone>(seed);
  }
  if (spec.rfind("onnx:", 0) == 0) {
    std::string rest = spec.substr(5), tag = "onnx/imagenet/logits";
    if (auto at = rest.find('@'); at != std::string::npos) {
      tag = rest.substr(at + 1);
      rest = rest.substr(0, at);
    }
    auto layout = TensorLayout::kNchw;
    if (rest.size() > 5 && rest.substr(rest.size() - 5) == ":nhwc") {
      layout = TensorLayout::kNhwc;
      rest = rest.substr(0, rest.size() - 5);
    }
    return std::make_unique<OnnxBackbone>(rest, tag, layout);
  }
  throw Error("unknown backbone spec '" + spec + "' (expected random[:seed] or onnx:<path>)");
}

ImageFeature extract_features(const ImageTensor& image, const Backbone& backbone, std::string image_id) {
  ImageFeature f{std::move(image_id), backbone.extract(image), backbone.tag()};
  if (f.vector.size() != kFeatureDim) throw Error("backbone returned a non-1000-dim feature");
  for (float v : f.vector)
    if (!std::isfinite(v)) throw Error("backbone produced a non-finite activation");
  return f;
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  return (aa == 0 || bb == 0) ? 0.0 : ab / std::sqrt(aa * bb);
}

FeatureCache::FeatureCache(fs::path root) : root_(std::move(root)) {}

fs::path FeatureCache::root_from_env(const fs::path& fallback) {
  if (const char* env = std::getenv("HQS_CACHE_DIR"); env && *env) return env;
  return fallback;
}

FeatureCache FeatureCache::from_env(const fs::path& fallback) { return FeatureCache(root_from_env(fallback)); }

fs::path FeatureCache::file_for(const std::string& image_id, const std::string& tag) const {
  return root_ / tag / (image_id + ".f32");
}

namespace {

void write_atomic(const fs::path& target, const void* data, std::size_t size) {
  fs::create_directories(target.parent_path());
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

}  // namespace

void FeatureCache::update_manifest(const std::string& tag, const std::string& image_id) {
  auto path = root_ / tag / "manifest.json";
  nlohmann::json m = {{"backbone_tag", tag}, {"dim", kFeatureDim}, {"dtype", "float32-le"}, {"ids", nlohmann::json::array()}};
  if (std::ifstream in(path); in) {
    try {
      m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      spdlog::warn("rebuilding unreadable cache manifest {}", path.string());
    }
  }
  auto& ids = m["ids"];
  for (const auto& v : ids)
    if (v == image_id) return;
  ids.push_back(image_id);
  auto text = m.dump(1);
  write_atomic(path, text.data(), text.size());
}

void FeatureCache::put(const ImageFeature& f) {
  if (f.vector.size() != kFeatureDim) throw Error("cache entries must be 1000-dim");
  std::lock_guard lock(mu_);
  auto path = file_for(f.image_id, f.backbone_tag);
  write_atomic(path, f.vector.data(), f.vector.size() * sizeof(float));
  update_manifest(f.backbone_tag, f.image_id);
}

std::optional<ImageFeature> FeatureCache::get(const std::string& image_id, const std::string& tag) const {
  auto path = file_for(image_id, tag);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  ImageFeature f{image_id, std::vector<float>(kFeatureDim), tag};
  in.read(reinterpret_cast<char*>(f.vector.data()), static_cast<std::streamsize>(kFeatureDim * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(kFeatureDim * sizeof(float))) return std::nullopt;
  return f;
}

bool FeatureCache::contains(const std::string& image_id, const std::string& tag) const {
  return fs::is_regular_file(file_for(image_id, tag));
}

std::vector<std::vector<float>> features_for(const std::vector<std::pair<std::string, std::string>>& id_and_path,
                                             const Backbone& backbone, FeatureCache* cache) {
  std::vector<std::vector<float>> out;
  out.reserve(id_and_path.size());
  const auto tag = backbone.tag();
  for (const auto& [id, path] : id_and_path) {
    if (cache) {
      if (auto hit = cache->get(id, tag)) {
        out.push_back(std::move(hit->vector));
        continue;
      }
    }
    auto f = extract_features(load_and_resize(path), backbone, id);
    if (cache) cache->put(f);
    out.push_back(std::move(f.vector));
  }
  return out;
}

}  // namespace hqs::vision
