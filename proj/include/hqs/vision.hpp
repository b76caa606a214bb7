#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

namespace hqs::vision {

inline constexpr int kInputSize = 299;
inline constexpr std::size_t kFeatureDim = 1000;

// 8-bit RGB pixels, row-major HWC, before any backbone normalization.
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                  static_cast<std::size_t>(c)];
  }
  // Scaled to [-1, 1] (x / 127.5 - 1), the Inception family convention.
  std::vector<float> normalized() const;
};

// Decodes, replicates grayscale to three channels and resizes bilinearly to
// 299x299 (no-op when already that size). Throws IoError on unreadable data.
ImageTensor load_and_resize(const std::filesystem::path& path);
ImageTensor decode_and_resize(std::span<const std::uint8_t> encoded, const std::string& label = "<memory>");
ImageTensor from_mat(const cv::Mat& bgr_or_gray);

struct ImageFeature {
  std::string image_id;
  std::vector<float> vector;
  std::string backbone_tag;
};

class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::string tag() const = 0;
  // 1000 activations of the final fully connected layer.
  virtual std::vector<float> extract(const ImageTensor& image) const = 0;
};

// Fixed, seeded random convolution filters and projection: not pretrained on
// anything. Deterministic and fast, for tests and offline environments.
class RandomFeatureBackbone final : public Backbone {
 public:
  explicit RandomFeatureBackbone(std::uint64_t seed = 1);
  std::string tag() const override;
  std::vector<float> extract(const ImageTensor& image) const override;

 private:
  static constexpr int kFilters = 16;
  static constexpr int kKernel = 5;
  static constexpr int kGrid = 4;
  static constexpr int kHistBins = 16;

  std::uint64_t seed_;
  std::vector<float> filters_;     // kFilters x kKernel x kKernel x 3
  std::vector<float> projection_;  // kFeatureDim x descriptor
  std::size_t descriptor_dim_ = 0;
};

enum class TensorLayout { kNchw, kNhwc };

// Any ONNX ImageNet classifier with a 1000-wide final layer, evaluated through
// OpenCV's DNN module. Inference is serialized internally.
class OnnxBackbone final : public Backbone {
 public:
  OnnxBackbone(const std::filesystem::path& model, std::string tag, TensorLayout layout = TensorLayout::kNchw);
  std::string tag() const override { return tag_; }
  std::vector<float> extract(const ImageTensor& image) const override;

 private:
  std::string tag_;
  TensorLayout layout_;
  mutable cv::dnn::Net net_;
  mutable std::mutex mu_;
};

// "random[:seed]" or "onnx:<path>[:nhwc][@tag]".
std::unique_ptr<Backbone> make_backbone(const std::string& spec);

ImageFeature extract_features(const ImageTensor& image, const Backbone& backbone, std::string image_id = {});

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

// <root>/<backbone_tag>/<image_id>.f32 (1000 little-endian float32) with a
// per-tag manifest.json listing the stored ids.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path root);

  // Honors HQS_CACHE_DIR when set, otherwise `fallback`.
  static FeatureCache from_env(const std::filesystem::path& fallback);
  static std::filesystem::path root_from_env(const std::filesystem::path& fallback);

  void put(const ImageFeature& feature);
  std::optional<ImageFeature> get(const std::string& image_id, const std::string& backbone_tag) const;
  bool contains(const std::string& image_id, const std::string& backbone_tag) const;
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path file_for(const std::string& image_id, const std::string& backbone_tag) const;

 private:
  void update_manifest(const std::string& backbone_tag, const std::string& image_id);

  std::filesystem::path root_;
  mutable std::mutex mu_;
};

// Extracts (or reuses cached) features for every path; returns vectors in
// input order.
std::vector<std::vector<float>> features_for(const std::vector<std::pair<std::string, std::string>>& id_and_path,
                                             const Backbone& backbone, FeatureCache* cache);

}  // namespace hqs::vision
