#pragma once

// Deterministic stand-in corpora in the RAD and CLEF18 file layouts, with
// rendered images whose content determines the answers. Used when the real
// datasets are not available.

#include <cstdint>
#include <filesystem>
#include <string>

#include <opencv2/core.hpp>

#include "hqs/random.hpp"

namespace hqs::synthetic {

struct Scene {
  int modality = 0;     // index into modalities()
  int organ = 0;        // index into organs()
  int plane = 0;        // index into planes()
  int abnormality = -1; // index into abnormalities(organ), -1 for none
  bool left = false;    // patient's left
  int size_cm = 1;
};

const std::vector<std::string>& modalities();
const std::vector<std::string>& organs();
const std::vector<std::string>& planes();
const std::vector<std::string>& abnormalities(int organ);

Scene random_scene(Rng& rng);
// 8-bit single-channel rendering.
cv::Mat render(const Scene& scene, Rng& rng, int size = 128);

struct SurrogateOptions {
  std::uint64_t seed = 2018;
  std::size_t rad_train = 3064;
  std::size_t rad_test = 451;
  std::size_t rad_images = 315;
  double rad_yes_no_share = 0.53;
  std::size_t clef_train = 5413;
  std::size_t clef_val = 500;
  std::size_t clef_test = 500;
  double clef_train_yes_no_share = 0.006;
  double clef_eval_yes_no_share = 0.10;
  int image_size = 128;
  bool write_rad = true;
  bool write_clef = true;
};

struct SurrogatePaths {
  std::filesystem::path rad_train, rad_test, rad_images;
  std::filesystem::path clef_train, clef_val, clef_test, clef_images;
};

// Layout:
//   rad/{train,test}.json + rad/images/*.jpg           (RAD_JSON)
//   clef18/{train,valid,test}.txt + clef18/images/*.jpg (tab-delimited)
// Rerunning with the same options rewrites identical bytes.
SurrogatePaths write_surrogate(const std::filesystem::path& out, const SurrogateOptions& options);

}  // namespace hqs::synthetic
