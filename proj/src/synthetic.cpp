#include "hqs/synthetic.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hqs/error.hpp"

namespace hqs::synthetic {

namespace fs = std::filesystem;

const std::vector<std::string>& modalities() {
  static const std::vector<std::string> v{"ct", "mri", "x-ray", "ultrasound"};
  return v;
}
const std::vector<std::string>& organs() {
  static const std::vector<std::string> v{"lung", "brain", "liver", "kidney"};
  return v;
}
const std::vector<std::string>& planes() {
  static const std::vector<std::string> v{"axial", "coronal", "sagittal"};
  return v;
}
const std::vector<std::string>& abnormalities(int organ) {
  static const std::vector<std::vector<std::string>> v{
      {"nodule", "pneumothorax", "mass"},
      {"hemorrhage", "infarct", "mass"},
      {"mass", "cyst", "abscess"},
      {"stone", "cyst", "mass"},
  };
  return v.at(static_cast<std::size_t>(organ));
}

namespace {

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

bool coin(Rng& rng, double p = 0.5) { return rng.uniform() < p; }

std::string article(const std::string& w) {
  if (w == "mri" || w == "x-ray") return "an";
  return std::string("aeiou").find(w.front()) != std::string::npos ? "an" : "a";
}

std::string side(const Scene& s) { return s.left ? "left" : "right"; }
const std::string& mod(const Scene& s) { return modalities()[static_cast<std::size_t>(s.modality)]; }
const std::string& organ(const Scene& s) { return organs()[static_cast<std::size_t>(s.organ)]; }
const std::string& plane(const Scene& s) { return planes()[static_cast<std::size_t>(s.plane)]; }
const std::string& abn(const Scene& s) { return abnormalities(s.organ)[static_cast<std::size_t>(s.abnormality)]; }

// Either the scene's own value or a random one, so yes/no answers balance.
std::string maybe_true(const std::string& truth, const std::vector<std::string>& pool, Rng& rng) {
  return coin(rng) ? truth : pick(pool, rng);
}

std::string yn(bool v) { return v ? "yes" : "no"; }

struct QA {
  std::string question, answer;
};

QA rad_yes_no(const Scene& s, Rng& rng) {
  const bool has = s.abnormality >= 0;
  const auto& pool = abnormalities(s.organ);
  const std::string a = has ? maybe_true(abn(s), pool, rng) : pick(pool, rng);
  const bool a_true = has && a == abn(s);
  for (;;) {
    switch (rng.below(12)) {
      case 0: return {"Is there " + article(a) + " " + a + " in the " + organ(s) + "?", yn(a_true)};
      case 1: {
        auto m = maybe_true(mod(s), modalities(), rng);
        return {"Is this " + article(m) + " " + m + " image?", yn(m == mod(s))};
      }
      case 2: {
        auto m = maybe_true(mod(s), modalities(), rng);
        return {"Was this image taken with " + m + "?", yn(m == mod(s))};
      }
      case 3: {
        auto p = maybe_true(plane(s), planes(), rng);
        return {"Is this " + article(p) + " " + p + " view?", yn(p == plane(s))};
      }
      case 4: {
        if (!has) continue;
        const bool l = coin(rng);
        return {"Is the " + abn(s) + " on the " + (l ? "left" : "right") + " side?", yn(l == s.left)};
      }
      case 5: return {"Does the image show " + article(a) + " " + a + "?", yn(a_true)};
      case 6: return {"Are there signs of " + a + " in the " + organ(s) + "?", yn(a_true)};
      case 7: return {"Can you see " + article(a) + " " + a + "?", yn(a_true)};
      case 8: {
        if (!has) continue;
        const int n = 1 + static_cast<int>(rng.below(8));
        return {"Is the lesion larger than " + std::to_string(n) + " cm?", yn(s.size_cm > n)};
      }
      case 9: {
        auto o = maybe_true(organ(s), organs(), rng);
        return {"Is the " + o + " present?", yn(o == organ(s))};
      }
      case 10: return {"Is the " + organ(s) + " normal?", yn(!has)};
      default: {
        auto o = maybe_true(organ(s), organs(), rng);
        return {"Is the " + o + " shown in this image?", yn(o == organ(s))};
      }
    }
  }
}

QA rad_others(const Scene& s, Rng& rng) {
  const bool has = s.abnormality >= 0;
  for (;;) {
    switch (rng.below(15)) {
      case 0: return {"What is the modality of this image?", mod(s)};
      case 1: return {"What type of imaging is this?", mod(s)};
      case 2: return {"Which plane is this image taken in?", plane(s)};
      case 3:
        if (!has) continue;
        return {"Where is the " + abn(s) + " located?", side(s) + " " + organ(s)};
      case 4: return {"What organ is shown in this image?", organ(s)};
      case 5:
        if (!has) continue;
        return {"How large is the " + abn(s) + "?", std::to_string(s.size_cm) + " cm"};
      case 6:
        if (!has) continue;
        return {"What abnormality is seen in the " + organ(s) + "?", abn(s)};
      case 7:
        if (!has) continue;
        return {"Which side is the " + abn(s) + " on?", "on the patient's " + side(s)};
      case 8:
        if (!has) continue;
        return {"What is the size of the lesion?", std::to_string(s.size_cm) + " cm"};
      case 9:
        if (!has) continue;
        return {"Describe the location of the " + abn(s), "in the " + side(s) + " " + organ(s)};
      case 10: return {"How was this image taken?", mod(s)};
      case 11:
        // descriptive despite reading like a yes/no question
        if (!has) continue;
        return {"Evidence of " + abn(s) + " in the " + organ(s) + "?", abn(s) + " in the " + side(s) + " " + organ(s)};
      case 12:
        if (!has) continue;
        return {"Describe the findings.", std::to_string(s.size_cm) + " cm " + abn(s) + " in the " + side(s) + " " +
                                              organ(s) + " on " + plane(s) + " " + mod(s)};
      case 13:
        return {"What plane and modality is this image?", plane(s) + " " + mod(s) + " of the " + organ(s)};
      default:
        if (!has) continue;
        return {"What is abnormal in the " + organ(s) + "?", abn(s)};
    }
  }
}

const std::string& clef_modality(const Scene& s) {
  static const std::vector<std::string> v{"ct scan", "magnetic resonance imaging", "radiograph", "ultrasound"};
  return v[static_cast<std::size_t>(s.modality)];
}

std::string clef_adjective(const Scene& s) {
  static const std::vector<std::string> small{"hypodense", "hyperintense", "small opaque", "hypoechoic"};
  static const std::vector<std::string> large{"large hypodense", "large hyperintense", "large opaque", "large hypoechoic"};
  return (s.size_cm > 5 ? large : small)[static_cast<std::size_t>(s.modality)];
}

QA clef_others(const Scene& s, Rng& rng) {
  switch (rng.below(8)) {
    case 0: return {"what does the " + clef_modality(s) + " of the " + organ(s) + " show?",
                    clef_adjective(s) + " " + abn(s) + " in the " + side(s) + " " + organ(s)};
    case 1: return {"what is seen in the " + organ(s) + "?", abn(s)};
    case 2: return {"what shows " + clef_adjective(s) + " " + abn(s) + "?", clef_modality(s) + " of the " + organ(s)};
    case 3: return {"where is the " + abn(s) + " located?", side(s) + " " + organ(s)};
    case 4: return {"what reveals the " + abn(s) + " in the " + side(s) + " " + organ(s) + "?", clef_modality(s)};
    case 5: return {"what was the " + abn(s) + " seen on?", clef_modality(s)};
    case 6: return {"what does the " + plane(s) + " image demonstrate?", abn(s) + " of the " + organ(s)};
    default: return {"what is the " + clef_adjective(s) + " lesion in the " + organ(s) + " consistent with?", abn(s)};
  }
}

QA clef_yes_no(const Scene& s, Rng& rng) {
  const auto a = maybe_true(abn(s), abnormalities(s.organ), rng);
  switch (rng.below(3)) {
    case 0: return {"is there " + a + " in the " + organ(s) + "?", yn(a == abn(s))};
    case 1: return {"does the " + clef_modality(s) + " show " + a + "?", yn(a == abn(s))};
    default: {
      auto o = maybe_true(organ(s), organs(), rng);
      return {"is the " + o + " abnormal?", yn(o == organ(s))};
    }
  }
}

void write_image(const fs::path& path, const Scene& s, Rng& rng, int size) {
  const cv::Mat img = render(s, rng, size);
  if (!cv::imwrite(path.string(), img, {cv::IMWRITE_JPEG_QUALITY, 92}))
    throw IoError("cannot write image " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

Scene random_scene(Rng& rng) {
  Scene s;
  s.modality = static_cast<int>(rng.below(modalities().size()));
  s.organ = static_cast<int>(rng.below(organs().size()));
  s.plane = static_cast<int>(rng.below(planes().size()));
  if (coin(rng, 0.65)) s.abnormality = static_cast<int>(rng.below(abnormalities(s.organ).size()));
  s.left = coin(rng);
  s.size_cm = 1 + static_cast<int>(rng.below(9));
  return s;
}

cv::Mat render(const Scene& s, Rng& rng, int size) {
  const double k = size / 128.0;
  auto P = [&](double x, double y) {
    return cv::Point(static_cast<int>(std::lround(x * k)), static_cast<int>(std::lround(y * k)));
  };
  auto A = [&](double a, double b) {
    return cv::Size(std::max(1, static_cast<int>(std::lround(a * k))), std::max(1, static_cast<int>(std::lround(b * k))));
  };
  const double jx = rng.uniform(-4, 4), jy = rng.uniform(-4, 4);
  cv::Mat canvas(size, size, CV_32F, cv::Scalar(0));

  static const double kBody[3][2] = {{50, 38}, {38, 54}, {44, 48}};
  const auto body = A(kBody[s.plane][0], kBody[s.plane][1]);
  const auto center = P(64 + jx + (s.plane == 2 ? -6 : 0), 64 + jy);
  switch (s.modality) {
    case 0:  // ct: soft tissue disc with a bright cortical ring
      cv::ellipse(canvas, center, body, 0, 0, 360, cv::Scalar(90), cv::FILLED);
      cv::ellipse(canvas, center, body, 0, 0, 360, cv::Scalar(210), std::max(1, static_cast<int>(3 * k)));
      break;
    case 1: {  // mri: brighter body over a faint textured background
      canvas.setTo(cv::Scalar(25));
      cv::ellipse(canvas, center, body, 0, 0, 360, cv::Scalar(125), cv::FILLED);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) canvas.at<float>(y, x) += static_cast<float>(12 * std::sin(x * 0.2 / k) * std::cos(y * 0.15 / k));
      break;
    }
    case 2: {  // x-ray: graded body, spine and rib stripes
      canvas.setTo(cv::Scalar(12));
      cv::ellipse(canvas, center, body, 0, 0, 360, cv::Scalar(150), cv::FILLED);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          if (canvas.at<float>(y, x) > 100) canvas.at<float>(y, x) += static_cast<float>(30 * std::sin(y * 0.5 / k));
      cv::rectangle(canvas, P(60 + jx, 8), P(68 + jx, 120), cv::Scalar(225), cv::FILLED);
      break;
    }
    default: {  // ultrasound: speckled fan from the top edge
      std::vector<cv::Point> fan{P(64 + jx, 6), P(10 + jx, 118), P(118 + jx, 118)};
      cv::fillConvexPoly(canvas, fan, cv::Scalar(1));
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          if (canvas.at<float>(y, x) > 0) canvas.at<float>(y, x) = static_cast<float>(rng.uniform(40, 150));
      break;
    }
  }

  switch (s.organ) {
    case 0:
      cv::ellipse(canvas, P(44 + jx, 60 + jy), A(14, 24), 0, 0, 360, cv::Scalar(40), cv::FILLED);
      cv::ellipse(canvas, P(84 + jx, 60 + jy), A(14, 24), 0, 0, 360, cv::Scalar(40), cv::FILLED);
      break;
    case 1:
      cv::ellipse(canvas, P(64 + jx, 62 + jy), A(36, 30), 0, 0, 360, cv::Scalar(175), cv::FILLED);
      cv::line(canvas, P(64 + jx, 34 + jy), P(64 + jx, 90 + jy), cv::Scalar(80), std::max(1, static_cast<int>(2 * k)));
      break;
    case 2:
      cv::ellipse(canvas, P(46 + jx, 54 + jy), A(24, 16), 20, 0, 360, cv::Scalar(135), cv::FILLED);
      break;
    default:
      cv::ellipse(canvas, P(40 + jx, 80 + jy), A(8, 13), 0, 0, 360, cv::Scalar(160), cv::FILLED);
      cv::ellipse(canvas, P(88 + jx, 80 + jy), A(8, 13), 0, 0, 360, cv::Scalar(160), cv::FILLED);
      break;
  }

  if (s.abnormality >= 0) {
    // displayed image right is the patient's left
    const double ax = (s.left ? 84 : 44) + jx + rng.uniform(-3, 3);
    const double ay = (s.organ == 3 ? 80 : 60) + jy + rng.uniform(-3, 3);
    const double radius = 2.5 + 1.6 * s.size_cm;
    const double value = s.abnormality % 2 == 0 ? 245 : 8;
    if (s.abnormality == 2)
      cv::circle(canvas, P(ax, ay), static_cast<int>(radius * k), cv::Scalar(value), std::max(1, static_cast<int>(2 * k)));
    else
      cv::circle(canvas, P(ax, ay), static_cast<int>(radius * k), cv::Scalar(value), cv::FILLED);
  }

  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) canvas.at<float>(y, x) += static_cast<float>(6.0 * rng.normal());
  cv::Mat out;
  canvas.convertTo(out, CV_8U);  // saturating
  return out;
}

SurrogatePaths write_surrogate(const fs::path& out, const SurrogateOptions& o) {
  SurrogatePaths paths;
  if (o.write_rad) {
    const auto dir = out / "rad";
    paths.rad_images = dir / "images";
    fs::create_directories(paths.rad_images);
    Rng rng(derive_seed(o.seed, "rad/scenes"));
    std::vector<Scene> scenes;
    for (std::size_t i = 0; i < o.rad_images; ++i) {
      scenes.push_back(random_scene(rng));
      char name[32];
      std::snprintf(name, sizeof name, "synpic%05zu.jpg", i + 1);
      write_image(paths.rad_images / name, scenes.back(), rng, o.image_size);
    }
    auto split = [&](const char* tag, std::size_t n, std::size_t qid_base) {
      Rng q(derive_seed(o.seed, std::string("rad/questions/") + tag));
      nlohmann::json arr = nlohmann::json::array();
      for (std::size_t i = 0; i < n; ++i) {
        const auto img = q.below(scenes.size());
        const auto& s = scenes[img];
        const QA qa = coin(q, o.rad_yes_no_share) ? rad_yes_no(s, q) : rad_others(s, q);
        char name[40];
        std::snprintf(name, sizeof name, "images/synpic%05zu.jpg", static_cast<std::size_t>(img + 1));
        arr.push_back({{"qid", qid_base + i}, {"image_name", name}, {"question", qa.question}, {"answer", qa.answer}});
      }
      return arr.dump(1) + "\n";
    };
    paths.rad_train = dir / "train.json";
    paths.rad_test = dir / "test.json";
    write_text(paths.rad_train, split("train", o.rad_train, 1));
    write_text(paths.rad_test, split("test", o.rad_test, 100001));
    spdlog::info("surrogate RAD: {} + {} items over {} images in {}", o.rad_train, o.rad_test, o.rad_images,
                 dir.string());
  }
  if (o.write_clef) {
    const auto dir = out / "clef18";
    paths.clef_images = dir / "images";
    fs::create_directories(paths.clef_images);
    std::size_t image_counter = 0;
    auto split = [&](const char* tag, std::size_t n, double yes_no_share) {
      Rng rng(derive_seed(o.seed, std::string("clef18/") + tag));
      std::string text;
      std::vector<Scene> scenes;
      // about 2.4 questions per image, images not shared across splits
      const std::size_t n_images = std::max<std::size_t>(1, n * 10 / 24);
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < n_images; ++i) {
        Scene s = random_scene(rng);
        if (s.abnormality < 0) s.abnormality = static_cast<int>(rng.below(abnormalities(s.organ).size()));
        scenes.push_back(s);
        char id[32];
        std::snprintf(id, sizeof id, "clef_%06zu", ++image_counter);
        ids.emplace_back(id);
        write_image(paths.clef_images / (ids.back() + ".jpg"), s, rng, o.image_size);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto img = rng.below(scenes.size());
        const QA qa = coin(rng, yes_no_share) ? clef_yes_no(scenes[img], rng) : clef_others(scenes[img], rng);
        text += ids[img] + "\t" + qa.question + "\t" + qa.answer + "\n";
      }
      return text;
    };
    paths.clef_train = dir / "train.txt";
    paths.clef_val = dir / "valid.txt";
    paths.clef_test = dir / "test.txt";
    write_text(paths.clef_train, split("train", o.clef_train, o.clef_train_yes_no_share));
    write_text(paths.clef_val, split("valid", o.clef_val, o.clef_eval_yes_no_share));
    write_text(paths.clef_test, split("test", o.clef_test, o.clef_eval_yes_no_share));
    spdlog::info("surrogate CLEF18: {}/{}/{} items in {}", o.clef_train, o.clef_val, o.clef_test, dir.string());
  }
  return paths;
}

}  // namespace hqs::synthetic
