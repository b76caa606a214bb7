#pragma once

// Run configuration. File format: one `key = value` per line, `#` starts a
// comment, blank lines ignored. Every key has a default; unknown keys are an
// error. to_text() writes every key, so a snapshot fully determines a run.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hqs/corpus.hpp"
#include "hqs/embedding.hpp"
#include "hqs/fusion_net.hpp"
#include "hqs/qs.hpp"

namespace hqs::harness {

enum class Mode { kWithQs, kWithoutQs };
std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);

enum class DatasetChoice { kRad, kClef18, kCombined };
std::string_view to_string(DatasetChoice d);
DatasetChoice parse_dataset(std::string_view s);

struct RunConfig {
  std::uint64_t seed = 42;
  Mode mode = Mode::kWithQs;
  DatasetChoice dataset = DatasetChoice::kRad;

  std::string rad_train, rad_test, rad_image_root, rad_keys;
  std::string clef_train, clef_val, clef_test, clef_image_root;
  char clef_delimiter = '\t';
  std::string clef_image_extension = ".jpg";

  qs::QsConfig qs;

  std::size_t question_vocab_size = 1050;
  std::string glove_path;  // empty: word-level half stays zero
  std::size_t word_dim = 300;
  text::SubwordOptions subword;
  bool train_embeddings = false;

  fusion::NetConfig net;
  int epochs = 251;
  int batch_size = 256;
  double learning_rate = 1e-3;
  // "final" or "best_val_bleu" (needs a validation split)
  std::string select = "final";

  std::string backbone = "random:1";
  std::string cache_dir = ".hqs_cache";
  std::string wordnet_dir;

  std::string to_text() const;
  static RunConfig parse(std::string_view text, const std::string& source = "<config>");
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  // Throws on unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  static std::vector<std::string> keys();

  fusion::TrainConfig train_config() const;
  bool operator==(const RunConfig& o) const { return to_text() == o.to_text(); }
};

}  // namespace hqs::harness
