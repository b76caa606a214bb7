#pragma once

// Word-embedding assembly: a pretrained word-level half (GloVe text format)
// concatenated with a character n-gram half that is defined for any word.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "hqs/vocab.hpp"

namespace hqs::text {

// Plain "word v1 ... vd" lines. An optional "<count> <dim>" header line
// (FastText .vec) is skipped.
class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(std::size_t dim) : dim_(dim) {}

  // Only words in `keep` are retained when it is non-null.
  static WordVectors load(const std::filesystem::path& path, std::size_t dim,
                          const std::unordered_set<std::string>* keep = nullptr);

  void insert(std::string word, std::vector<float> v);
  const std::vector<float>* find(std::string_view word) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<float>> vectors_;
};

struct SubwordOptions {
  std::size_t dim = 300;
  int min_n = 3;
  int max_n = 6;
  std::size_t buckets = 20000;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  float learning_rate = 0.05f;
  std::uint64_t seed = 7;
};

// Skip-gram with negative sampling over words represented as the sum of
// their character n-grams (hashed into buckets) plus a per-word row.
class SubwordModel {
 public:
  SubwordModel() = default;

  static SubwordModel train(const std::vector<std::vector<std::string>>& corpus,
                            const SubwordOptions& options);
  static SubwordModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Mean of the rows of the word (if known) and all of its n-grams. Never the
  // zero vector for a non-empty word.
  std::vector<float> vector(std::string_view word) const;

  // Raw n-gram strings for a word, including the boundary markers.
  static std::vector<std::string> ngrams(std::string_view word, int min_n, int max_n);
  static std::uint32_t hash(std::string_view s);

  std::size_t dim() const { return options_.dim; }
  const SubwordOptions& options() const { return options_; }

 private:
  std::vector<std::int64_t> subword_ids(std::string_view word) const;

  SubwordOptions options_;
  std::unordered_map<std::string, std::int64_t> words_;
  Eigen::MatrixXf input_;  // dim x (words + buckets)
};

struct EmbeddingTable {
  // One column per vocabulary index.
  Eigen::MatrixXf vectors;
  std::size_t word_dim = 0;
  std::size_t subword_dim = 0;

  std::size_t dim() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(vectors.cols()); }
};

// Column i = [word half of vocab.word(i) or zeros ; sub-word half]; the blank
// column is all zeros. `word_vectors` may be null when no pretrained
// word-level vectors are configured.
EmbeddingTable build_embedding_table(const Vocab& vocab, const WordVectors* word_vectors,
                                     std::size_t word_dim, const SubwordModel& subwords);

}  // namespace hqs::text
