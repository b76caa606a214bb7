#pragma once

// Question segregation: identifier-word bits plus tf-idf weights fed to a
// linear hinge-loss SVM that routes a question to the YES_NO or OTHERS head.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hqs/corpus.hpp"

namespace hqs::qs {

std::vector<std::string> default_identifier_words();

enum class IdfMode { kDocumentFrequency, kSummedTf };
IdfMode parse_idf_mode(std::string_view s);
std::string_view to_string(IdfMode m);

// Raw lowercase tokens. Stopwords are kept: several identifier words are
// stopwords themselves.
std::vector<std::string> qs_tokens(std::string_view question);

// Per-word statistics over the training questions.
class CorpusStats {
 public:
  static CorpusStats build(const std::vector<std::vector<std::string>>& questions,
                           IdfMode mode = IdfMode::kDocumentFrequency);

  std::size_t num_questions() const { return n_; }
  // ln(n / denom(w)); 0 for words never seen.
  double idf(std::string_view word) const;
  const std::unordered_map<std::string, double>& denominators() const { return denom_; }

 private:
  std::size_t n_ = 0;
  std::unordered_map<std::string, double> denom_;
};

double tfidf(std::string_view word, const std::vector<std::string>& question, const CorpusStats& stats);

std::vector<double> identifier_vector(const std::vector<std::string>& tokens,
                                      const std::vector<std::string>& identifier_words);

// Words ranked by the largest tf-idf they attain in any training question,
// ties broken lexicographically.
std::vector<std::string> top_tfidf_words(const std::vector<std::vector<std::string>>& questions,
                                         const CorpusStats& stats, std::size_t k);

struct SvmConfig {
  double c = 1.0;
  int epochs = 10;
  std::uint64_t seed = 13;
};

struct LinearSvm {
  std::vector<double> weights;
  double bias = 0.0;
  double training_hinge_loss = 0.0;

  double decision(const std::vector<double>& v) const;
};

double hinge_loss(double target, double score);

// Pegasos-style stochastic subgradient descent on
//   lambda/2 |w|^2 + mean_i hinge(t_i, <v_i, w> + b),  lambda = 1 / (C n).
// The bias is an unregularized extra coordinate. Labels are +1 / -1.
LinearSvm train_svm(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                    const SvmConfig& config);

struct Prediction {
  corpus::QType qtype;
  double margin;
};

// Self-contained classifier: weights plus everything needed to featurize.
struct QsModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<std::string> identifier_words;
  std::vector<std::string> tfidf_words;
  std::vector<double> idf_values;
  IdfMode idf_mode = IdfMode::kDocumentFrequency;
  double training_hinge_loss = 0.0;

  std::size_t feature_dim() const { return identifier_words.size() + tfidf_words.size(); }
  std::vector<double> featurize(std::string_view question) const;
  Prediction predict(std::string_view question) const;
  Prediction predict_features(const std::vector<double>& features) const;

  nlohmann::json to_json() const;
  static QsModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static QsModel load(const std::filesystem::path& path);
};

struct QsConfig {
  std::vector<std::string> identifier_words = default_identifier_words();
  std::size_t tfidf_words = 500;
  IdfMode idf_mode = IdfMode::kDocumentFrequency;
  SvmConfig svm;
};

// Labels come from the answers (derive_qtype); YES_NO maps to +1.
QsModel train_qs(const corpus::Dataset& train, const QsConfig& config);

Prediction predict_qtype(const QsModel& model, std::string_view question);

}  // namespace hqs::qs
