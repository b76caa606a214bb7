#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hqs/config.hpp"
#include "hqs/corpus.hpp"
#include "hqs/fusion_net.hpp"
#include "hqs/metrics.hpp"
#include "hqs/qs.hpp"
#include "hqs/vision.hpp"
#include "hqs/vocab.hpp"

namespace hqs::harness {

struct Splits {
  corpus::Dataset train;
  corpus::Dataset test;
  std::optional<corpus::Dataset> val;
  std::size_t skipped = 0;
};

// Loads the splits selected by cfg.dataset; "combined" merges RAD and CLEF18.
Splits load_splits(const RunConfig& cfg);

// "<SOURCE>/<image_id>", so RAD and CLEF18 ids cannot collide.
std::string feature_key(const corpus::QAItem& item);

using FeatureMap = std::unordered_map<std::string, std::vector<float>>;

FeatureMap build_features(const std::vector<const corpus::Dataset*>& sets, const vision::Backbone& backbone,
                          vision::FeatureCache* cache);

struct QsEvaluation {
  metrics::PrfReport prf;
  double accuracy = 0.0;
  std::size_t count = 0;
  nlohmann::json to_json() const;
  // Per-class rows plus macro and support-weighted overall rows.
  std::string table() const;
};

// Gold labels from derive_qtype; unlabeled items are skipped.
QsEvaluation evaluate_qs(const qs::QsModel& model, const corpus::Dataset& test);

struct Query {
  std::string question;
  std::vector<float> image;
};

// A trained system: QS router (WITH_QS only) plus leaf heads.
class VqaSystem {
 public:
  Mode mode = Mode::kWithQs;
  RunConfig config;
  std::optional<qs::QsModel> qs;
  text::Vocab question_vocab;
  std::optional<fusion::HeadModel> yes_no;
  std::optional<fusion::HeadModel> others;
  std::string backbone_tag;

  fusion::Batch encode(const std::vector<Query>& queries) const;
  // Each query is answered by exactly one head.
  std::vector<fusion::AnswerPrediction> answer(const std::vector<Query>& queries) const;
  std::string model_tag() const;

  void save(const std::filesystem::path& dir) const;
  static VqaSystem load(const std::filesystem::path& dir);
};

struct TrainOutput {
  VqaSystem system;
  std::vector<fusion::EpochLog> yes_no_log;
  std::vector<fusion::EpochLog> others_log;
};

// `val`, when given with select = best_val_bleu, picks each head's best epoch
// by validation BLEU on that head's gold-typed subset.
TrainOutput train_vqa(const RunConfig& cfg, const corpus::Dataset& train, const FeatureMap& features,
                      const std::string& backbone_tag, const corpus::Dataset* val = nullptr);

struct PredictionRecord {
  std::string qa_id;
  std::string prediction;
  std::string reference;
  corpus::QType gold_qtype = corpus::QType::kUnknown;
  corpus::QType routed_qtype = corpus::QType::kUnknown;
  double margin = 0.0;
  nlohmann::json to_json() const;
};

struct SplitEvaluation {
  metrics::EvalReport yes_no;
  metrics::EvalReport others;
  metrics::EvalReport overall;
  std::vector<PredictionRecord> predictions;
  nlohmann::json to_json() const;
  friend bool operator==(const SplitEvaluation& a, const SplitEvaluation& b) {
    return a.yes_no == b.yes_no && a.others == b.others && a.overall == b.overall;
  }
};

// Rows are grouped by gold question type (Yes/No, Others, Overall).
SplitEvaluation evaluate_predictions(std::vector<PredictionRecord> records, const wordnet::Taxonomy* taxonomy);
SplitEvaluation evaluate_vqa(const VqaSystem& system, const corpus::Dataset& test, const FeatureMap& features,
                             const wordnet::Taxonomy* taxonomy);

struct AblationRow {
  std::uint64_t seed = 0;
  SplitEvaluation with_qs;
  SplitEvaluation without_qs;
  // every YES_NO-routed WITH_QS prediction was "yes" or "no"
  bool yes_no_routing_ok = true;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  double mean_bleu(Mode m) const;
  nlohmann::json to_json() const;
  std::string table() const;
};

// Both modes see the same splits and the same feature map; only routing
// differs.
AblationResult ablate(const RunConfig& base, const Splits& splits, const FeatureMap& features,
                      const std::vector<std::uint64_t>& seeds, const std::string& backbone_tag,
                      const wordnet::Taxonomy* taxonomy);

}  // namespace hqs::harness
