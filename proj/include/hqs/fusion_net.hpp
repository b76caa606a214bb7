#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hqs/corpus.hpp"
#include "hqs/fusion_model.hpp"
#include "hqs/vocab.hpp"

namespace hqs::fusion {

std::string_view to_string(HeadKind k);
HeadKind parse_head_kind(std::string_view s);

class HeadModel;

struct TrainConfig {
  int epochs = 251;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  bool train_embeddings = false;
  // Replace the momentum estimates with exact training-set statistics once
  // training ends.
  bool population_bn_stats = true;
  std::function<void(const struct EpochLog&)> on_epoch;
  // Runs after on_epoch with the model in its current (momentum BN) state.
  std::function<void(const struct EpochLog&, HeadModel&)> on_epoch_model;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  // Keras-style: over every output step of every item, blanks included.
  double categorical_accuracy = 0.0;
  double seconds = 0.0;
};

struct AnswerPrediction {
  corpus::QType qtype = corpus::QType::kUnknown;
  double margin = 0.0;
  std::vector<float> yes_no_probs;                    // {p_yes, p_no}
  std::vector<std::vector<float>> step_distributions;  // r x z
  std::vector<float> step_confidences;                // max probability per step
  std::string decoded_text;
};

inline constexpr std::string_view kYes = "yes";
inline constexpr std::string_view kNo = "no";

// -(a_yes ln p_yes + a_no ln p_no), logs clamped at 1e-12.
double yes_no_loss(const std::vector<double>& actual, const std::vector<double>& predicted);
// Sum over steps of the per-step cross entropy.
double others_loss(const std::vector<std::vector<double>>& actual, const std::vector<std::vector<double>>& predicted);

// Joins per-step words up to the first blank.
std::string decode_answer(const std::vector<int>& step_ids, const text::Vocab& answer_vocab);
std::string decode_yes_no(double p_yes, double p_no);

// Gathers `indices` of `data` into a new batch.
Batch slice(const Batch& data, const std::vector<int>& indices);

// One leaf model: its own Bi-LSTM, fusion and head. The embedding table is a
// copy owned by the head; it only changes when train_embeddings is set.
class HeadModel {
 public:
  HeadModel() = default;
  HeadModel(HeadKind kind, const NetConfig& cfg, text::Vocab answer_vocab, Eigen::MatrixXf embedding,
            std::uint64_t seed);

  HeadKind kind() const { return net_.kind(); }
  const NetConfig& config() const { return net_.config(); }
  const text::Vocab& answer_vocab() const { return answer_vocab_; }
  const Eigen::MatrixXf& embedding() const { return embedding_; }
  FusionModel<float>& net() { return net_; }
  const FusionModel<float>& net() const { return net_; }

  // Throws if data is empty.
  std::vector<EpochLog> train(const Batch& data, const TrainConfig& config);

  // 2 x N or z x (r N) per-chunk layout flattened per item; see predict().
  nn::Mat<float> probabilities(const Batch& batch) const;
  std::vector<AnswerPrediction> predict(const Batch& batch) const;

  // Weight values, BN running statistics and the embedding table.
  struct Snapshot {
    std::vector<nn::Mat<float>> params;
    nn::Vec<float> running_mean, running_var;
    Eigen::MatrixXf embedding;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

  // Recomputes batch-norm statistics from pre-normalization activations.
  void recompute_bn_statistics(const Batch& data, int chunk = 256);

  void save(const std::filesystem::path& dir) const;
  static HeadModel load(const std::filesystem::path& dir);

 private:
  FusionModel<float> net_;
  text::Vocab answer_vocab_;
  Eigen::MatrixXf embedding_;
};

nlohmann::json to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::json& j);

}  // namespace hqs::fusion
