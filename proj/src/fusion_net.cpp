#include "hqs/fusion_net.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "hqs/error.hpp"
#include "hqs/tensor_io.hpp"
#include "hqs/text.hpp"

namespace hqs::fusion {

namespace fs = std::filesystem;
using M = nn::Mat<float>;

std::string_view to_string(HeadKind k) { return k == HeadKind::kYesNo ? "yes_no" : "others"; }

HeadKind parse_head_kind(std::string_view s) {
  if (s == "yes_no") return HeadKind::kYesNo;
  if (s == "others") return HeadKind::kOthers;
  throw Error("unknown head kind '" + std::string(s) + "'");
}

double yes_no_loss(const std::vector<double>& actual, const std::vector<double>& predicted) {
  if (actual.size() != 2 || predicted.size() != 2) throw Error("yes/no loss expects two-way distributions");
  using V = nn::Vec<double>;
  return nn::cross_entropy<double>(Eigen::Map<const V>(actual.data(), 2), Eigen::Map<const V>(predicted.data(), 2));
}

double others_loss(const std::vector<std::vector<double>>& actual, const std::vector<std::vector<double>>& predicted) {
  if (actual.size() != predicted.size()) throw Error("others loss: step counts differ");
  using V = nn::Vec<double>;
  double total = 0.0;
  for (std::size_t s = 0; s < actual.size(); ++s) {
    if (actual[s].size() != predicted[s].size()) throw Error("others loss: vocabulary sizes differ");
    const auto n = static_cast<Eigen::Index>(actual[s].size());
    total += nn::cross_entropy<double>(Eigen::Map<const V>(actual[s].data(), n), Eigen::Map<const V>(predicted[s].data(), n));
  }
  return total;
}

std::string decode_answer(const std::vector<int>& step_ids, const text::Vocab& answer_vocab) {
  std::vector<std::string> words;
  for (int id : step_ids) {
    if (id == text::Vocab::kBlank) break;
    words.push_back(answer_vocab.word(id));
  }
  return text::join(words);
}

std::string decode_yes_no(double p_yes, double p_no) { return std::string(p_yes > p_no ? kYes : kNo); }

Batch slice(const Batch& data, const std::vector<int>& indices) {
  Batch out;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.ids.resize(data.ids.rows(), n);
  out.images.resize(data.images.rows(), n);
  if (data.answers.size() > 0) out.answers.resize(data.answers.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int src = indices[static_cast<std::size_t>(j)];
    out.ids.col(j) = data.ids.col(src);
    out.images.col(j) = data.images.col(src);
    if (data.answers.size() > 0) out.answers.col(j) = data.answers.col(src);
    if (!data.labels.empty()) out.labels.push_back(data.labels[static_cast<std::size_t>(src)]);
  }
  return out;
}

HeadModel::HeadModel(HeadKind kind, const NetConfig& cfg, text::Vocab answer_vocab, Eigen::MatrixXf embedding,
                     std::uint64_t seed)
    : answer_vocab_(std::move(answer_vocab)), embedding_(std::move(embedding)) {
  if (embedding_.rows() != cfg.embed_dim)
    throw Error("embedding table has " + std::to_string(embedding_.rows()) + " rows, expected " +
                std::to_string(cfg.embed_dim));
  const int z = kind == HeadKind::kYesNo ? 2 : static_cast<int>(answer_vocab_.size());
  Rng rng(derive_seed(seed, std::string("init/") + std::string(to_string(kind))));
  net_ = FusionModel<float>(kind, cfg, z, rng);
}

std::vector<EpochLog> HeadModel::train(const Batch& data, const TrainConfig& config) {
  const int n = data.size();
  if (n == 0) throw Error("empty routed subset for the " + std::string(to_string(kind())) + " head");
  if (config.batch_size < 1 || config.epochs < 0) throw Error("invalid batch size or epoch count");
  nn::FlushDenormals ftz;
  Rng rng(derive_seed(config.seed, std::string("train/") + std::string(to_string(kind()))));
  nn::Adam<float> adam(config.learning_rate);
  auto params = net_.params();
  nn::Param<float> emb;
  if (config.train_embeddings) {
    emb = nn::Param<float>("embedding", embedding_);
    params.push_back(&emb);
  }
  for (auto* p : params) p->reset_state();
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  std::vector<EpochLog> logs;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0, total = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int end = std::min(n, start + config.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      const Batch sub = slice(data, idx);
      const int b = sub.size();
      for (auto* p : params) p->zero_grad();
      FusionModel<float>::Tape tape;
      const M& table = config.train_embeddings ? emb.value : embedding_;
      const M probs = net_.forward(sub, table, true, &rng, &tape);
      const M target = net_.targets(sub);
      loss_sum += net_.loss(target, probs, b) * b;
      for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        Eigen::Index pi = 0, ti = 0;
        probs.col(j).maxCoeff(&pi);
        target.col(j).maxCoeff(&ti);
        correct += pi == ti;
        ++total;
      }
      M dx;
      net_.backward(tape, target, b, config.train_embeddings ? &dx : nullptr);
      if (config.train_embeddings) {
        for (int t = 0; t < sub.ids.rows(); ++t)
          for (int k = 0; k < b; ++k) emb.grad.col(sub.ids(t, k)) += dx.col(static_cast<Eigen::Index>(t) * b + k);
        emb.grad.col(text::Vocab::kBlank).setZero();
      }
      adam.step(params);
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / n;
    log.categorical_accuracy = static_cast<double>(correct) / static_cast<double>(total);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(log.loss)) throw Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    spdlog::debug("{} epoch {} loss {:.5f} acc {:.4f} ({:.1f}s)", to_string(kind()), epoch, log.loss,
                  log.categorical_accuracy, log.seconds);
    if (config.on_epoch) config.on_epoch(log);
    if (config.on_epoch_model) {
      if (config.train_embeddings) embedding_ = emb.value;
      config.on_epoch_model(log, *this);
    }
    logs.push_back(log);
  }
  for (auto* p : params) p->release_state();
  if (config.train_embeddings) embedding_ = emb.value;
  if (config.population_bn_stats && config.epochs > 0) recompute_bn_statistics(data);
  return logs;
}

HeadModel::Snapshot HeadModel::snapshot() const {
  auto& net = const_cast<FusionModel<float>&>(net_);
  Snapshot s;
  for (auto* p : net.params()) s.params.push_back(p->value);
  s.running_mean = net.batch_norm().running_mean;
  s.running_var = net.batch_norm().running_var;
  s.embedding = embedding_;
  return s;
}

void HeadModel::restore(const Snapshot& s) {
  auto params = net_.params();
  if (params.size() != s.params.size()) throw Error("snapshot does not match this head");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s.params[i];
  net_.batch_norm().running_mean = s.running_mean;
  net_.batch_norm().running_var = s.running_var;
  embedding_ = s.embedding;
}

void HeadModel::recompute_bn_statistics(const Batch& data, int chunk) {
  const int n = data.size();
  if (n == 0) return;
  nn::FlushDenormals ftz;
  const int f = config().fused_dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f), sumsq = Eigen::VectorXd::Zero(f);
  double count = 0.0;
  for (int start = 0; start < n; start += chunk) {
    std::vector<int> idx;
    for (int i = start; i < std::min(n, start + chunk); ++i) idx.push_back(i);
    const Eigen::MatrixXd x = net_.prenorm(slice(data, idx), embedding_).cast<double>();
    sum += x.rowwise().sum();
    sumsq += x.array().square().rowwise().sum().matrix();
    count += static_cast<double>(x.cols());
  }
  Eigen::VectorXd mean = sum / count;
  Eigen::VectorXd var = (sumsq / count - mean.array().square().matrix()).cwiseMax(0.0);
  net_.set_population_statistics(mean.cast<float>(), var.cast<float>());
}

M HeadModel::probabilities(const Batch& batch) const {
  const int n = batch.size();
  const int r = config().answer_len;
  const bool yn = kind() == HeadKind::kYesNo;
  nn::FlushDenormals ftz;
  M out(net_.output_vocab(), yn ? n : static_cast<Eigen::Index>(n) * r);
  constexpr int kChunk = 256;
  for (int start = 0; start < n; start += kChunk) {
    std::vector<int> idx;
    for (int i = start; i < std::min(n, start + kChunk); ++i) idx.push_back(i);
    const int b = static_cast<int>(idx.size());
    const M p = net_.infer(slice(batch, idx), embedding_);
    if (yn) {
      out.middleCols(start, b) = p;
    } else {
      for (int k = 0; k < b; ++k)
        for (int s = 0; s < r; ++s)
          out.col(static_cast<Eigen::Index>(start + k) * r + s) = p.col(static_cast<Eigen::Index>(s) * b + k);
    }
  }
  return out;
}

std::vector<AnswerPrediction> HeadModel::predict(const Batch& batch) const {
  const M p = probabilities(batch);
  const int n = batch.size(), r = config().answer_len;
  std::vector<AnswerPrediction> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& pred = out[static_cast<std::size_t>(i)];
    if (kind() == HeadKind::kYesNo) {
      pred.qtype = corpus::QType::kYesNo;
      pred.yes_no_probs = {p(0, i), p(1, i)};
      pred.step_confidences = {std::max(p(0, i), p(1, i))};
      pred.decoded_text = decode_yes_no(p(0, i), p(1, i));
      continue;
    }
    pred.qtype = corpus::QType::kOthers;
    std::vector<int> ids;
    for (int s = 0; s < r; ++s) {
      const auto col = p.col(static_cast<Eigen::Index>(i) * r + s);
      Eigen::Index best = 0;
      const float conf = col.maxCoeff(&best);
      ids.push_back(static_cast<int>(best));
      pred.step_confidences.push_back(conf);
      pred.step_distributions.emplace_back(col.data(), col.data() + col.size());
    }
    pred.decoded_text = decode_answer(ids, answer_vocab_);
  }
  return out;
}

nlohmann::json to_json(const NetConfig& c) {
  return {{"seq_len", c.seq_len},       {"answer_len", c.answer_len}, {"hidden", c.hidden},
          {"embed_dim", c.embed_dim},   {"image_dim", c.image_dim},   {"step_hidden", c.step_hidden},
          {"dropout", c.dropout},       {"bn_momentum", c.bn_momentum}, {"bn_eps", c.bn_eps}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.seq_len = j.at("seq_len").get<int>();
  c.answer_len = j.at("answer_len").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.image_dim = j.at("image_dim").get<int>();
  c.step_hidden = j.at("step_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_eps = j.at("bn_eps").get<double>();
  return c;
}

void HeadModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  auto& net = const_cast<FusionModel<float>&>(net_);
  std::vector<io::Tensor> tensors;
  for (auto* p : net.params()) tensors.push_back(io::from_matrix(p->name, p->value));
  tensors.push_back(io::from_matrix("bn.running_mean", net.batch_norm().running_mean));
  tensors.push_back(io::from_matrix("bn.running_var", net.batch_norm().running_var));
  tensors.push_back(io::from_matrix("embedding", embedding_));
  io::write_tensors(dir / "weights.hqst", tensors);
  nlohmann::json meta = {{"format", "hqs-head/1"},
                         {"kind", std::string(to_string(kind()))},
                         {"net", to_json(config())},
                         {"answer_vocab", answer_vocab_.to_json()}};
  std::ofstream out(dir / "meta.json");
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(1) << '\n';
}

HeadModel HeadModel::load(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("missing head metadata in " + dir.string());
  const auto meta = nlohmann::json::parse(in);
  const auto kind = parse_head_kind(meta.at("kind").get<std::string>());
  const auto cfg = net_config_from_json(meta.at("net"));
  auto tensors = io::read_tensors(dir / "weights.hqst");
  HeadModel m(kind, cfg, text::Vocab::from_json(meta.at("answer_vocab")),
              io::to_matrix(io::find_tensor(tensors, "embedding")), 0);
  for (auto* p : m.net_.params()) {
    auto value = io::to_matrix(io::find_tensor(tensors, p->name));
    if (value.rows() != p->value.rows() || value.cols() != p->value.cols())
      throw Error("checkpoint tensor " + p->name + " has the wrong shape");
    p->value = std::move(value);
  }
  m.net_.batch_norm().running_mean = io::to_matrix(io::find_tensor(tensors, "bn.running_mean")).col(0);
  m.net_.batch_norm().running_var = io::to_matrix(io::find_tensor(tensors, "bn.running_var")).col(0);
  return m;
}

}  // namespace hqs::fusion
