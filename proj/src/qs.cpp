#include "hqs/qs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "hqs/error.hpp"
#include "hqs/random.hpp"
#include "hqs/text.hpp"

namespace hqs::qs {

std::vector<std::string> default_identifier_words() {
  return {"is", "was", "are", "how", "can", "does", "which", "what", "type", "there"};
}

IdfMode parse_idf_mode(std::string_view s) {
  if (s == "document_frequency" || s == "df") return IdfMode::kDocumentFrequency;
  if (s == "summed_tf") return IdfMode::kSummedTf;
  throw Error("unknown idf_mode '" + std::string(s) + "'");
}

std::string_view to_string(IdfMode m) {
  return m == IdfMode::kDocumentFrequency ? "document_frequency" : "summed_tf";
}

std::vector<std::string> qs_tokens(std::string_view question) { return text::tokenize(question); }

CorpusStats CorpusStats::build(const std::vector<std::vector<std::string>>& questions, IdfMode mode) {
  CorpusStats s;
  s.n_ = questions.size();
  for (const auto& q : questions) {
    if (mode == IdfMode::kDocumentFrequency) {
      std::set<std::string> uniq(q.begin(), q.end());
      for (const auto& w : uniq) s.denom_[w] += 1.0;
    } else {
      for (const auto& w : q) s.denom_[w] += 1.0;
    }
  }
  return s;
}

double CorpusStats::idf(std::string_view word) const {
  auto it = denom_.find(std::string(word));
  if (it == denom_.end() || it->second <= 0.0) return 0.0;
  return std::log(static_cast<double>(n_) / it->second);
}

double tfidf(std::string_view word, const std::vector<std::string>& question, const CorpusStats& stats) {
  if (question.empty()) return 0.0;
  auto count = std::count(question.begin(), question.end(), word);
  if (count == 0) return 0.0;
  return static_cast<double>(count) / static_cast<double>(question.size()) * stats.idf(word);
}

std::vector<double> identifier_vector(const std::vector<std::string>& tokens,
                                      const std::vector<std::string>& identifier_words) {
  std::vector<double> bits(identifier_words.size(), 0.0);
  for (std::size_t i = 0; i < identifier_words.size(); ++i)
    if (std::find(tokens.begin(), tokens.end(), identifier_words[i]) != tokens.end()) bits[i] = 1.0;
  return bits;
}

std::vector<std::string> top_tfidf_words(const std::vector<std::vector<std::string>>& questions,
                                         const CorpusStats& stats, std::size_t k) {
  std::map<std::string, double> best;
  for (const auto& q : questions) {
    std::set<std::string> uniq(q.begin(), q.end());
    for (const auto& w : uniq) {
      double v = tfidf(w, q, stats);
      auto [it, inserted] = best.emplace(w, v);
      if (!inserted) it->second = std::max(it->second, v);
    }
  }
  std::vector<std::pair<std::string, double>> ranked(best.begin(), best.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.push_back(ranked[i].first);
  return out;
}

double LinearSvm::decision(const std::vector<double>& v) const {
  double s = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * v[i];
  return s;
}

double hinge_loss(double target, double score) { return std::max(0.0, 1.0 - target * score); }

LinearSvm train_svm(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                    const SvmConfig& config) {
  if (features.size() != labels.size()) throw Error("feature/label count mismatch");
  if (features.empty()) throw Error("cannot train an SVM on zero examples");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw Error("SVM labels must be +1 or -1");
  }
  if (!pos || !neg) throw Error("SVM training needs at least one example of each class");
  if (config.c <= 0) throw Error("SVM C must be positive");

  const std::size_t n = features.size(), d = features[0].size();
  for (const auto& f : features)
    if (f.size() != d) throw Error("inconsistent feature dimensions");
  const double lambda = 1.0 / (config.c * static_cast<double>(n));

  LinearSvm m;
  m.weights.assign(d, 0.0);
  // running averages over the final epoch smooth out the last-iterate noise
  std::vector<double> avg_w(d, 0.0);
  double avg_b = 0.0;
  std::size_t avg_count = 0;

  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::size_t t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      ++t;
      // offset keeps the first steps bounded; plain Pegasos uses 1/(lambda t)
      const double eta = 1.0 / (lambda * (static_cast<double>(t) + static_cast<double>(n)));
      const double y = labels[i];
      const double score = m.decision(features[i]);
      const double shrink = 1.0 - eta * lambda;
      for (auto& w : m.weights) w *= shrink;
      if (y * score < 1.0) {
        for (std::size_t k = 0; k < d; ++k) m.weights[k] += eta * y * features[i][k];
        m.bias += eta * y;
      }
      if (epoch == config.epochs - 1) {
        ++avg_count;
        for (std::size_t k = 0; k < d; ++k) avg_w[k] += (m.weights[k] - avg_w[k]) / static_cast<double>(avg_count);
        avg_b += (m.bias - avg_b) / static_cast<double>(avg_count);
      }
    }
  }
  if (avg_count > 0) {
    m.weights = avg_w;
    m.bias = avg_b;
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss += hinge_loss(labels[i], m.decision(features[i]));
  m.training_hinge_loss = loss / static_cast<double>(n);
  return m;
}

std::vector<double> QsModel::featurize(std::string_view question) const {
  auto toks = qs_tokens(question);
  auto v = identifier_vector(toks, identifier_words);
  v.reserve(feature_dim());
  const double len = static_cast<double>(toks.size());
  for (std::size_t j = 0; j < tfidf_words.size(); ++j) {
    auto count = std::count(toks.begin(), toks.end(), tfidf_words[j]);
    v.push_back(count == 0 ? 0.0 : static_cast<double>(count) / len * idf_values[j]);
  }
  return v;
}

Prediction QsModel::predict_features(const std::vector<double>& features) const {
  double s = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * features[i];
  return {s >= 0.0 ? corpus::QType::kYesNo : corpus::QType::kOthers, s};
}

Prediction QsModel::predict(std::string_view question) const { return predict_features(featurize(question)); }

Prediction predict_qtype(const QsModel& model, std::string_view question) { return model.predict(question); }

nlohmann::json QsModel::to_json() const {
  return {{"format", "hqs-qs-svm/1"},
          {"weights", weights},
          {"bias", bias},
          {"identifier_words", identifier_words},
          {"tfidf_words", tfidf_words},
          {"idf_values", idf_values},
          {"idf_mode", std::string(to_string(idf_mode))},
          {"training_hinge_loss", training_hinge_loss}};
}

QsModel QsModel::from_json(const nlohmann::json& j) {
  QsModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.identifier_words = j.at("identifier_words").get<std::vector<std::string>>();
  m.tfidf_words = j.at("tfidf_words").get<std::vector<std::string>>();
  m.idf_values = j.at("idf_values").get<std::vector<double>>();
  m.idf_mode = parse_idf_mode(j.value("idf_mode", std::string("document_frequency")));
  m.training_hinge_loss = j.value("training_hinge_loss", 0.0);
  if (m.weights.size() != m.feature_dim() || m.idf_values.size() != m.tfidf_words.size())
    throw Error("inconsistent QS model dimensions");
  return m;
}

void QsModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write QS model " + path.string());
  out << to_json().dump(1) << '\n';
}

QsModel QsModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open QS model " + path.string());
  return from_json(nlohmann::json::parse(in));
}

QsModel train_qs(const corpus::Dataset& train, const QsConfig& config) {
  std::vector<std::vector<std::string>> toks;
  std::vector<int> labels;
  for (const auto& it : train.items()) {
    if (it.answer.empty()) continue;
    toks.push_back(qs_tokens(it.question));
    labels.push_back(corpus::derive_qtype(it.answer) == corpus::QType::kYesNo ? 1 : -1);
  }
  auto stats = CorpusStats::build(toks, config.idf_mode);
  QsModel m;
  m.identifier_words = config.identifier_words;
  m.tfidf_words = top_tfidf_words(toks, stats, config.tfidf_words);
  for (const auto& w : m.tfidf_words) m.idf_values.push_back(stats.idf(w));
  // small vocabularies: empty slots never match a token, so the width stays fixed
  m.tfidf_words.resize(config.tfidf_words);
  m.idf_values.resize(config.tfidf_words, 0.0);
  m.idf_mode = config.idf_mode;

  std::vector<std::vector<double>> feats;
  feats.reserve(toks.size());
  for (const auto& it : train.items())
    if (!it.answer.empty()) feats.push_back(m.featurize(it.question));
  auto svm = train_svm(feats, labels, config.svm);
  m.weights = std::move(svm.weights);
  m.bias = svm.bias;
  m.training_hinge_loss = svm.training_hinge_loss;
  return m;
}

}  // namespace hqs::qs
