#include "hqs/embedding.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hqs/error.hpp"
#include "hqs/random.hpp"

namespace hqs::text {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

float parse_float(std::string_view s, const std::string& src, std::size_t line) {
  // std::from_chars for float is available in libstdc++ 11
  float v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(src, line, "bad float '" + std::string(s) + "'");
  return v;
}

}  // namespace

WordVectors WordVectors::load(const fs::path& path, std::size_t dim,
                              const std::unordered_set<std::string>* keep) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word vector file " + path.string());
  WordVectors wv(dim);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (lineno == 1 && f.size() == 2) continue;  // "<count> <dim>" header
    if (f.size() != dim + 1)
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(dim) + " values, got " + std::to_string(f.size() - 1));
    std::string word(f[0]);
    if (keep && !keep->count(word)) continue;
    std::vector<float> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = parse_float(f[i + 1], path.string(), lineno);
    wv.vectors_.emplace(std::move(word), std::move(v));
  }
  return wv;
}

void WordVectors::insert(std::string word, std::vector<float> v) {
  if (v.size() != dim_) throw Error("word vector dimension mismatch for '" + word + "'");
  vectors_[std::move(word)] = std::move(v);
}

const std::vector<float>* WordVectors::find(std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::uint32_t SubwordModel::hash(std::string_view s) {
  // FNV-1a over signed bytes, as FastText does
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<std::uint32_t>(static_cast<std::int8_t>(c));
    h *= 16777619u;
  }
  return h;
}

std::vector<std::string> SubwordModel::ngrams(std::string_view word, int min_n, int max_n) {
  std::string w = "<" + std::string(word) + ">";
  std::vector<std::string> out;
  const int len = static_cast<int>(w.size());
  for (int i = 0; i < len; ++i) {
    for (int n = min_n; n <= max_n && i + n <= len; ++n) {
      // the bare boundary markers are not n-grams
      if (n == 1 && (i == 0 || i == len - 1)) continue;
      out.push_back(w.substr(static_cast<std::size_t>(i), static_cast<std::size_t>(n)));
    }
  }
  if (out.empty()) out.push_back(w);
  return out;
}

std::vector<std::int64_t> SubwordModel::subword_ids(std::string_view word) const {
  std::vector<std::int64_t> ids;
  const auto nwords = static_cast<std::int64_t>(words_.size());
  if (auto it = words_.find(std::string(word)); it != words_.end()) ids.push_back(it->second);
  for (const auto& g : ngrams(word, options_.min_n, options_.max_n))
    ids.push_back(nwords + static_cast<std::int64_t>(hash(g) % options_.buckets));
  return ids;
}

SubwordModel SubwordModel::train(const std::vector<std::vector<std::string>>& corpus,
                                 const SubwordOptions& opt) {
  if (opt.buckets == 0 || opt.dim == 0) throw Error("sub-word model needs dim > 0 and buckets > 0");
  SubwordModel m;
  m.options_ = opt;

  std::vector<std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& sent : corpus) {
    for (const auto& w : sent) {
      auto [it, inserted] = m.words_.emplace(w, static_cast<std::int64_t>(order.size()));
      if (inserted) {
        order.push_back(w);
        counts.push_back(0);
      }
      ++counts[static_cast<std::size_t>(it->second)];
    }
  }
  const auto nwords = order.size();
  const auto rows = static_cast<Eigen::Index>(nwords + opt.buckets);
  const auto dim = static_cast<Eigen::Index>(opt.dim);

  Rng rng(opt.seed);
  m.input_.resize(dim, rows);
  const double bound = 1.0 / static_cast<double>(opt.dim);
  for (Eigen::Index c = 0; c < rows; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) m.input_(r, c) = static_cast<float>(rng.uniform(-bound, bound));
  if (nwords < 2) return m;

  Eigen::MatrixXf output = Eigen::MatrixXf::Zero(dim, static_cast<Eigen::Index>(nwords));

  // unigram^0.5 negative table
  std::vector<std::size_t> neg_table;
  double z = 0;
  for (auto c : counts) z += std::sqrt(static_cast<double>(c));
  for (std::size_t i = 0; i < nwords; ++i) {
    auto n = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(counts[i])) / z * 1e5));
    neg_table.insert(neg_table.end(), n, i);
  }

  std::vector<std::vector<std::int64_t>> sub(nwords);
  for (std::size_t i = 0; i < nwords; ++i) sub[i] = m.subword_ids(order[i]);

  std::size_t total_tokens = 0;
  for (const auto& s : corpus) total_tokens += s.size();
  const double total_steps = static_cast<double>(total_tokens) * opt.epochs;
  double processed = 0;

  Eigen::VectorXf hidden(dim), grad(dim);
  auto sigmoid = [](float x) { return 1.0f / (1.0f + std::exp(-x)); };

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const auto& sent : corpus) {
      std::vector<std::size_t> ids;
      ids.reserve(sent.size());
      for (const auto& w : sent) ids.push_back(static_cast<std::size_t>(m.words_.at(w)));
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        float lr = static_cast<float>(opt.learning_rate * (1.0 - processed / total_steps));
        processed += 1;
        const auto& in_ids = sub[ids[pos]];
        hidden.setZero();
        for (auto r : in_ids) hidden += m.input_.col(r);
        hidden /= static_cast<float>(in_ids.size());

        int ws = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.window)));
        for (int c = -ws; c <= ws; ++c) {
          auto ctx = static_cast<std::ptrdiff_t>(pos) + c;
          if (c == 0 || ctx < 0 || ctx >= static_cast<std::ptrdiff_t>(ids.size())) continue;
          grad.setZero();
          auto step = [&](std::size_t target, float label) {
            auto col = output.col(static_cast<Eigen::Index>(target));
            float score = sigmoid(col.dot(hidden));
            float g = lr * (label - score);
            grad += g * col;
            col += g * hidden;
          };
          step(ids[static_cast<std::size_t>(ctx)], 1.0f);
          for (int k = 0; k < opt.negatives; ++k) {
            auto neg = neg_table[rng.below(neg_table.size())];
            if (neg == ids[static_cast<std::size_t>(ctx)]) continue;
            step(neg, 0.0f);
          }
          for (auto r : in_ids) m.input_.col(r) += grad;
        }
      }
    }
  }
  return m;
}

std::vector<float> SubwordModel::vector(std::string_view word) const {
  std::vector<float> out(options_.dim, 0.0f);
  if (word.empty() || input_.size() == 0) return out;
  auto ids = subword_ids(word);
  Eigen::Map<Eigen::VectorXf> v(out.data(), static_cast<Eigen::Index>(out.size()));
  for (auto r : ids) v += input_.col(r);
  v /= static_cast<float>(ids.size());
  return out;
}

void SubwordModel::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write sub-word model " + path.string());
  out << "#hqs-subword " << options_.dim << ' ' << options_.min_n << ' ' << options_.max_n << ' '
      << options_.buckets << ' ' << words_.size() << '\n';
  std::vector<std::pair<std::int64_t, std::string>> ordered;
  for (const auto& [w, i] : words_) ordered.emplace_back(i, w);
  std::sort(ordered.begin(), ordered.end());
  out.precision(9);
  auto row = [&](const std::string& key, Eigen::Index c) {
    out << key;
    for (Eigen::Index r = 0; r < input_.rows(); ++r) out << ' ' << input_(r, c);
    out << '\n';
  };
  for (const auto& [i, w] : ordered) row(w, i);
  const auto nwords = static_cast<Eigen::Index>(words_.size());
  for (std::size_t b = 0; b < options_.buckets; ++b)
    row("#bucket" + std::to_string(b), nwords + static_cast<Eigen::Index>(b));
}

SubwordModel SubwordModel::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sub-word model " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  std::size_t nwords = 0;
  SubwordModel m;
  hs >> magic >> m.options_.dim >> m.options_.min_n >> m.options_.max_n >> m.options_.buckets >> nwords;
  if (magic != "#hqs-subword" || !hs)
    throw ParseError(path.string(), 1, "not a sub-word model file (missing #hqs-subword header)");
  const auto dim = static_cast<Eigen::Index>(m.options_.dim);
  m.input_.resize(dim, static_cast<Eigen::Index>(nwords + m.options_.buckets));
  std::string line;
  for (std::size_t c = 0; c < nwords + m.options_.buckets; ++c) {
    if (!std::getline(in, line)) throw ParseError(path.string(), c + 2, "truncated sub-word model");
    auto f = split_ws(line);
    if (f.size() != m.options_.dim + 1) throw ParseError(path.string(), c + 2, "bad row width");
    if (c < nwords) m.words_.emplace(std::string(f[0]), static_cast<std::int64_t>(c));
    for (Eigen::Index r = 0; r < dim; ++r)
      m.input_(r, static_cast<Eigen::Index>(c)) = parse_float(f[static_cast<std::size_t>(r) + 1], path.string(), c + 2);
  }
  return m;
}

EmbeddingTable build_embedding_table(const Vocab& vocab, const WordVectors* word_vectors,
                                     std::size_t word_dim, const SubwordModel& subwords) {
  if (word_vectors && word_vectors->dim() != word_dim)
    throw Error("word vectors have dimension " + std::to_string(word_vectors->dim()) + ", expected " +
                std::to_string(word_dim));
  EmbeddingTable t;
  t.word_dim = word_dim;
  t.subword_dim = subwords.dim();
  const auto d = static_cast<Eigen::Index>(word_dim + subwords.dim());
  t.vectors = Eigen::MatrixXf::Zero(d, static_cast<Eigen::Index>(vocab.size()));
  std::size_t glove_hits = 0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (static_cast<int>(i) == Vocab::kBlank) continue;
    const auto& w = vocab.word(static_cast<int>(i));
    auto col = t.vectors.col(static_cast<Eigen::Index>(i));
    if (word_vectors) {
      if (const auto* g = word_vectors->find(w)) {
        for (std::size_t k = 0; k < word_dim; ++k) col(static_cast<Eigen::Index>(k)) = (*g)[k];
        ++glove_hits;
      }
    }
    auto s = subwords.vector(w);
    for (std::size_t k = 0; k < s.size(); ++k) col(static_cast<Eigen::Index>(word_dim + k)) = s[k];
  }
  spdlog::debug("embedding table: {} rows, {} with word-level vectors", vocab.size(), glove_hits);
  return t;
}

}  // namespace hqs::text
