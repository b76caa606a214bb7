#include "hqs/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hqs/error.hpp"

namespace hqs::harness {

std::string_view to_string(Mode m) { return m == Mode::kWithQs ? "WITH_QS" : "WITHOUT_QS"; }

Mode parse_mode(std::string_view s) {
  if (s == "WITH_QS" || s == "with_qs" || s == "with") return Mode::kWithQs;
  if (s == "WITHOUT_QS" || s == "without_qs" || s == "without") return Mode::kWithoutQs;
  throw Error("unknown mode '" + std::string(s) + "' (expected WITH_QS or WITHOUT_QS)");
}

std::string_view to_string(DatasetChoice d) {
  switch (d) {
    case DatasetChoice::kRad: return "rad";
    case DatasetChoice::kClef18: return "clef18";
    case DatasetChoice::kCombined: return "combined";
  }
  return "rad";
}

DatasetChoice parse_dataset(std::string_view s) {
  if (s == "rad" || s == "RAD") return DatasetChoice::kRad;
  if (s == "clef18" || s == "CLEF18") return DatasetChoice::kClef18;
  if (s == "combined" || s == "clef18+rad") return DatasetChoice::kCombined;
  throw Error("unknown dataset '" + std::string(s) + "' (expected rad, clef18 or combined)");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("invalid value '" + v + "' for " + key);
  return out;
}

double real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw Error("");
    return d;
  } catch (const std::exception&) {
    throw Error("invalid value '" + v + "' for " + key);
  }
}

bool boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("invalid boolean '" + v + "' for " + key);
}

// shortest text that round-trips
std::string fmt(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

std::string join_words(const std::vector<std::string>& w) {
  std::string out;
  for (const auto& s : w) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::vector<std::string> split_words(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string w;
  while (std::getline(ss, w, ',')) {
    w = trim(w);
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

std::string delimiter_text(char c) { return c == '\t' ? "\\t" : std::string(1, c); }

char parse_delimiter(const std::string& v) {
  if (v == "\\t" || v == "tab") return '\t';
  if (v.size() == 1) return v[0];
  throw Error("delimiter must be a single character or \\t");
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define STR_FIELD(k, member) \
  Field { k, [](const RunConfig& c) { return c.member; }, [](RunConfig& c, const std::string& v) { c.member = v; } }
#define INT_FIELD(k, member, T)                                                        \
  Field {                                                                              \
    k, [](const RunConfig& c) { return std::to_string(c.member); },                    \
        [](RunConfig& c, const std::string& v) { c.member = number<T>(k, v); }         \
  }
#define REAL_FIELD(k, member) \
  Field { k, [](const RunConfig& c) { return fmt(c.member); }, [](RunConfig& c, const std::string& v) { c.member = real(k, v); } }
#define BOOL_FIELD(k, member)                                                   \
  Field {                                                                       \
    k, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& v) { c.member = boolean(k, v); }    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      INT_FIELD("seed", seed, std::uint64_t),
      Field{"mode", [](const RunConfig& c) { return std::string(to_string(c.mode)); },
            [](RunConfig& c, const std::string& v) { c.mode = parse_mode(v); }},
      Field{"dataset", [](const RunConfig& c) { return std::string(to_string(c.dataset)); },
            [](RunConfig& c, const std::string& v) { c.dataset = parse_dataset(v); }},
      STR_FIELD("rad.train", rad_train),
      STR_FIELD("rad.test", rad_test),
      STR_FIELD("rad.image_root", rad_image_root),
      STR_FIELD("rad.keys", rad_keys),
      STR_FIELD("clef18.train", clef_train),
      STR_FIELD("clef18.val", clef_val),
      STR_FIELD("clef18.test", clef_test),
      STR_FIELD("clef18.image_root", clef_image_root),
      Field{"clef18.delimiter", [](const RunConfig& c) { return delimiter_text(c.clef_delimiter); },
            [](RunConfig& c, const std::string& v) { c.clef_delimiter = parse_delimiter(v); }},
      STR_FIELD("clef18.image_extension", clef_image_extension),
      Field{"qs.identifier_words", [](const RunConfig& c) { return join_words(c.qs.identifier_words); },
            [](RunConfig& c, const std::string& v) { c.qs.identifier_words = split_words(v); }},
      INT_FIELD("qs.tfidf_words", qs.tfidf_words, std::size_t),
      Field{"qs.idf_mode", [](const RunConfig& c) { return std::string(qs::to_string(c.qs.idf_mode)); },
            [](RunConfig& c, const std::string& v) { c.qs.idf_mode = qs::parse_idf_mode(v); }},
      REAL_FIELD("qs.c", qs.svm.c),
      INT_FIELD("qs.epochs", qs.svm.epochs, int),
      INT_FIELD("text.question_vocab_size", question_vocab_size, std::size_t),
      STR_FIELD("text.glove", glove_path),
      INT_FIELD("text.word_dim", word_dim, std::size_t),
      INT_FIELD("text.subword_dim", subword.dim, std::size_t),
      INT_FIELD("text.subword_min_n", subword.min_n, int),
      INT_FIELD("text.subword_max_n", subword.max_n, int),
      INT_FIELD("text.subword_buckets", subword.buckets, std::size_t),
      INT_FIELD("text.subword_epochs", subword.epochs, int),
      BOOL_FIELD("text.train_embeddings", train_embeddings),
      INT_FIELD("net.seq_len", net.seq_len, int),
      INT_FIELD("net.answer_len", net.answer_len, int),
      INT_FIELD("net.hidden", net.hidden, int),
      INT_FIELD("net.image_dim", net.image_dim, int),
      INT_FIELD("net.step_hidden", net.step_hidden, int),
      REAL_FIELD("net.dropout", net.dropout),
      REAL_FIELD("net.bn_momentum", net.bn_momentum),
      REAL_FIELD("net.bn_eps", net.bn_eps),
      INT_FIELD("train.epochs", epochs, int),
      INT_FIELD("train.batch_size", batch_size, int),
      REAL_FIELD("train.learning_rate", learning_rate),
      STR_FIELD("train.select", select),
      STR_FIELD("backbone", backbone),
      STR_FIELD("cache_dir", cache_dir),
      STR_FIELD("wordnet", wordnet_dir),
  };
  return f;
}

}  // namespace

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      RunConfig next = *this;  // a rejected value leaves this config untouched
      f.set(next, value);
      next.net.embed_dim = static_cast<int>(next.word_dim + next.subword.dim);
      if (next.select != "final" && next.select != "best_val_bleu")
        throw Error("train.select must be final or best_val_bleu");
      *this = std::move(next);
      return;
    }
  }
  throw Error("unknown config key '" + key + "'");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
  RunConfig c;
  std::size_t lineno = 0, start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    try {
      c.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (end == text.size()) break;
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << to_text();
}

fusion::TrainConfig RunConfig::train_config() const {
  fusion::TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.seed = seed;
  t.train_embeddings = train_embeddings;
  return t;
}

}  // namespace hqs::harness
