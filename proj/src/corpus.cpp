#include "hqs/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "hqs/error.hpp"

namespace hqs::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(QType t) {
  switch (t) {
    case QType::kYesNo: return "YES_NO";
    case QType::kOthers: return "OTHERS";
    case QType::kUnknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::string_view to_string(Source s) { return s == Source::kRad ? "RAD" : "CLEF18"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "TRAIN";
    case Split::kValidation: return "VALIDATION";
    case Split::kTest: return "TEST";
  }
  return "TRAIN";
}

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

QType parse_qtype(std::string_view s) {
  auto u = upper(s);
  if (u == "YES_NO" || u == "YES/NO") return QType::kYesNo;
  if (u == "OTHERS") return QType::kOthers;
  if (u == "UNKNOWN" || u.empty()) return QType::kUnknown;
  throw Error("unknown qtype '" + std::string(s) + "'");
}

Source parse_source(std::string_view s) {
  auto u = upper(s);
  if (u == "RAD") return Source::kRad;
  if (u == "CLEF18") return Source::kClef18;
  throw Error("unknown source '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  auto u = upper(s);
  if (u == "TRAIN") return Split::kTrain;
  if (u == "VALIDATION" || u == "VAL") return Split::kValidation;
  if (u == "TEST") return Split::kTest;
  throw Error("unknown split '" + std::string(s) + "'");
}

Format parse_format(std::string_view s) {
  auto u = upper(s);
  if (u == "RAD_JSON") return Format::kRadJson;
  if (u == "CLEF18_DELIMITED") return Format::kClef18Delimited;
  if (u == "CANONICAL" || u == "JSONL") return Format::kCanonicalJsonl;
  throw Error("unknown dataset format '" + std::string(s) + "'");
}

KeyMapping KeyMapping::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open key mapping file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("malformed key mapping " + path.string() + ": " + e.what());
  }
  KeyMapping m;
  m.qa_id = j.value("qa_id", m.qa_id);
  m.question = j.value("question", m.question);
  m.answer = j.value("answer", m.answer);
  m.image = j.value("image", m.image);
  return m;
}

std::string normalize_answer(std::string_view answer) {
  std::string out;
  out.reserve(answer.size());
  bool pending_space = false;
  for (char ch : answer) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

QType derive_qtype(std::string_view answer) {
  if (trim(answer).empty()) throw Error("cannot derive question type from an empty answer");
  auto n = normalize_answer(answer);
  return (n == "yes" || n == "no") ? QType::kYesNo : QType::kOthers;
}

Dataset with_gold_qtypes(const Dataset& d) {
  auto items = d.items();
  for (auto& it : items)
    if (!trim(it.answer).empty()) it.qtype = derive_qtype(it.answer);
  return Dataset(d.name(), d.split(), std::move(items));
}

Dataset merge(const Dataset& a, const Dataset& b) {
  if (a.split() != b.split())
    throw Error("cannot merge datasets of different splits (" + std::string(to_string(a.split())) +
                " vs " + std::string(to_string(b.split())) + ")");
  auto items = a.items();
  items.insert(items.end(), b.items().begin(), b.items().end());
  return Dataset(a.name() + "+" + b.name(), a.split(), std::move(items));
}

Dataset head(const Dataset& d, std::size_t n) {
  n = std::min(n, d.size());
  std::vector<QAItem> items(d.items().begin(), d.items().begin() + static_cast<std::ptrdiff_t>(n));
  return Dataset(d.name(), d.split(), std::move(items));
}

namespace {

struct Loader {
  fs::path path;
  const LoadOptions& opt;
  fs::path root;
  std::vector<QAItem> items;
  std::size_t skipped = 0;

  std::string resolve(const std::string& ref) const {
    fs::path p(ref);
    if (p.is_relative()) p = root / p;
    return p.lexically_normal().string();
  }

  void add(QAItem item, std::size_t line) {
    if (trim(item.question).empty())
      throw ParseError(path.string(), line, "empty question");
    if (opt.validate_images) {
      std::error_code ec;
      if (!fs::is_regular_file(item.image_path, ec)) {
        if (skipped < 5)
          spdlog::warn("{}:{}: image '{}' not found, skipping record", path.string(), line, item.image_path);
        ++skipped;
        return;
      }
    }
    items.push_back(std::move(item));
  }
};

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

QAItem rad_record(const json& obj, const Loader& ld, std::size_t index, std::size_t line) {
  const auto& k = ld.opt.keys;
  if (!obj.is_object()) throw ParseError(ld.path.string(), line, "record is not a JSON object");
  for (const auto* key : {&k.question, &k.image}) {
    if (!obj.contains(*key))
      throw ParseError(ld.path.string(), line, "record is missing key '" + *key + "'");
  }
  QAItem it;
  it.qa_id = obj.contains(k.qa_id) ? scalar_text(obj.at(k.qa_id)) : std::to_string(index);
  auto image = scalar_text(obj.at(k.image));
  it.image_id = fs::path(image).filename().string();
  it.image_path = ld.resolve(image);
  it.question = scalar_text(obj.at(k.question));
  if (obj.contains(k.answer)) it.answer = trim(scalar_text(obj.at(k.answer)));
  it.source = Source::kRad;
  return it;
}

QAItem canonical_record(const json& obj, const Loader& ld, std::size_t line) {
  try {
    QAItem it;
    it.qa_id = scalar_text(obj.at("qa_id"));
    it.image_id = obj.at("image_id").get<std::string>();
    it.image_path = ld.resolve(obj.at("image_path").get<std::string>());
    it.question = obj.at("question").get<std::string>();
    it.answer = obj.value("answer", std::string{});
    it.qtype = parse_qtype(obj.value("qtype", std::string{"UNKNOWN"}));
    it.source = parse_source(obj.at("source").get<std::string>());
    return it;
  } catch (const json::exception& e) {
    throw ParseError(ld.path.string(), line, e.what());
  } catch (const Error& e) {
    throw ParseError(ld.path.string(), line, e.what());
  }
}

void load_json(Loader& ld, const std::string& text, bool canonical) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return;
  if (text[first] == '[') {
    json arr;
    try {
      arr = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(ld.path.string(), line_of_offset(text, e.byte), e.what());
    }
    // Array elements carry no position; report the element ordinal instead.
    for (std::size_t i = 0; i < arr.size(); ++i)
      ld.add(canonical ? canonical_record(arr[i], ld, i + 1) : rad_record(arr[i], ld, i, i + 1), i + 1);
    return;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0, index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(ld.path.string(), lineno, e.what());
    }
    ld.add(canonical ? canonical_record(obj, ld, lineno) : rad_record(obj, ld, index, lineno), lineno);
    ++index;
  }
}

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void load_delimited(Loader& ld, const std::string& text) {
  const auto& cols = ld.opt.columns;
  auto role = [&](std::string_view name) -> std::optional<std::size_t> {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) return std::nullopt;
    return static_cast<std::size_t>(it - cols.begin());
  };
  auto c_image = role("image_id"), c_question = role("question"), c_answer = role("answer"),
       c_id = role("qa_id");
  if (!c_image || !c_question) throw Error("delimited columns must include image_id and question");

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0, index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_row(line, ld.opt.delimiter);
    std::size_t required = std::max(*c_image, *c_question) + 1;
    if (fields.size() < required)
      throw ParseError(ld.path.string(), lineno,
                       "expected at least " + std::to_string(required) + " fields, got " +
                           std::to_string(fields.size()));
    QAItem it;
    it.qa_id = (c_id && *c_id < fields.size()) ? trim(fields[*c_id]) : std::to_string(index);
    it.image_id = trim(fields[*c_image]);
    it.image_path = ld.resolve(it.image_id + ld.opt.image_extension);
    it.question = trim(fields[*c_question]);
    if (c_answer && *c_answer < fields.size()) it.answer = trim(fields[*c_answer]);
    it.source = Source::kClef18;
    ld.add(std::move(it), lineno);
    ++index;
  }
}

std::string default_name(const fs::path& path, Format format) {
  switch (format) {
    case Format::kRadJson: return "RAD";
    case Format::kClef18Delimited: return "CLEF18";
    case Format::kCanonicalJsonl: return path.stem().string();
  }
  return path.stem().string();
}

}  // namespace

LoadResult load_dataset(const fs::path& path, Format format, Split split, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  Loader ld{path, options, options.image_root.value_or(path.parent_path()), {}, 0};
  switch (format) {
    case Format::kRadJson: load_json(ld, text, false); break;
    case Format::kCanonicalJsonl: load_json(ld, text, true); break;
    case Format::kClef18Delimited: load_delimited(ld, text); break;
  }
  if (ld.skipped > 0)
    spdlog::warn("{}: skipped {} record(s) with missing images", path.string(), ld.skipped);
  return {Dataset(options.name.value_or(default_name(path, format)), split, std::move(ld.items)),
          ld.skipped};
}

void write_jsonl(const Dataset& d, std::ostream& out) {
  for (const auto& it : d.items()) {
    json j = {{"qa_id", it.qa_id},         {"image_id", it.image_id},
              {"image_path", it.image_path}, {"question", it.question},
              {"answer", it.answer},         {"qtype", std::string(to_string(it.qtype))},
              {"source", std::string(to_string(it.source))}};
    out << j.dump() << '\n';
  }
}

void write_jsonl(const Dataset& d, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_jsonl(d, out);
}

}  // namespace hqs::corpus
