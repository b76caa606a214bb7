#include "hqs/error_report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hqs/error.hpp"

namespace hqs::harness {

namespace {

constexpr std::array<std::string_view, kErrorCategoryCount> kNames = {
    "SEMANTIC", "MODALITY_PLANE", "SPECIFICATION", "BOUNDARY_LOSS", "MISCELLANEOUS"};

std::string percent_text(std::int64_t x100) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(x100 / 100), static_cast<long long>(x100 % 100));
  return buf;
}

}  // namespace

std::string_view to_string(ErrorCategory c) { return kNames[static_cast<std::size_t>(c)]; }

ErrorCategory parse_error_category(std::string_view s) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (s == kNames[i]) return static_cast<ErrorCategory>(i);
  throw Error("unknown error category '" + std::string(s) + "'");
}

const std::array<ErrorCategory, kErrorCategoryCount>& all_error_categories() {
  static const std::array<ErrorCategory, kErrorCategoryCount> all = {
      ErrorCategory::kSemantic, ErrorCategory::kModalityPlane, ErrorCategory::kSpecification,
      ErrorCategory::kBoundaryLoss, ErrorCategory::kMiscellaneous};
  return all;
}

nlohmann::json ErrorRecord::to_json() const {
  return {{"qa_id", qa_id}, {"gold", gold}, {"predicted", predicted}, {"category", std::string(to_string(category))},
          {"note", note}};
}

ErrorRecord ErrorRecord::from_json(const nlohmann::json& j) {
  ErrorRecord r;
  r.qa_id = j.at("qa_id").get<std::string>();
  r.gold = j.value("gold", "");
  r.predicted = j.value("predicted", "");
  r.category = parse_error_category(j.at("category").get<std::string>());
  r.note = j.value("note", "");
  return r;
}

std::vector<ErrorRecord> read_error_records(std::istream& in, const std::string& source) {
  std::vector<ErrorRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ErrorRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

std::vector<ErrorRecord> read_error_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_error_records(in, path.string());
}

ErrorReport aggregate_errors(const std::vector<ErrorRecord>& records) {
  if (records.empty()) throw Error("no error records to aggregate");
  ErrorReport r;
  r.total = records.size();
  for (const auto& rec : records) ++r.counts[static_cast<std::size_t>(rec.category)];
  const auto n = static_cast<std::int64_t>(r.total);
  for (std::size_t i = 0; i < kErrorCategoryCount; ++i)
    r.percent_x100[i] = (20000 * static_cast<std::int64_t>(r.counts[i]) + n) / (2 * n);
  return r;
}

nlohmann::json ErrorReport::to_json() const {
  nlohmann::json cats = nlohmann::json::object();
  for (auto c : all_error_categories())
    cats[std::string(to_string(c))] = {{"count", count(c)}, {"percent", percent(c)}};
  return {{"total", total}, {"categories", cats}};
}

std::string ErrorReport::table() const {
  std::ostringstream os;
  for (auto c : all_error_categories()) {
    std::string name(to_string(c));
    name.resize(16, ' ');
    os << name << percent_text(percent_x100[static_cast<std::size_t>(c)]) << "%  (" << count(c) << ")\n";
  }
  os << "total           " << total << "\n";
  return os.str();
}

}  // namespace hqs::harness
