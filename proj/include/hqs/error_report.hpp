#pragma once

// Aggregation of hand-annotated error records. Categories are assigned by
// annotators; nothing here classifies errors automatically.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hqs::harness {

enum class ErrorCategory { kSemantic, kModalityPlane, kSpecification, kBoundaryLoss, kMiscellaneous };
inline constexpr std::size_t kErrorCategoryCount = 5;

std::string_view to_string(ErrorCategory c);
// Throws on anything outside the five names.
ErrorCategory parse_error_category(std::string_view s);
const std::array<ErrorCategory, kErrorCategoryCount>& all_error_categories();

struct ErrorRecord {
  std::string qa_id;
  std::string gold;
  std::string predicted;
  ErrorCategory category = ErrorCategory::kMiscellaneous;
  std::string note;

  nlohmann::json to_json() const;
  static ErrorRecord from_json(const nlohmann::json& j);
};

// JSON lines, one record per line; blank lines are skipped. Throws ParseError
// with the line number on a malformed record or unknown category.
std::vector<ErrorRecord> read_error_records(std::istream& in, const std::string& source = "<stream>");
std::vector<ErrorRecord> read_error_records(const std::filesystem::path& path);

struct ErrorReport {
  std::size_t total = 0;
  std::array<std::size_t, kErrorCategoryCount> counts{};
  // Hundredths of a percent, rounded half up from the exact ratio.
  std::array<std::int64_t, kErrorCategoryCount> percent_x100{};

  double percent(ErrorCategory c) const { return static_cast<double>(percent_x100[static_cast<std::size_t>(c)]) / 100.0; }
  std::size_t count(ErrorCategory c) const { return counts[static_cast<std::size_t>(c)]; }
  nlohmann::json to_json() const;
  std::string table() const;
};

ErrorReport aggregate_errors(const std::vector<ErrorRecord>& records);

}  // namespace hqs::harness
