#pragma once

// Dataset ingestion: RAD-style JSON, CLEF18-style delimited rows and the
// canonical JSON-lines format all normalize into QAItem records.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hqs::corpus {

enum class QType { kYesNo, kOthers, kUnknown };
enum class Source { kRad, kClef18 };
enum class Split { kTrain, kValidation, kTest };
enum class Format { kRadJson, kClef18Delimited, kCanonicalJsonl };

std::string_view to_string(QType t);
std::string_view to_string(Source s);
std::string_view to_string(Split s);
QType parse_qtype(std::string_view s);
Source parse_source(std::string_view s);
Split parse_split(std::string_view s);
Format parse_format(std::string_view s);

struct QAItem {
  std::string qa_id;
  std::string image_id;
  std::string image_path;
  std::string question;
  std::string answer;  // empty for unlabeled test items
  QType qtype = QType::kUnknown;
  Source source = Source::kRad;

  bool operator==(const QAItem&) const = default;
};

// Immutable ordered collection of QA records.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, Split split, std::vector<QAItem> items)
      : name_(std::move(name)), split_(split), items_(std::move(items)) {}

  const std::string& name() const { return name_; }
  Split split() const { return split_; }
  const std::vector<QAItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const QAItem& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::string name_;
  Split split_ = Split::kTrain;
  std::vector<QAItem> items_;
};

// Key names used to read RAD-style JSON objects.
struct KeyMapping {
  std::string qa_id = "qid";
  std::string question = "question";
  std::string answer = "answer";
  std::string image = "image_name";

  // Reads {"qa_id": ..., "question": ..., "answer": ..., "image": ...}; absent
  // keys keep their defaults.
  static KeyMapping load(const std::filesystem::path& path);
};

struct LoadOptions {
  KeyMapping keys;
  char delimiter = '\t';
  // Column roles for delimited rows; recognized names are qa_id, image_id,
  // question, answer. Unknown names are ignored columns.
  std::vector<std::string> columns = {"image_id", "question", "answer"};
  std::string image_extension = ".jpg";
  // Directory that relative image references resolve against. Defaults to the
  // directory containing the dataset file.
  std::optional<std::filesystem::path> image_root;
  bool validate_images = true;
  std::optional<std::string> name;
};

struct LoadResult {
  Dataset dataset;
  std::size_t skipped = 0;
};

LoadResult load_dataset(const std::filesystem::path& path, Format format, Split split,
                        const LoadOptions& options = {});

// Lowercase, punctuation replaced by spaces, whitespace collapsed and trimmed.
std::string normalize_answer(std::string_view answer);

// YES_NO iff the normalized answer is exactly "yes" or "no". Throws on an empty
// answer.
QType derive_qtype(std::string_view answer);

// Copy of the dataset with every labeled item's qtype set by derive_qtype.
Dataset with_gold_qtypes(const Dataset& d);

Dataset merge(const Dataset& a, const Dataset& b);

// First `n` items (or all of them).
Dataset head(const Dataset& d, std::size_t n);

void write_jsonl(const Dataset& d, std::ostream& out);
void write_jsonl(const Dataset& d, const std::filesystem::path& path);

}  // namespace hqs::corpus
