#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace hqs::text {

// Word-to-index dictionary with reserved leading entries. Index 0 is always
// the padding token.
class Vocab {
 public:
  static constexpr int kBlank = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kBlankToken = "<blank>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab() = default;
  Vocab(std::vector<std::string> words, std::size_t reserved, std::size_t max_size);

  // Reserved entries for question vocabularies: blank, unk, num, pos.
  static std::vector<std::string> question_reserved();
  // Reserved entries for answer vocabularies: blank, unk.
  static std::vector<std::string> answer_reserved();

  int index(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(int index) const { return words_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return words_.size(); }
  std::size_t reserved() const { return reserved_; }
  std::size_t max_size() const { return max_size_; }
  const std::vector<std::string>& words() const { return words_; }

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);

  bool operator==(const Vocab& o) const { return words_ == o.words_ && reserved_ == o.reserved_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  std::size_t reserved_ = 0;
  std::size_t max_size_ = 0;
};

// Keeps the `max_size` most frequent non-reserved words, ties broken
// lexicographically. `max_size == 0` with `unbounded` keeps everything.
Vocab build_vocab(const std::vector<std::vector<std::string>>& docs, std::size_t max_size,
                  const std::vector<std::string>& reserved);
Vocab build_unbounded_vocab(const std::vector<std::vector<std::string>>& docs,
                            const std::vector<std::string>& reserved);

struct IntSeq {
  std::vector<int> ids;
  bool operator==(const IntSeq&) const = default;
};

// OOV -> unk, right-padded with blank, truncated to `length`.
IntSeq encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t length);

}  // namespace hqs::text
