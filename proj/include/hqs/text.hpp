#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hqs::text {

// Lowercases ASCII, turns every ASCII punctuation character into a token
// boundary and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  static StopwordList parse(std::string_view newline_separated);
  static StopwordList load(const std::string& path);
  // Pinned English list used at evaluation time.
  static const StopwordList& english();
  // Short list removed from questions before encoding.
  static const StopwordList& question();

  bool contains(std::string_view w) const { return words_.count(std::string(w)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  virtual std::string lemmatize(std::string_view word) const = 0;
};

// Exception table for irregular forms plus conservative plural-noun suffix
// rules. Words it does not recognize are returned unchanged.
class RuleLemmatizer final : public Lemmatizer {
 public:
  RuleLemmatizer();
  std::string lemmatize(std::string_view word) const override;

  static const RuleLemmatizer& instance();

 private:
  std::unordered_map<std::string, std::string> exceptions_;
};

inline constexpr std::string_view kNumToken = "num";
inline constexpr std::string_view kPosToken = "pos";

bool is_number(std::string_view tok);
bool is_alphanumeric_mix(std::string_view tok);

struct QuestionPreprocessor {
  const Lemmatizer* lemmatizer = &RuleLemmatizer::instance();
  const StopwordList* stopwords = &StopwordList::question();

  // lowercase -> tokenize -> lemmatize -> drop stopwords -> digits to "num",
  // letter/digit mixtures to "pos".
  std::vector<std::string> operator()(std::string_view question) const;
};

std::vector<std::string> preprocess_question(std::string_view question);

// Answer targets for the sequence head: tokenized and lowercased only.
std::vector<std::string> answer_tokens(std::string_view answer);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

}  // namespace hqs::text
