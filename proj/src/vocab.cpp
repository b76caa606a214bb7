#include "hqs/vocab.hpp"

#include <algorithm>
#include <map>

#include "hqs/error.hpp"
#include "hqs/text.hpp"

namespace hqs::text {

Vocab::Vocab(std::vector<std::string> words, std::size_t reserved, std::size_t max_size)
    : words_(std::move(words)), reserved_(reserved), max_size_(max_size) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    auto [it, inserted] = index_.emplace(words_[i], static_cast<int>(i));
    if (!inserted) throw Error("duplicate vocabulary entry '" + words_[i] + "'");
  }
}

std::vector<std::string> Vocab::question_reserved() {
  return {std::string(kBlankToken), std::string(kUnkToken), std::string(kNumToken),
          std::string(kPosToken)};
}

std::vector<std::string> Vocab::answer_reserved() {
  return {std::string(kBlankToken), std::string(kUnkToken)};
}

int Vocab::index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

nlohmann::json Vocab::to_json() const {
  return {{"words", words_}, {"reserved", reserved_}, {"max_size", max_size_}};
}

Vocab Vocab::from_json(const nlohmann::json& j) {
  return Vocab(j.at("words").get<std::vector<std::string>>(), j.at("reserved").get<std::size_t>(),
               j.at("max_size").get<std::size_t>());
}

namespace {

std::vector<std::string> ranked_words(const std::vector<std::vector<std::string>>& docs,
                                      const std::vector<std::string>& reserved) {
  std::map<std::string, std::size_t> freq;
  for (const auto& d : docs)
    for (const auto& w : d)
      if (std::find(reserved.begin(), reserved.end(), w) == reserved.end()) ++freq[w];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // map iteration is lexicographic, so a stable sort by count keeps ties ordered
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [w, c] : ranked) out.push_back(w);
  return out;
}

}  // namespace

Vocab build_vocab(const std::vector<std::vector<std::string>>& docs, std::size_t max_size,
                  const std::vector<std::string>& reserved) {
  if (max_size < 1) throw Error("vocabulary max_size must be at least 1");
  if (docs.empty()) throw Error("cannot build a vocabulary from zero documents");
  auto ranked = ranked_words(docs, reserved);
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> words = reserved;
  words.insert(words.end(), ranked.begin(), ranked.end());
  return Vocab(std::move(words), reserved.size(), max_size);
}

Vocab build_unbounded_vocab(const std::vector<std::vector<std::string>>& docs,
                            const std::vector<std::string>& reserved) {
  if (docs.empty()) throw Error("cannot build a vocabulary from zero documents");
  auto ranked = ranked_words(docs, reserved);
  std::vector<std::string> words = reserved;
  words.insert(words.end(), ranked.begin(), ranked.end());
  auto n = ranked.size();
  return Vocab(std::move(words), reserved.size(), n);
}

IntSeq encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t length) {
  IntSeq s;
  s.ids.assign(length, Vocab::kBlank);
  for (std::size_t i = 0; i < std::min(length, tokens.size()); ++i) s.ids[i] = vocab.index(tokens[i]);
  return s;
}

}  // namespace hqs::text
