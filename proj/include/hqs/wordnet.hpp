#pragma once

// Read-only view of the noun half of a WordNet-format database
// (index.noun, data.noun, noun.exc) with Wu-Palmer similarity computed the
// same way NLTK does.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hqs::wordnet {

using Offset = std::uint32_t;

struct Synset {
  Offset offset = 0;
  std::string name;  // lemma.n.NN
  std::vector<std::string> lemmas;
  std::vector<Offset> hypernyms;  // @ and @i
  int min_depth = -1;
  int max_depth = -1;
};

class Taxonomy {
 public:
  // Throws IoError naming the first missing file.
  static Taxonomy load(const std::filesystem::path& dir);

  // Noun synsets for a surface form after exception lookup and suffix rules.
  std::vector<Offset> synsets(std::string_view word) const;
  bool contains(std::string_view word) const { return !synsets(word).empty(); }
  std::vector<std::string> morphy(std::string_view word) const;

  const Synset& synset(Offset off) const;
  std::size_t size() const { return synsets_.size(); }

  // nullopt when the two synsets share no ancestor.
  std::optional<double> wup(Offset a, Offset b) const;
  // Best symmetric wup over all sense pairs; nullopt when either word has no
  // noun sense.
  std::optional<double> word_similarity(std::string_view a, std::string_view b) const;

 private:
  std::unordered_map<Offset, int> distances_up(Offset from) const;
  int shortest_path(Offset from, Offset to) const;
  void compute_depths();

  std::unordered_map<Offset, Synset> synsets_;
  std::unordered_map<std::string, std::vector<Offset>> index_;
  std::unordered_map<std::string, std::vector<std::string>> exceptions_;
};

}  // namespace hqs::wordnet
