#include <gtest/gtest.h>

#include <json.hpp>

#include "hqs/error.hpp"
#include "hqs/wordnet.hpp"
#include "test_support.hpp"

using namespace hqs;
using namespace hqs::wordnet;

namespace {

const Taxonomy& mini() {
  static const auto t = Taxonomy::load(hqs::testing::data_dir() / "wordnet_mini");
  return t;
}

const nlohmann::json& golden() {
  static const auto g =
      nlohmann::json::parse(hqs::testing::read_file(hqs::testing::data_dir() / "wordnet_golden.json"));
  return g;
}

}  // namespace

TEST(WordNet, LoadsEverySynset) {
  EXPECT_EQ(mini().size(), golden().at("synset_count").get<std::size_t>());
}

TEST(WordNet, MissingDirectoryNamesFile) {
  try {
    Taxonomy::load("/no/wordnet/dict");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/wordnet/dict"), std::string::npos);
  }
}

TEST(WordNet, SynsetsMatchNltk) {
  for (const auto& g : golden().at("synsets")) {
    const auto word = g.at("word").get<std::string>();
    const auto offsets = mini().synsets(word);
    const auto want = g.at("offsets").get<std::vector<Offset>>();
    EXPECT_EQ(offsets, want) << word;
    const auto names = g.at("names").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < std::min(offsets.size(), names.size()); ++i)
      EXPECT_EQ(mini().synset(offsets[i]).name, names[i]);
  }
}

TEST(WordNet, MorphyMatchesNltk) {
  for (const auto& g : golden().at("morphy")) {
    const auto form = g.at("form").get<std::string>();
    EXPECT_EQ(mini().morphy(form), g.at("lemmas").get<std::vector<std::string>>()) << form;
  }
}

TEST(WordNet, SynsetWupMatchesNltk) {
  for (const auto& g : golden().at("synset_wup")) {
    auto v = mini().wup(g.at("offset_a").get<Offset>(), g.at("offset_b").get<Offset>());
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(*v, g.at("value").get<double>(), 1e-12) << g.at("a") << " " << g.at("b");
  }
}

TEST(WordNet, WordSimilarityMatchesNltk) {
  for (const auto& g : golden().at("word_similarity")) {
    const auto a = g.at("a").get<std::string>(), b = g.at("b").get<std::string>();
    auto v = mini().word_similarity(a, b);
    ASSERT_TRUE(v.has_value()) << a << " " << b;
    EXPECT_NEAR(*v, g.at("value").get<double>(), 1e-12) << a << " " << b;
    EXPECT_EQ(*v, *mini().word_similarity(b, a));
  }
  EXPECT_FALSE(mini().word_similarity("lung", "qqqq").has_value());
  EXPECT_FALSE(mini().contains("the"));
}
