#include "hqs/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "hqs/error.hpp"
#include "hqs/stopword_data.hpp"

namespace hqs::text {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

StopwordList StopwordList::parse(std::string_view text) {
  std::unordered_set<std::string> words;
  std::string line;
  std::istringstream in{std::string(text)};
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    words.insert(line.substr(b, e - b + 1));
  }
  return StopwordList(std::move(words));
}

StopwordList StopwordList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const StopwordList& StopwordList::english() {
  static const StopwordList list = parse(detail::kEnglishStopwords);
  return list;
}

const StopwordList& StopwordList::question() {
  static const StopwordList list = parse(detail::kQuestionStopwords);
  return list;
}

RuleLemmatizer::RuleLemmatizer() {
  const std::pair<const char*, const char*> table[] = {
      // be / have / do
      {"is", "be"}, {"are", "be"}, {"was", "be"}, {"were", "be"}, {"am", "be"},
      {"been", "be"}, {"being", "be"}, {"has", "have"}, {"had", "have"},
      {"having", "have"}, {"does", "do"}, {"did", "do"}, {"done", "do"}, {"doing", "do"},
      // other frequent irregular verbs
      {"shows", "show"}, {"showed", "show"}, {"shown", "show"}, {"showing", "show"},
      {"seen", "see"}, {"saw", "see"}, {"sees", "see"}, {"taken", "take"}, {"took", "take"},
      {"takes", "take"}, {"lies", "lie"}, {"lying", "lie"}, {"got", "get"}, {"gets", "get"},
      // irregular plurals common in radiology text
      {"men", "man"}, {"women", "woman"}, {"children", "child"}, {"feet", "foot"},
      {"teeth", "tooth"}, {"vertebrae", "vertebra"}, {"bronchi", "bronchus"},
      {"diagnoses", "diagnosis"}, {"metastases", "metastasis"}, {"thrombi", "thrombus"},
      {"calculi", "calculus"}, {"axes", "axis"}, {"emboli", "embolus"}, {"nuclei", "nucleus"},
      // words ending in s that are not plurals
      {"yes", "yes"}, {"its", "its"}, {"his", "his"}, {"hers", "hers"}, {"ours", "ours"},
      {"yours", "yours"}, {"theirs", "theirs"}, {"always", "always"}, {"perhaps", "perhaps"},
      {"sometimes", "sometimes"}, {"towards", "towards"}, {"afterwards", "afterwards"},
      {"besides", "besides"}, {"thus", "thus"}, {"plus", "plus"}, {"versus", "versus"},
      {"lens", "lens"}, {"series", "series"}, {"species", "species"}, {"diabetes", "diabetes"},
      {"ascites", "ascites"}, {"herpes", "herpes"}, {"feces", "feces"}, {"measles", "measles"},
      {"meninges", "meninges"}, {"biceps", "biceps"}, {"triceps", "triceps"},
  };
  for (const auto& [from, to] : table) exceptions_.emplace(from, to);
}

const RuleLemmatizer& RuleLemmatizer::instance() {
  static const RuleLemmatizer lem;
  return lem;
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string RuleLemmatizer::lemmatize(std::string_view word) const {
  std::string w(word);
  if (auto it = exceptions_.find(w); it != exceptions_.end()) return it->second;
  if (w.size() <= 3 || !std::all_of(w.begin(), w.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c));
      }))
    return w;
  if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses") || ends_with(w, "xes") || ends_with(w, "zes") ||
      ends_with(w, "ches") || ends_with(w, "shes"))
    return w.substr(0, w.size() - 2);
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is") || ends_with(w, "as"))
    return w;
  if (ends_with(w, "s")) return w.substr(0, w.size() - 1);
  return w;
}

bool is_number(std::string_view tok) {
  return !tok.empty() &&
         std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool is_alphanumeric_mix(std::string_view tok) {
  bool digit = false, alpha = false;
  for (char ch : tok) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isdigit(c)) digit = true;
    else if (std::isalpha(c)) alpha = true;
    else return false;
  }
  return digit && alpha;
}

std::vector<std::string> QuestionPreprocessor::operator()(std::string_view question) const {
  std::vector<std::string> out;
  for (auto& tok : tokenize(question)) {
    if (is_number(tok)) {
      out.emplace_back(kNumToken);
      continue;
    }
    if (is_alphanumeric_mix(tok)) {
      out.emplace_back(kPosToken);
      continue;
    }
    auto lemma = lemmatizer->lemmatize(tok);
    if (stopwords->contains(lemma) || stopwords->contains(tok)) continue;
    out.push_back(std::move(lemma));
  }
  return out;
}

std::vector<std::string> preprocess_question(std::string_view question) {
  return QuestionPreprocessor{}(question);
}

std::vector<std::string> answer_tokens(std::string_view answer) { return tokenize(answer); }

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace hqs::text
