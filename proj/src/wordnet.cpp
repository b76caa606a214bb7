#include "hqs/wordnet.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "hqs/error.hpp"

namespace hqs::wordnet {

namespace fs = std::filesystem;

namespace {

std::ifstream open_or_throw(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("WordNet file not found: " + p.string());
  return in;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

constexpr std::array<std::pair<std::string_view, std::string_view>, 9> kNounRules = {{
    {"s", ""}, {"ses", "s"}, {"ves", "f"}, {"xes", "x"}, {"zes", "z"},
    {"ches", "ch"}, {"shes", "sh"}, {"men", "man"}, {"ies", "y"},
}};

}  // namespace

Taxonomy Taxonomy::load(const fs::path& dir) {
  Taxonomy t;
  {
    auto in = open_or_throw(dir / "index.noun");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == ' ') continue;
      std::istringstream ss(line);
      std::string lemma, pos;
      std::size_t n_synsets = 0, n_ptrs = 0;
      ss >> lemma >> pos >> n_synsets >> n_ptrs;
      std::string skip;
      for (std::size_t i = 0; i < n_ptrs; ++i) ss >> skip;
      ss >> skip >> skip;  // sense_cnt, tagsense_cnt
      auto& offs = t.index_[lemma];
      for (std::size_t i = 0; i < n_synsets; ++i) {
        Offset off = 0;
        if (!(ss >> off)) throw ParseError((dir / "index.noun").string(), 0, "truncated entry for " + lemma);
        offs.push_back(off);
      }
    }
  }
  {
    const auto path = dir / "data.noun";
    auto in = open_or_throw(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == ' ') continue;
      std::istringstream ss(line);
      Synset s;
      std::string lexfile, sstype, wcnt_hex;
      ss >> s.offset >> lexfile >> sstype >> wcnt_hex;
      if (!ss) throw ParseError(path.string(), lineno, "malformed synset header");
      const auto wcnt = std::stoul(wcnt_hex, nullptr, 16);
      for (unsigned long i = 0; i < wcnt; ++i) {
        std::string word, lexid;
        ss >> word >> lexid;
        s.lemmas.push_back(word);
      }
      std::size_t pcnt = 0;
      ss >> pcnt;
      for (std::size_t i = 0; i < pcnt; ++i) {
        std::string sym, pos, st;
        Offset target = 0;
        ss >> sym >> target >> pos >> st;
        if ((sym == "@" || sym == "@i") && pos == "n") s.hypernyms.push_back(target);
      }
      if (!ss) throw ParseError(path.string(), lineno, "malformed synset record");
      t.synsets_.emplace(s.offset, std::move(s));
    }
  }
  {
    auto in = open_or_throw(dir / "noun.exc");
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string inflected, base;
      if (!(ss >> inflected)) continue;
      auto& bases = t.exceptions_[inflected];
      while (ss >> base) bases.push_back(base);
    }
  }
  for (auto& [off, s] : t.synsets_) {
    if (s.lemmas.empty()) continue;
    const auto lemma = lower(s.lemmas.front());
    std::size_t sense = 0;
    if (auto it = t.index_.find(lemma); it != t.index_.end()) {
      auto pos = std::find(it->second.begin(), it->second.end(), off);
      if (pos != it->second.end()) sense = static_cast<std::size_t>(pos - it->second.begin());
    }
    char num[8];
    std::snprintf(num, sizeof num, "%02zu", sense + 1);
    s.name = lemma + ".n." + num;
  }
  t.compute_depths();
  return t;
}

void Taxonomy::compute_depths() {
  std::function<void(Synset&)> visit = [&](Synset& s) {
    if (s.min_depth >= 0) return;
    if (s.hypernyms.empty()) {
      s.min_depth = s.max_depth = 0;
      return;
    }
    int lo = std::numeric_limits<int>::max(), hi = 0;
    for (auto h : s.hypernyms) {
      auto it = synsets_.find(h);
      if (it == synsets_.end()) continue;
      visit(it->second);
      lo = std::min(lo, it->second.min_depth);
      hi = std::max(hi, it->second.max_depth);
    }
    if (lo == std::numeric_limits<int>::max()) lo = -1;
    s.min_depth = lo + 1;
    s.max_depth = hi + 1;
  };
  for (auto& [off, s] : synsets_) visit(s);
}

const Synset& Taxonomy::synset(Offset off) const {
  auto it = synsets_.find(off);
  if (it == synsets_.end()) throw Error("unknown synset offset " + std::to_string(off));
  return it->second;
}

std::vector<std::string> Taxonomy::morphy(std::string_view word) const {
  const std::string form(word);
  std::vector<std::string> candidates{form};
  if (auto it = exceptions_.find(form); it != exceptions_.end()) {
    candidates.insert(candidates.end(), it->second.begin(), it->second.end());
  } else {
    for (auto [old, repl] : kNounRules)
      if (form.size() >= old.size() && form.compare(form.size() - old.size(), old.size(), old) == 0)
        candidates.push_back(form.substr(0, form.size() - old.size()) + std::string(repl));
  }
  std::vector<std::string> out;
  for (auto& c : candidates)
    if (index_.count(c) && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  return out;
}

std::vector<Offset> Taxonomy::synsets(std::string_view word) const {
  std::vector<Offset> out;
  for (const auto& form : morphy(lower(std::string(word))))
    for (auto off : index_.at(form))
      if (synsets_.count(off)) out.push_back(off);
  return out;
}

std::unordered_map<Offset, int> Taxonomy::distances_up(Offset from) const {
  std::unordered_map<Offset, int> dist;
  std::deque<std::pair<Offset, int>> queue{{from, 0}};
  while (!queue.empty()) {
    auto [s, d] = queue.front();
    queue.pop_front();
    if (dist.count(s)) continue;
    dist[s] = d;
    auto it = synsets_.find(s);
    if (it == synsets_.end()) continue;
    for (auto h : it->second.hypernyms) queue.emplace_back(h, d + 1);
  }
  return dist;
}

int Taxonomy::shortest_path(Offset from, Offset to) const {
  if (from == to) return 0;
  auto d1 = distances_up(from), d2 = distances_up(to);
  int best = std::numeric_limits<int>::max();
  for (auto [s, a] : d1)
    if (auto it = d2.find(s); it != d2.end()) best = std::min(best, a + it->second);
  return best == std::numeric_limits<int>::max() ? -1 : best;
}

std::optional<double> Taxonomy::wup(Offset a, Offset b) const {
  auto da = distances_up(a), db = distances_up(b);
  std::vector<Offset> common;
  for (auto [s, d] : da)
    if (db.count(s)) common.push_back(s);
  if (common.empty()) return std::nullopt;
  int deepest = -1;
  for (auto s : common) deepest = std::max(deepest, synset(s).min_depth);
  std::vector<Offset> lch;
  for (auto s : common)
    if (synset(s).min_depth == deepest) lch.push_back(s);
  std::sort(lch.begin(), lch.end(), [&](Offset x, Offset y) { return synset(x).name < synset(y).name; });
  const Offset subsumer = std::find(lch.begin(), lch.end(), a) != lch.end() ? a : lch.front();
  const int depth = synset(subsumer).max_depth + 1;
  const int len1 = shortest_path(a, subsumer), len2 = shortest_path(b, subsumer);
  if (len1 < 0 || len2 < 0) return std::nullopt;
  return 2.0 * depth / static_cast<double>(len1 + depth + len2 + depth);
}

std::optional<double> Taxonomy::word_similarity(std::string_view a, std::string_view b) const {
  auto sa = synsets(a), sb = synsets(b);
  if (sa.empty() || sb.empty()) return std::nullopt;
  double best = 0.0;
  for (auto x : sa)
    for (auto y : sb) {
      if (auto v = wup(x, y)) best = std::max(best, *v);
      if (auto v = wup(y, x)) best = std::max(best, *v);
    }
  return best;
}

}  // namespace hqs::wordnet
