#pragma once

// Brute-force corpus BLEU used as an independent check: n-grams are keyed by
// their joined text and the precision product is taken directly.

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace hqs::testing {

inline double oracle_bleu(const std::vector<std::vector<std::string>>& cands,
                          const std::vector<std::vector<std::string>>& refs, int max_n) {
  std::vector<long> matched(static_cast<std::size_t>(max_n) + 1, 0), total(matched.size(), 0);
  long c = 0, r = 0;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    c += static_cast<long>(cands[k].size());
    r += static_cast<long>(refs[k].size());
    for (int n = 1; n <= max_n; ++n) {
      auto grams = [n](const std::vector<std::string>& t) {
        std::map<std::string, long> m;
        for (int i = 0; i + n <= static_cast<int>(t.size()); ++i) {
          std::string key;
          for (int j = i; j < i + n; ++j) key += t[static_cast<std::size_t>(j)] + '\x1f';
          ++m[key];
        }
        return m;
      };
      const auto cg = grams(cands[k]);
      const auto rg = grams(refs[k]);
      for (const auto& [key, count] : cg) {
        total[static_cast<std::size_t>(n)] += count;
        const auto it = rg.find(key);
        if (it != rg.end()) matched[static_cast<std::size_t>(n)] += std::min(count, it->second);
      }
    }
  }
  if (c == 0) return 0.0;
  int orders = 0;
  double product = 1.0;
  for (int n = 1; n <= max_n && total[static_cast<std::size_t>(n)] > 0; ++n) {
    ++orders;
    product *= static_cast<double>(matched[static_cast<std::size_t>(n)]) / static_cast<double>(total[static_cast<std::size_t>(n)]);
  }
  if (product == 0.0) return 0.0;
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::pow(product, 1.0 / orders);
}

}  // namespace hqs::testing
