#include "hqs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hqs/error.hpp"
#include "hqs/text.hpp"

namespace hqs::metrics {

Tokens preprocess_for_eval(std::string_view answer) {
  const auto& stop = text::StopwordList::english();
  Tokens out;
  for (auto& t : text::tokenize(answer))
    if (!stop.contains(t)) out.push_back(std::move(t));
  return out;
}

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& toks, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Tokens(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i + n))];
  return counts;
}

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(std::string(what) + ": inputs differ in length");
  if (a == 0) throw Error(std::string(what) + ": empty corpus");
}

}  // namespace

BleuDetail bleu_detail(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int max_n) {
  check_aligned(candidates.size(), references.size(), "bleu");
  if (max_n < 1) throw Error("bleu: max_n must be positive");
  BleuDetail d;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    d.candidate_length += candidates[i].size();
    d.reference_length += references[i].size();
  }
  for (int n = 1; n <= max_n; ++n) {
    std::size_t clipped = 0, total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      auto cand = ngram_counts(candidates[i], static_cast<std::size_t>(n));
      auto ref = ngram_counts(references[i], static_cast<std::size_t>(n));
      for (const auto& [gram, c] : cand) {
        total += c;
        if (auto it = ref.find(gram); it != ref.end()) clipped += std::min(c, it->second);
      }
    }
    if (total == 0) break;  // no candidate has n tokens, so neither has any longer order
    d.precisions.push_back(static_cast<double>(clipped) / static_cast<double>(total));
  }
  d.orders = static_cast<int>(d.precisions.size());
  if (d.candidate_length == 0) return d;
  const double c = static_cast<double>(d.candidate_length), r = static_cast<double>(d.reference_length);
  d.brevity_penalty = c > r ? 1.0 : std::exp(1.0 - r / c);
  double log_sum = 0.0;
  for (double p : d.precisions) {
    if (p == 0.0) return d;
    log_sum += std::log(p) / static_cast<double>(d.orders);
  }
  d.bleu = d.brevity_penalty * std::exp(log_sum);
  return d;
}

double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int max_n) {
  return bleu_detail(candidates, references, max_n).bleu;
}

double token_similarity(const std::string& a, const std::string& b, const wordnet::Taxonomy* taxonomy) {
  if (a == b) return 1.0;
  if (!taxonomy) return 0.0;
  return taxonomy->word_similarity(a, b).value_or(0.0);
}

namespace {

double directional(const Tokens& from, const Tokens& to, const wordnet::Taxonomy* taxonomy) {
  double sum = 0.0;
  for (const auto& a : from) {
    double best = 0.0;
    for (const auto& b : to) best = std::max(best, token_similarity(a, b, taxonomy));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double wbss(const Tokens& candidate, const Tokens& reference, const wordnet::Taxonomy* taxonomy) {
  if (candidate.empty() && reference.empty()) return 1.0;
  if (candidate.empty() || reference.empty()) return 0.0;
  const double p = directional(candidate, reference, taxonomy);
  const double r = directional(reference, candidate, taxonomy);
  return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double corpus_wbss(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                   const wordnet::Taxonomy* taxonomy) {
  check_aligned(candidates.size(), references.size(), "wbss");
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) sum += wbss(candidates[i], references[i], taxonomy);
  return sum / static_cast<double>(candidates.size());
}

PrfReport macro_prf(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                    std::vector<std::string> classes) {
  check_aligned(gold.size(), pred.size(), "macro_prf");
  if (classes.empty()) {
    std::set<std::string> u(gold.begin(), gold.end());
    u.insert(pred.begin(), pred.end());
    classes.assign(u.begin(), u.end());
  }
  PrfReport rep;
  std::size_t total_support = 0;
  for (const auto& c : classes) {
    std::size_t tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == c, p = pred[i] == c;
      tp += g && p;
      predicted += p;
      actual += g;
    }
    ClassScores s;
    s.support = actual;
    s.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    s.recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
    s.f1 = (s.precision + s.recall) == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    rep.macro_p += s.precision;
    rep.macro_r += s.recall;
    rep.macro_f1 += s.f1;
    rep.weighted_p += s.precision * static_cast<double>(actual);
    rep.weighted_r += s.recall * static_cast<double>(actual);
    rep.weighted_f1 += s.f1 * static_cast<double>(actual);
    total_support += actual;
    rep.per_class[c] = s;
  }
  const double k = static_cast<double>(classes.size());
  rep.macro_p /= k;
  rep.macro_r /= k;
  rep.macro_f1 /= k;
  if (total_support > 0) {
    rep.weighted_p /= static_cast<double>(total_support);
    rep.weighted_r /= static_cast<double>(total_support);
    rep.weighted_f1 /= static_cast<double>(total_support);
  }
  return rep;
}

double accuracy(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  check_aligned(gold.size(), pred.size(), "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == pred[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

nlohmann::json EvalReport::to_json() const {
  return {{"count", count},       {"bleu", bleu},           {"wbss", wbss},
          {"macro_p", macro_p},   {"macro_r", macro_r},     {"macro_f1", macro_f1},
          {"accuracy", accuracy}, {"error_counts", error_counts}};
}

EvalReport evaluate(const std::vector<std::string>& predictions, const std::vector<std::string>& references,
                    const wordnet::Taxonomy* taxonomy) {
  check_aligned(predictions.size(), references.size(), "evaluate");
  std::vector<Tokens> cand, ref;
  std::vector<std::string> cand_s, ref_s;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    cand.push_back(preprocess_for_eval(predictions[i]));
    ref.push_back(preprocess_for_eval(references[i]));
    cand_s.push_back(text::join(cand.back()));
    ref_s.push_back(text::join(ref.back()));
  }
  EvalReport r;
  r.count = predictions.size();
  r.bleu = bleu(cand, ref);
  r.wbss = corpus_wbss(cand, ref, taxonomy);
  auto prf = macro_prf(ref_s, cand_s);
  r.macro_p = prf.macro_p;
  r.macro_r = prf.macro_r;
  r.macro_f1 = prf.macro_f1;
  r.accuracy = accuracy(ref_s, cand_s);
  return r;
}

}  // namespace hqs::metrics
