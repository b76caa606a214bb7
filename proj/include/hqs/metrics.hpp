#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hqs/wordnet.hpp"

namespace hqs::metrics {

using Tokens = std::vector<std::string>;

// Lowercase, punctuation to spaces, split, drop English stopwords.
Tokens preprocess_for_eval(std::string_view answer);

struct BleuDetail {
  double bleu = 0.0;
  double brevity_penalty = 0.0;
  // one entry per order actually used
  std::vector<double> precisions;
  int orders = 0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

// Corpus BLEU: clipped n-gram counts pooled across pairs, uniform weights,
// no smoothing. A zero precision at any order gives 0. Orders longer than
// every candidate have no n-grams to score (0/0) and are dropped, so N is
// clipped to the longest candidate.
BleuDetail bleu_detail(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int max_n = 4);
double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int max_n = 4);

// Token similarity: 1 for equal strings, else Wu-Palmer when both are nouns
// in the taxonomy, else 0. With no taxonomy only exact matches count.
double token_similarity(const std::string& a, const std::string& b, const wordnet::Taxonomy* taxonomy);

// Harmonic mean of the two directional best-match averages.
double wbss(const Tokens& candidate, const Tokens& reference, const wordnet::Taxonomy* taxonomy);
// Mean of per-pair scores.
double corpus_wbss(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                   const wordnet::Taxonomy* taxonomy);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct PrfReport {
  std::map<std::string, ClassScores> per_class;
  double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
  // support-weighted averages, the "overall" convention of sklearn reports
  double weighted_p = 0.0, weighted_r = 0.0, weighted_f1 = 0.0;
};

// Classes with no predicted (or gold) instances contribute 0 to that score.
// An empty `classes` uses the union of gold and predicted labels.
PrfReport macro_prf(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                    std::vector<std::string> classes = {});

double accuracy(const std::vector<std::string>& gold, const std::vector<std::string>& pred);

struct EvalReport {
  std::size_t count = 0;
  double bleu = 0.0;
  double wbss = 0.0;
  double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
  double accuracy = 0.0;
  std::map<std::string, std::size_t> error_counts;

  nlohmann::json to_json() const;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Raw answer strings in, every metric computed on the eval-preprocessed form.
// Answer classes for P/R/F1 are the joined preprocessed strings.
EvalReport evaluate(const std::vector<std::string>& predictions, const std::vector<std::string>& references,
                    const wordnet::Taxonomy* taxonomy);

}  // namespace hqs::metrics
