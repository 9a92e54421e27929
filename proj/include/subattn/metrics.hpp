#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

namespace subattn {

using TokenSeq = std::vector<int>;

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap ROUGE-N.
RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference,
                   int n);

// LCS-based ROUGE-L.
RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

// Corpus-level BLEU with brevity penalty; geometric mean over n = 1..max_n.
// Unsmoothed by default: any zero clipped precision yields 0.
double corpus_bleu(const std::vector<TokenSeq>& candidates,
                   const std::vector<TokenSeq>& references, int max_n = 4,
                   bool add_one_smoothing = false);

// 1 - distinct/total n-grams; 0 when the sequence is shorter than n.
double repetition_ratio(const TokenSeq& sequence, int n);

// Fraction of candidate n-grams absent from the source n-gram set.
double novel_ngram_pct(const TokenSeq& candidate, const TokenSeq& source,
                       int n);

// ROUGE-1/2/L of candidate against the first k sentences of the source,
// sentences split on `delimiter`. A delimiter-free source counts as one
// sentence.
struct LeadOverlap {
  RougeScore rouge1, rouge2, rougeL;
};
LeadOverlap lead_overlap(const TokenSeq& candidate, const TokenSeq& source,
                         int k_sentences, int delimiter);

// Shannon entropy (natural log) of the normalized effective-coverage
// distribution. Errors on an all-zero vector.
double coverage_entropy(const Eigen::VectorXd& effective_coverage);

// Median split of instances by source length (ties to the short half);
// returns the mean of `metric` over each half.
std::pair<double, double> short_long_split(
    const std::vector<int>& source_lengths,
    const std::vector<double>& per_instance_metric);

// Per-instance evaluation bundle.
struct MetricBundle {
  RougeScore rouge1, rouge2, rougeL;
  double bleu = 0.0;
  double repetition[3] = {0.0, 0.0, 0.0};   // n = 1, 2, 3
  double novel_ngram[5] = {0.0, 0.0, 0.0, 0.0, 0.0};  // n = 1..5
  LeadOverlap lead;
  double coverage_entropy = 0.0;

  static const char* csv_header();
  std::string to_csv_row() const;
};

}  // namespace subattn
