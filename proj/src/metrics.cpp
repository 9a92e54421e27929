#include "subattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace subattn {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, int> ngram_counts(const TokenSeq& seq, int n) {
  std::map<Ngram, int> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (size_t i = 0; i + n <= seq.size(); ++i)
    ++counts[Ngram(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference,
                   int n) {
  if (n < 1) throw std::invalid_argument("rouge_n requires n >= 1");
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  long long cand_total = 0, ref_total = 0, overlap = 0;
  for (auto& [g, c] : cand) cand_total += c;
  for (auto& [g, c] : ref) ref_total += c;
  for (auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  RougeScore s;
  s.precision = cand_total > 0 ? double(overlap) / cand_total : 0.0;
  s.recall = ref_total > 0 ? double(overlap) / ref_total : 0.0;
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  const size_t nc = candidate.size(), nr = reference.size();
  RougeScore s;
  if (nc == 0 || nr == 0) return s;
  // Two-row LCS DP.
  std::vector<int> prev(nr + 1, 0), cur(nr + 1, 0);
  for (size_t i = 1; i <= nc; ++i) {
    for (size_t j = 1; j <= nr; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1]
                   ? prev[j - 1] + 1
                   : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  double lcs = prev[nr];
  s.precision = lcs / nc;
  s.recall = lcs / nr;
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

double corpus_bleu(const std::vector<TokenSeq>& candidates,
                   const std::vector<TokenSeq>& references, int max_n,
                   bool add_one_smoothing) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("candidate/reference count mismatch");
  if (candidates.empty()) return 0.0;

  long long cand_len = 0, ref_len = 0;
  std::vector<long long> matched(max_n, 0), total(max_n, 0);
  for (size_t k = 0; k < candidates.size(); ++k) {
    cand_len += candidates[k].size();
    ref_len += references[k].size();
    for (int n = 1; n <= max_n; ++n) {
      auto cand = ngram_counts(candidates[k], n);
      auto ref = ngram_counts(references[k], n);
      for (auto& [g, c] : cand) {
        total[n - 1] += c;
        auto it = ref.find(g);
        if (it != ref.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }

  double log_prec = 0.0;
  for (int n = 0; n < max_n; ++n) {
    double num = matched[n] + (add_one_smoothing ? 1.0 : 0.0);
    double den = total[n] + (add_one_smoothing ? 1.0 : 0.0);
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_prec += std::log(num / den);
  }
  double bp = cand_len < ref_len && cand_len > 0
                  ? std::exp(1.0 - double(ref_len) / cand_len)
                  : 1.0;
  return bp * std::exp(log_prec / max_n);
}

double repetition_ratio(const TokenSeq& sequence, int n) {
  if (static_cast<int>(sequence.size()) < n) return 0.0;
  auto counts = ngram_counts(sequence, n);
  long long total = 0;
  for (auto& [g, c] : counts) total += c;
  return 1.0 - double(counts.size()) / total;
}

double novel_ngram_pct(const TokenSeq& candidate, const TokenSeq& source,
                       int n) {
  auto cand = ngram_counts(candidate, n);
  if (cand.empty()) return 0.0;
  auto src = ngram_counts(source, n);
  long long total = 0, novel = 0;
  for (auto& [g, c] : cand) {
    total += c;
    if (!src.count(g)) novel += c;
  }
  return double(novel) / total;
}

LeadOverlap lead_overlap(const TokenSeq& candidate, const TokenSeq& source,
                         int k_sentences, int delimiter) {
  TokenSeq lead;
  int sentences = 0;
  for (int tok : source) {
    if (tok == delimiter) {
      if (++sentences >= k_sentences) break;
      continue;
    }
    lead.push_back(tok);
  }
  LeadOverlap o;
  o.rouge1 = rouge_n(candidate, lead, 1);
  o.rouge2 = rouge_n(candidate, lead, 2);
  o.rougeL = rouge_l(candidate, lead);
  return o;
}

double coverage_entropy(const Eigen::VectorXd& effective_coverage) {
  if ((effective_coverage.array() < 0.0).any())
    throw std::domain_error("effective coverage must be non-negative");
  double total = effective_coverage.sum();
  if (total <= 0.0)
    throw std::domain_error("coverage entropy undefined for all-zero vector");
  double h = 0.0;
  for (Eigen::Index i = 0; i < effective_coverage.size(); ++i) {
    double p = effective_coverage[i] / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::pair<double, double> short_long_split(
    const std::vector<int>& source_lengths,
    const std::vector<double>& per_instance_metric) {
  if (source_lengths.size() != per_instance_metric.size())
    throw std::invalid_argument("length/metric count mismatch");
  const size_t n = source_lengths.size();
  if (n < 2) throw std::invalid_argument("split requires >= 2 instances");

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return source_lengths[a] < source_lengths[b];
  });
  size_t short_count = (n + 1) / 2;  // ties at the median land short
  double short_sum = 0.0, long_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    (i < short_count ? short_sum : long_sum) += per_instance_metric[order[i]];
  }
  return {short_sum / short_count, long_sum / (n - short_count)};
}

const char* MetricBundle::csv_header() {
  return "rouge1_p,rouge1_r,rouge1_f,rouge2_p,rouge2_r,rouge2_f,"
         "rougeL_p,rougeL_r,rougeL_f,bleu,rep1,rep2,rep3,"
         "novel1,novel2,novel3,novel4,novel5,"
         "lead_rouge1_f,lead_rouge2_f,lead_rougeL_f,coverage_entropy";
}

std::string MetricBundle::to_csv_row() const {
  std::ostringstream out;
  out.precision(10);
  auto put = [&](double v, bool last = false) { out << v << (last ? "" : ","); };
  for (const RougeScore* r : {&rouge1, &rouge2, &rougeL}) {
    put(r->precision);
    put(r->recall);
    put(r->f1);
  }
  put(bleu);
  for (double v : repetition) put(v);
  for (double v : novel_ngram) put(v);
  put(lead.rouge1.f1);
  put(lead.rouge2.f1);
  put(lead.rougeL.f1);
  put(coverage_entropy, true);
  return out.str();
}

}  // namespace subattn
