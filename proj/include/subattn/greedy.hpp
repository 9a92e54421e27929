#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "subattn/concave.hpp"

namespace subattn {

// Weighted concave-over-coverage set function on a ground set of n elements:
//   f(S) = sum_c weight[c] * (g(sum_{s in S} cover(s, c)) + b)
// Monotone submodular by construction; f(empty) = 0.
struct WeightedCoverageFunction {
  Eigen::VectorXd concept_weights;          // >= 0, one per concept
  Eigen::MatrixXd cover;                    // element x concept, entries >= 0
  ConcaveTransform transform = ConcaveTransform::square_root();

  int n_elements() const { return static_cast<int>(cover.rows()); }
  int n_concepts() const { return static_cast<int>(cover.cols()); }

  void validate() const;

  // f(S) for S given as element indices into [0, n).
  double evaluate(const std::vector<int>& subset) const;

  // f(S) from per-concept coverage sums (used by incremental callers).
  double evaluate_sums(const Eigen::VectorXd& concept_sums) const;
};

struct GreedyResult {
  std::vector<int> selected;          // in selection order
  double value = 0.0;
  std::vector<double> gain_trace;     // marginal gain per step
};

struct BruteForceResult {
  std::vector<int> selected;  // sorted ascending
  double value = 0.0;
};

// Nemhauser greedy under cardinality budget m; ties broken by lowest index.
GreedyResult greedy_maximize(const WeightedCoverageFunction& f, int budget);

// Priority-queue lazy greedy; must select the identical set as the naive
// form under the same tie-break.
GreedyResult lazy_greedy_maximize(const WeightedCoverageFunction& f,
                                  int budget);

// Exact optimum over all subsets of size <= m. Requires n <= 24 and
// C(n, m) <= 5e6.
BruteForceResult brute_force_maximize(const WeightedCoverageFunction& f,
                                      int budget);

// Exhaustive diminishing-returns and monotonicity check over all S subset T
// and v outside T, with 1e-9 slack. Evaluator is a table over all 2^n
// subsets so arbitrary set functions can be checked too. Requires n <= 12.
bool is_submodular_table(const std::vector<double>& value_by_mask,
                         int n_elements, double slack = 1e-9);

bool is_submodular(const WeightedCoverageFunction& f, double slack = 1e-9);

// f evaluated on every subset mask of [0, 2^n).
std::vector<double> subset_value_table(const WeightedCoverageFunction& f);

}  // namespace subattn
