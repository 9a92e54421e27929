#include "subattn/greedy.hpp"

#include <algorithm>
#include <bit>
#include <queue>
#include <stdexcept>

namespace subattn {

void WeightedCoverageFunction::validate() const {
  if (cover.rows() == 0 || cover.cols() == 0)
    throw std::invalid_argument("empty coverage function");
  if (concept_weights.size() != cover.cols())
    throw std::invalid_argument("weight count must match concept count");
  if ((concept_weights.array() < 0.0).any())
    throw std::invalid_argument("concept weights must be non-negative");
  if ((cover.array() < 0.0).any())
    throw std::invalid_argument("cover matrix entries must be non-negative");
}

double WeightedCoverageFunction::evaluate_sums(
    const Eigen::VectorXd& concept_sums) const {
  double total = 0.0;
  for (Eigen::Index c = 0; c < concept_sums.size(); ++c)
    total += concept_weights[c] * transform(concept_sums[c]);
  return total;
}

double WeightedCoverageFunction::evaluate(
    const std::vector<int>& subset) const {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(cover.cols());
  for (int s : subset) {
    if (s < 0 || s >= n_elements())
      throw std::out_of_range("subset element outside the ground set");
    sums += cover.row(s);
  }
  return evaluate_sums(sums);
}

GreedyResult greedy_maximize(const WeightedCoverageFunction& f, int budget) {
  f.validate();
  const int n = f.n_elements();
  if (budget < 0 || budget > n)
    throw std::invalid_argument("budget must be in [0, n]");

  GreedyResult result;
  std::vector<bool> taken(n, false);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(f.n_concepts());
  double current = 0.0;
  for (int step = 0; step < budget; ++step) {
    int best = -1;
    double best_gain = -1.0;
    for (int v = 0; v < n; ++v) {
      if (taken[v]) continue;
      double gain = f.evaluate_sums(sums + f.cover.row(v).transpose()) - current;
      if (gain > best_gain) {  // strict: ties keep the lowest index
        best_gain = gain;
        best = v;
      }
    }
    taken[best] = true;
    sums += f.cover.row(best);
    current += best_gain;
    result.selected.push_back(best);
    result.gain_trace.push_back(best_gain);
  }
  result.value = f.evaluate(result.selected);
  return result;
}

GreedyResult lazy_greedy_maximize(const WeightedCoverageFunction& f,
                                  int budget) {
  f.validate();
  const int n = f.n_elements();
  if (budget < 0 || budget > n)
    throw std::invalid_argument("budget must be in [0, n]");

  // Max-heap of (stale upper bound, element); lower index wins ties so the
  // pop order matches naive greedy.
  struct Entry {
    double bound;
    int element;
    bool operator<(const Entry& other) const {
      if (bound != other.bound) return bound < other.bound;
      return element > other.element;
    }
  };

  GreedyResult result;
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(f.n_concepts());
  double current = 0.0;

  std::priority_queue<Entry> heap;
  std::vector<int> fresh_at(n, -1);  // step at which the bound was computed
  for (int v = 0; v < n; ++v) {
    double gain = f.evaluate_sums(sums + f.cover.row(v).transpose());
    fresh_at[v] = 0;
    heap.push({gain, v});
  }

  for (int step = 0; step < budget; ++step) {
    while (true) {
      Entry top = heap.top();
      heap.pop();
      if (fresh_at[top.element] == step) {
        sums += f.cover.row(top.element);
        current += top.bound;
        result.selected.push_back(top.element);
        result.gain_trace.push_back(top.bound);
        fresh_at[top.element] = -2;  // consumed
        break;
      }
      if (fresh_at[top.element] == -2) continue;
      double gain =
          f.evaluate_sums(sums + f.cover.row(top.element).transpose()) -
          current;
      fresh_at[top.element] = step;
      heap.push({gain, top.element});
    }
  }
  result.value = f.evaluate(result.selected);
  return result;
}

namespace {

uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  uint64_t r = 1;
  for (int i = 0; i < k; ++i) r = r * static_cast<uint64_t>(n - i) / (i + 1);
  return r;
}

}  // namespace

std::vector<double> subset_value_table(const WeightedCoverageFunction& f) {
  const int n = f.n_elements();
  if (n > 24) throw std::invalid_argument("subset table limited to n <= 24");
  const size_t total = size_t{1} << n;
  const int nc = f.n_concepts();

  // sums[mask] built from sums[mask without lowest set bit].
  std::vector<Eigen::VectorXd> sums(total);
  std::vector<double> values(total);
  sums[0] = Eigen::VectorXd::Zero(nc);
  values[0] = 0.0;
  for (size_t mask = 1; mask < total; ++mask) {
    int low = std::countr_zero(mask);
    sums[mask] = sums[mask & (mask - 1)] + f.cover.row(low).transpose();
    values[mask] = f.evaluate_sums(sums[mask]);
  }
  return values;
}

BruteForceResult brute_force_maximize(const WeightedCoverageFunction& f,
                                      int budget) {
  f.validate();
  const int n = f.n_elements();
  if (n > 24) throw std::invalid_argument("brute force limited to n <= 24");
  if (binomial(n, budget) > 5'000'000)
    throw std::invalid_argument("instance too large for brute force");

  BruteForceResult best;
  best.value = 0.0;  // empty set baseline

  const uint32_t total = uint32_t{1} << n;
  Eigen::VectorXd sums(f.n_concepts());
  for (uint32_t mask = 1; mask < total; ++mask) {
    if (std::popcount(mask) > budget) continue;
    sums.setZero();
    for (int v = 0; v < n; ++v)
      if (mask & (uint32_t{1} << v)) sums += f.cover.row(v);
    double value = f.evaluate_sums(sums);
    if (value > best.value) {
      best.value = value;
      best.selected.clear();
      for (int v = 0; v < n; ++v)
        if (mask & (uint32_t{1} << v)) best.selected.push_back(v);
    }
  }
  return best;
}

bool is_submodular_table(const std::vector<double>& value_by_mask,
                         int n_elements, double slack) {
  if (n_elements > 12)
    throw std::invalid_argument("exhaustive check limited to n <= 12");
  const uint32_t total = uint32_t{1} << n_elements;
  if (value_by_mask.size() != total)
    throw std::invalid_argument("value table size must be 2^n");

  for (uint32_t t = 0; t < total; ++t) {
    // All S subset of T via the standard submask walk.
    for (uint32_t s = t;; s = (s - 1) & t) {
      if (value_by_mask[s] > value_by_mask[t] + slack) return false;
      for (int v = 0; v < n_elements; ++v) {
        uint32_t bit = uint32_t{1} << v;
        if (t & bit) continue;
        double gain_s = value_by_mask[s | bit] - value_by_mask[s];
        double gain_t = value_by_mask[t | bit] - value_by_mask[t];
        if (gain_s + slack < gain_t) return false;
      }
      if (s == 0) break;
    }
  }
  return true;
}

bool is_submodular(const WeightedCoverageFunction& f, double slack) {
  f.validate();
  return is_submodular_table(subset_value_table(f), f.n_elements(), slack);
}

}  // namespace subattn
