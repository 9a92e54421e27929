#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <vector>

#include "subattn/concave.hpp"

namespace subattn {

// Raw attention scores one encoder state received over decoding steps 0..t.
using AttentionHistory = std::vector<double>;

inline void check_history(const AttentionHistory& history) {
  for (double a : history)
    if (a < 0.0)
      throw std::domain_error("attention history has a negative score");
}

// F(A_i^t) = g(sum of history) + b, with F(empty) = 0.
inline double submodular_coverage(const ConcaveTransform& g,
                                  const AttentionHistory& history) {
  check_history(history);
  double total = 0.0;
  for (double a : history) total += a;
  return g(total);
}

// Per-step effective scores: element t is F(A^t) - F(A^{t-1}).
std::vector<double> diminishing_attention(const ConcaveTransform& g,
                                          const AttentionHistory& history);

// Eq-5-style convex combination of two diminishing attentions. The mixing
// weight at step t is the running max of the history strictly before t
// (0 at t = 0), which requires raw scores in [0, 1].
std::vector<double> dynamic_diminishing_attention(
    const ConcaveTransform& g1, const ConcaveTransform& g2,
    const AttentionHistory& history);

// Sum of effective scores; telescopes to submodular_coverage for the
// diminishing transform.
inline double effective_coverage(const std::vector<double>& effective) {
  double total = 0.0;
  for (double e : effective) total += e;
  return total;
}

// Streaming per-encoder-state coverage statistics for one decode session.
// `sum` accumulates raw attention (c_i^t); `peak` tracks its running max.
struct CoverageTracker {
  Eigen::VectorXd sum;
  Eigen::VectorXd peak;
  int steps = 0;

  CoverageTracker() = default;
  explicit CoverageTracker(Eigen::Index n_states)
      : sum(Eigen::VectorXd::Zero(n_states)),
        peak(Eigen::VectorXd::Zero(n_states)) {}

  Eigen::Index size() const { return sum.size(); }

  void update(const Eigen::VectorXd& raw) {
    if (raw.size() != sum.size())
      throw std::invalid_argument("raw attention row size mismatch");
    if ((raw.array() < 0.0).any())
      throw std::domain_error("raw attention must be non-negative");
    sum += raw;
    peak = peak.cwiseMax(raw);
    ++steps;
  }
};

// Which effective-attention transform a decode session applies.
struct DiminishConfig {
  enum class Mode { Standard, Dim, DyDim };

  Mode mode = Mode::Standard;
  std::optional<ConcaveTransform> g1;  // Dim uses g1 alone
  std::optional<ConcaveTransform> g2;
  bool renormalize_effective = false;
  bool detach_peak_gradient = true;

  static DiminishConfig standard() { return {}; }
  static DiminishConfig dim(ConcaveTransform g) {
    DiminishConfig cfg;
    cfg.mode = Mode::Dim;
    cfg.g1 = g;
    return cfg;
  }
  static DiminishConfig dydim(ConcaveTransform g1, ConcaveTransform g2) {
    if (g1 == g2)
      throw std::invalid_argument("dydim requires two distinct transforms");
    DiminishConfig cfg;
    cfg.mode = Mode::DyDim;
    cfg.g1 = g1;
    cfg.g2 = g2;
    return cfg;
  }
};

// One streaming step: maps a raw attention row to the effective row under
// `cfg` given the tracker's state so far, then folds the raw row into the
// tracker. Bit-identical to the batch forms applied per state.
Eigen::VectorXd effective_attention_step(const DiminishConfig& cfg,
                                         CoverageTracker& tracker,
                                         const Eigen::VectorXd& raw);

}  // namespace subattn
