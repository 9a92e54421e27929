#include "subattn/coverage.hpp"

namespace subattn {

std::optional<double> crossover_point(const ConcaveTransform& g1,
                                      const ConcaveTransform& g2) {
  constexpr double kUpper = 1e6;
  auto diff = [&](double x) { return g1.derivative(x) - g2.derivative(x); };

  // Scan a geometric grid for a sign change, then bisect.
  double lo = 0.0;
  double f_lo = diff(lo);
  double x = 1e-6;
  double hi = lo;
  double f_hi = f_lo;
  bool bracketed = false;
  while (hi < kUpper) {
    hi = std::min(x, kUpper);
    f_hi = diff(hi);
    if (f_lo == 0.0 ? f_hi != 0.0 : f_lo * f_hi <= 0.0) {
      // Equal derivatives on an interval (identical transforms) never
      // bracket; a genuine crossing flips the sign.
      if (f_lo * f_hi < 0.0 || (f_lo == 0.0 && f_hi != 0.0) ||
          (f_hi == 0.0 && f_lo != 0.0)) {
        bracketed = true;
        break;
      }
    }
    lo = hi;
    f_lo = f_hi;
    x *= 2.0;
  }
  if (!bracketed) return std::nullopt;
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;

  while (hi - lo > 1e-10) {
    double mid = 0.5 * (lo + hi);
    double f_mid = diff(mid);
    if (f_mid == 0.0) return mid;
    if (f_lo * f_mid < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      f_lo = f_mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> diminishing_attention(const ConcaveTransform& g,
                                          const AttentionHistory& history) {
  check_history(history);
  std::vector<double> effective;
  effective.reserve(history.size());
  double coverage = 0.0;
  double prev = 0.0;  // F(A^{-1}) = F(empty) = 0
  for (double a : history) {
    coverage += a;
    double cur = g(coverage);
    effective.push_back(cur - prev);
    prev = cur;
  }
  return effective;
}

std::vector<double> dynamic_diminishing_attention(
    const ConcaveTransform& g1, const ConcaveTransform& g2,
    const AttentionHistory& history) {
  std::vector<double> effective;
  effective.reserve(history.size());
  double coverage = 0.0;
  double peak = 0.0;  // P at t = 0
  double prev1 = 0.0;
  double prev2 = 0.0;
  for (double a : history) {
    if (a < 0.0 || a > 1.0)
      throw std::domain_error(
          "dydim requires raw scores in [0, 1] so P is a probability");
    coverage += a;
    double cur1 = g1(coverage);
    double cur2 = g2(coverage);
    effective.push_back(peak * (cur1 - prev1) + (1.0 - peak) * (cur2 - prev2));
    prev1 = cur1;
    prev2 = cur2;
    peak = std::max(peak, a);
  }
  return effective;
}

Eigen::VectorXd effective_attention_step(const DiminishConfig& cfg,
                                         CoverageTracker& tracker,
                                         const Eigen::VectorXd& raw) {
  const Eigen::Index n = raw.size();
  Eigen::VectorXd effective(n);
  switch (cfg.mode) {
    case DiminishConfig::Mode::Standard:
      effective = raw;
      break;
    case DiminishConfig::Mode::Dim: {
      const ConcaveTransform& g = *cfg.g1;
      for (Eigen::Index i = 0; i < n; ++i) {
        double c = tracker.sum[i];
        double prev = tracker.steps == 0 ? 0.0 : g(c);
        effective[i] = g(c + raw[i]) - prev;
      }
      break;
    }
    case DiminishConfig::Mode::DyDim: {
      const ConcaveTransform& g1 = *cfg.g1;
      const ConcaveTransform& g2 = *cfg.g2;
      if ((raw.array() < 0.0).any() || (raw.array() > 1.0).any())
        throw std::domain_error(
            "dydim requires raw scores in [0, 1] so P is a probability");
      for (Eigen::Index i = 0; i < n; ++i) {
        double c = tracker.sum[i];
        double p = tracker.peak[i];
        double prev1 = tracker.steps == 0 ? 0.0 : g1(c);
        double prev2 = tracker.steps == 0 ? 0.0 : g2(c);
        effective[i] =
            p * (g1(c + raw[i]) - prev1) + (1.0 - p) * (g2(c + raw[i]) - prev2);
      }
      break;
    }
  }
  tracker.update(raw);
  return effective;
}

}  // namespace subattn
