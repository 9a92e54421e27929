#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace subattn {

// Concave, strictly increasing transform g on [0, inf) together with the
// offset b = -g(0), so that g(x) + b is zero-anchored at the origin.
//
// Supported families:
//   log_base(a):  g(x) = log_a(x + 1),   a in (1, 16]
//   square_root:  g(x) = sqrt(x + 1)
//   power(p):     g(x) = (x + 1)^p,      p in (0, 1)
class ConcaveTransform {
 public:
  enum class Kind { LogBase, SquareRoot, Power };

  static ConcaveTransform log_base(double base) {
    if (!(base > 1.0) || !(base <= 16.0))
      throw std::invalid_argument("log base must be in (1, 16], got " +
                                  std::to_string(base));
    return ConcaveTransform(Kind::LogBase, base);
  }
  static ConcaveTransform square_root() {
    return ConcaveTransform(Kind::SquareRoot, 0.0);
  }
  static ConcaveTransform power(double exponent) {
    if (!(exponent > 0.0) || !(exponent < 1.0))
      throw std::invalid_argument("power exponent must be in (0, 1), got " +
                                  std::to_string(exponent));
    return ConcaveTransform(Kind::Power, exponent);
  }

  Kind kind() const { return kind_; }
  double param() const { return param_; }

  // Zero-anchored value g(x) + b. Result is 0 iff x is 0.
  double operator()(double x) const {
    if (x < 0.0) throw std::domain_error("concave transform requires x >= 0");
    switch (kind_) {
      case Kind::LogBase:
        return std::log1p(x) / std::log(param_);  // b = 0
      case Kind::SquareRoot:
        return std::sqrt(x + 1.0) - 1.0;  // b = -1
      case Kind::Power:
        return std::pow(x + 1.0, param_) - 1.0;  // b = -1
    }
    return 0.0;  // unreachable
  }

  // Offset b = -g(0).
  double offset() const { return kind_ == Kind::LogBase ? 0.0 : -1.0; }

  // First derivative g'(x), strictly positive on [0, inf).
  double derivative(double x) const {
    if (x < 0.0) throw std::domain_error("concave transform requires x >= 0");
    switch (kind_) {
      case Kind::LogBase:
        return 1.0 / ((x + 1.0) * std::log(param_));
      case Kind::SquareRoot:
        return 0.5 / std::sqrt(x + 1.0);
      case Kind::Power:
        return param_ * std::pow(x + 1.0, param_ - 1.0);
    }
    return 0.0;  // unreachable
  }

  bool operator==(const ConcaveTransform& other) const {
    return kind_ == other.kind_ && param_ == other.param_;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::LogBase:
        return "log" + std::to_string(param_) + "(x+1)";
      case Kind::SquareRoot:
        return "sqrt(x+1)";
      case Kind::Power:
        return "(x+1)^" + std::to_string(param_);
    }
    return {};
  }

 private:
  ConcaveTransform(Kind kind, double param) : kind_(kind), param_(param) {}

  Kind kind_;
  double param_;
};

inline double eval_transform(const ConcaveTransform& g, double x) {
  return g(x);
}

inline double transform_derivative(const ConcaveTransform& g, double x) {
  return g.derivative(x);
}

// Coverage value x >= 0 at which g1'(x) = g2'(x), located by bisection to
// 1e-10, or nullopt when the derivatives never cross on [0, 1e6].
std::optional<double> crossover_point(const ConcaveTransform& g1,
                                      const ConcaveTransform& g2);

}  // namespace subattn
