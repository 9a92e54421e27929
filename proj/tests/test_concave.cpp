#include "doctest.h"

#include <vector>

#include "subattn/concave.hpp"
#include "subattn/rng.hpp"

using namespace subattn;

TEST_CASE("eval_transform hand values") {
  auto ln = ConcaveTransform::log_base(std::exp(1.0));
  CHECK(eval_transform(ln, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(eval_transform(ConcaveTransform::square_root(), 3.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  // frozen from an arbitrary-precision evaluation of ln(2.5)
  CHECK(eval_transform(ln, 1.5) ==
        doctest::Approx(0.916290731874155065).epsilon(1e-12));
  // 2^0.65 - 1, same oracle
  CHECK(eval_transform(ConcaveTransform::power(0.65), 1.0) ==
        doctest::Approx(0.569168195793501471).epsilon(1e-12));
}

TEST_CASE("eval_transform rejects negative x") {
  CHECK_THROWS_AS(eval_transform(ConcaveTransform::square_root(), -0.1),
                  std::domain_error);
  CHECK_THROWS_AS(
      transform_derivative(ConcaveTransform::power(0.5), -1.0),
      std::domain_error);
}

TEST_CASE("construction rejects out-of-range parameters") {
  CHECK_THROWS_AS(ConcaveTransform::log_base(1.0), std::invalid_argument);
  CHECK_THROWS_AS(ConcaveTransform::log_base(17.0), std::invalid_argument);
  CHECK_THROWS_AS(ConcaveTransform::power(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ConcaveTransform::power(1.0), std::invalid_argument);
  CHECK_NOTHROW(ConcaveTransform::log_base(2.2));  // BERT-style preset
}

TEST_CASE("derivative hand values") {
  CHECK(transform_derivative(ConcaveTransform::square_root(), 0.0) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(transform_derivative(ConcaveTransform::log_base(std::exp(1.0)), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  // 0.6 * 2^{-0.4}, arbitrary-precision oracle
  CHECK(transform_derivative(ConcaveTransform::power(0.6), 1.0) ==
        doctest::Approx(0.454714969953119424).epsilon(1e-12));
}

TEST_CASE("transforms are strictly increasing, concave, zero-anchored") {
  std::vector<ConcaveTransform> family = {
      ConcaveTransform::log_base(std::exp(1.0)),
      ConcaveTransform::log_base(1.9),
      ConcaveTransform::square_root(),
      ConcaveTransform::power(0.65),
      ConcaveTransform::power(0.3)};
  SplitMix64 rng(7);
  for (const auto& g : family) {
    CHECK(g(0.0) == 0.0);
    for (int trial = 0; trial < 2000; ++trial) {
      double x1 = rng.next_double() * 10.0;
      double x2 = x1 + 1e-6 + rng.next_double() * 5.0;
      double delta = 1e-6 + rng.next_double();
      CHECK(g(x2) > g(x1));
      CHECK(g(x1 + delta) - g(x1) >= g(x2 + delta) - g(x2) - 1e-12);
      CHECK(g.derivative(x1) > 0.0);
    }
  }
}

TEST_CASE("crossover of sqrt and natural log derivatives is exactly 3") {
  auto x = crossover_point(ConcaveTransform::square_root(),
                           ConcaveTransform::log_base(std::exp(1.0)));
  REQUIRE(x.has_value());
  CHECK(*x == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("identical transforms have no crossover") {
  auto ln = ConcaveTransform::log_base(std::exp(1.0));
  CHECK(!crossover_point(ln, ln).has_value());
}

TEST_CASE("crossover of sqrt and log base 1.9 matches closed form") {
  // closed form 4 / (ln 1.9)^2 - 1, arbitrary-precision oracle
  auto x = crossover_point(ConcaveTransform::square_root(),
                           ConcaveTransform::log_base(1.9));
  REQUIRE(x.has_value());
  CHECK(*x == doctest::Approx(8.70929376369201375).epsilon(1e-8));
}
