#include <cmath>

#include <doctest.h>

#include "sawtooth/forward.hpp"
#include "test_support.hpp"

using namespace sawtooth;

TEST_CASE("diffuse applies the closed form coordinatewise") {
  const auto s = build_schedule(100, 1e-3, 0.05);
  Rng rng(3);
  const auto x0 = test::random_series(2, 5, rng);
  const auto eps = test::random_series(2, 5, rng);
  for (int t : {1, 37, 100}) {
    const auto xt = diffuse(x0, t, eps, s);
    const double ab = s.alpha_bar(t);
    for (std::size_t i = 0; i < xt.size(); ++i) {
      CHECK(xt.values()[i] ==
            doctest::Approx(std::sqrt(ab) * x0.values()[i] + std::sqrt(1 - ab) * eps.values()[i])
                .epsilon(1e-14));
    }
  }
}

TEST_CASE("diffuse endpoints and validation") {
  Rng rng(4);
  const auto x0 = test::random_series(1, 4, rng);
  const auto eps = test::random_series(1, 4, rng);
  CHECK(diffuse_with_alpha_bar(x0, 1.0, eps) == x0);
  CHECK(diffuse_with_alpha_bar(x0, 0.0, eps) == eps);
  CHECK_THROWS_AS(diffuse_with_alpha_bar(x0, 1.5, eps), std::invalid_argument);
  CHECK_THROWS_AS(diffuse_with_alpha_bar(x0, 0.5, TimeSeries(2, 2)), std::invalid_argument);

  const auto s = build_schedule(10, 0.01, 0.1);
  CHECK_THROWS_AS(diffuse(x0, 0, eps, s), std::out_of_range);
  CHECK_THROWS_AS(diffuse(x0, 11, eps, s), std::out_of_range);
}

TEST_CASE("property: diffused variance matches 1 for unit data and noise") {
  // Var(sqrt(ab) x0 + sqrt(1-ab) eps) = 1 when x0, eps ~ N(0, I).
  const auto s = build_schedule(1000, 1e-4, 0.02);
  Rng rng(5);
  for (int t : {1, 500, 1000}) {
    double sum_sq = 0.0;
    const int n = 4000;
    for (int k = 0; k < n; ++k) {
      const auto xt = diffuse(test::random_series(1, 8, rng), t, test::random_series(1, 8, rng), s);
      for (double v : xt.values()) sum_sq += v * v;
    }
    CHECK(sum_sq / (n * 8) == doctest::Approx(1.0).epsilon(0.03));
  }
}
