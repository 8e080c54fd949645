#include "doctest.h"

#include <cmath>
#include <numbers>

#include "svlv/sbm.hpp"
#include "svlv/stats.hpp"

using namespace svlv;

namespace {

// Simpson rule for E phi(y + s Z), Z standard normal, in d = 1.
double gauss_expect(const TestFn& phi, double y, double s) {
  const int n = 4000;
  const double a = -10.0, h = 20.0 / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = a + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * phi.value(0.0, Point{y + s * z}, 1) * std::exp(-0.5 * z * z);
  }
  return sum * h / 3.0 / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("Feller moment formulas against the Euler scheme") {
  for (double b : {0.5, 2.0}) {
    for (double theta : {-1.0, 0.0, 1.0}) {
      RunningStats z;
      Rng rng(derive_seed(42, {static_cast<std::uint64_t>(b * 10), static_cast<std::uint64_t>(theta + 5)}));
      for (int r = 0; r < 4000; ++r) z.add(simulate_feller_euler(1.0, 1.0, b, theta, 1e-3, rng));
      const auto m = feller_moments(1.0, 1.0, b, theta);
      CHECK(std::abs(z.mean() - m.mean) <= 4.0 * z.se());
      CHECK(z.variance() == doctest::Approx(m.variance).epsilon(0.1));
    }
  }
}

TEST_CASE("Feller moments limits") {
  const auto m0 = feller_moments(2.0, 3.0, 1.5, 0.0);
  CHECK(m0.mean == doctest::Approx(2.0));
  CHECK(m0.variance == doctest::Approx(1.5 * 2.0 * 3.0));
  const auto m1 = feller_moments(2.0, 3.0, 1.5, 1e-9);
  CHECK(m1.variance == doctest::Approx(m0.variance).epsilon(1e-6));
  CHECK(feller_moments(2.0, 1.0, 0.0, 0.5).variance == 0.0);
}

TEST_CASE("exact Feller transition") {
  Rng rng(7);
  RunningStats z;
  Proportion ext;
  for (int r = 0; r < 20000; ++r) {
    const double v = simulate_feller(1.0, 1.0, 2.0, 0.0, rng);
    CHECK(v >= 0.0);
    z.add(v);
    ++ext.trials;
    if (v == 0.0) ++ext.successes;
  }
  CHECK(feller_extinction_probability(1.0, 1.0, 2.0, 0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(std::abs(ext.p() - std::exp(-1.0)) <= 3.0 * ext.se());
  const auto m = feller_moments(1.0, 1.0, 2.0, 0.0);
  CHECK(std::abs(z.mean() - m.mean) <= 4.0 * z.se());
}

TEST_CASE("Feller path is absorbed at zero") {
  Rng rng(1);
  const std::vector<double> grid{0.5, 1.0, 2.0, 4.0, 8.0};
  for (int r = 0; r < 200; ++r) {
    const auto p = simulate_feller_path(0.2, grid, 2.0, -1.0, rng);
    REQUIRE(p.size() == grid.size());
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p[i - 1] == 0.0) CHECK(p[i] == 0.0);
  }
}

TEST_CASE("heat semigroup on a Gaussian against quadrature") {
  const auto phi = TestFn::gaussian(Point{0.3}, 0.4, 2.0);
  const double t = 0.7, s2 = 1.0 / 3.0;
  const auto pt = heat_evolve(phi, 1, t, s2);
  for (double y : {-1.0, 0.0, 0.3, 1.2})
    CHECK(pt.value(0.0, Point{y}, 1) == doctest::Approx(gauss_expect(phi, y, std::sqrt(s2 * t))).epsilon(1e-8));
  CHECK(heat_evolve(TestFn::constant(3.0), 2, 1.0, 1.0).value(0.0, Point{}, 2) == 3.0);
  CHECK_THROWS_AS(heat_evolve(TestFn::smooth_indicator(Point{}, 1, 1), 2, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("heat semigroup in two dimensions factorizes") {
  const auto phi = TestFn::gaussian(Point{0.0, 0.0}, 0.5);
  const auto pt = heat_evolve(phi, 2, 0.4, 1.0);
  const auto p1 = heat_evolve(TestFn::gaussian(Point{0.0}, 0.5), 1, 0.4, 1.0);
  const double a = p1.value(0.0, Point{0.3}, 1), b = p1.value(0.0, Point{-0.2}, 1);
  CHECK(pt.value(0.0, Point{0.3, -0.2}, 2) == doctest::Approx(a * b));
}

TEST_CASE("super-Brownian mean") {
  const auto phi = TestFn::gaussian(Point{0.0}, 0.5);
  const WeightedPoint x0[2] = {{Point{0.1}, 0.5}, {Point{-0.4}, 1.5}};
  const double t = 0.3, theta = -2.0, s2 = 1.0;
  const auto pt = heat_evolve(phi, 1, t, s2);
  const double expect = std::exp(theta * t) * (0.5 * pt.value(0, Point{0.1}, 1) + 1.5 * pt.value(0, Point{-0.4}, 1));
  CHECK(sbm_mean(x0, 1, phi, t, theta, s2) == doctest::Approx(expect));
  CHECK(sbm_mean(x0, 1, TestFn::constant(1.0), t, theta, s2) == doctest::Approx(2.0 * std::exp(theta * t)));
}

TEST_CASE("parameter validation") {
  MPParams p{1.0, 0.0, 1.0, "test"};
  CHECK_NOTHROW(p.validate());
  p.b = -1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = MPParams{1.0, 0.0, 0.0, "test"};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
