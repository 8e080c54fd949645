#include "doctest.h"

#include <cmath>

#include "svlv/experiments.hpp"
#include "svlv/io.hpp"
#include "svlv/stats.hpp"

using namespace svlv;

TEST_CASE("probabilities parse from numbers, decimals and fractions") {
  CHECK(parse_probability(json(0.25)).value == 0.25);
  CHECK(parse_probability(json("0.5")).value == 0.5);
  const auto r = parse_probability(json("1/6"));
  REQUIRE(r.exact);
  CHECK(r.exact->num == 1);
  CHECK(r.exact->den == 6);
  CHECK_THROWS_AS(parse_probability(json("1/0")), ConfigError);
  CHECK_THROWS_AS(parse_probability(json("abc")), ConfigError);
  CHECK_THROWS_AS(parse_probability(json(-0.1)), ConfigError);
}

TEST_CASE("kernel json round trip") {
  const json nn = {{"d", 3}, {"variant", "nearest_neighbor"}};
  const auto k = kernel_from_json(nn);
  const auto back = kernel_from_json(kernel_to_json(k));
  CHECK(back.support().size() == 6);
  CHECK(back.exact_prob(Offset{1, 0, 0, 0}) == Rational{1, 6});
  const json lr = {{"d", 2}, {"variant", "long_range"}, {"M_N", 3}};
  CHECK(kernel_from_json(kernel_to_json(kernel_from_json(lr))).range() == 3);
}

TEST_CASE("float kernel tables within 1e-9 are renormalized") {
  json t = json::array();
  for (int i = 0; i < 3; ++i)
    for (int s : {-1, 1}) {
      json o = {0, 0, 0};
      o[i] = s;
      t.push_back({o, 0.16666666666});
    }
  const auto k = kernel_from_json({{"d", 3}, {"table", t}});
  double sum = 0.0;
  for (double p : k.probs()) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  t[0][1] = 0.2;
  CHECK_THROWS(kernel_from_json({{"d", 3}, {"table", t}}));
}

TEST_CASE("perturbation table json round trip") {
  PerturbationTable t(2);
  t.add({Offset{1, 0, 0, 0}}, 0.5, -0.25);
  t.add({}, 0.0, 2.0);
  const auto back = table_from_json(table_to_json(t), 2);
  CHECK(back.size() == 2);
  CHECK(back.at({Offset{1, 0, 0, 0}}).delta == -0.25);
  CHECK(back.at({}).delta == 2.0);
}

TEST_CASE("initial configurations") {
  const auto box = initial_from_json({{"kind", "box"}, {"lo", {0, 0}}, {"hi", {1, 2}}}, 2, 10, 1, 1);
  CHECK(box.size() == 6);
  const auto mass = initial_from_json({{"kind", "mass"}, {"mass", 2}, {"radius", 1}}, 2, 50, 10, 3);
  CHECK(mass.size() == 100);
  for (const auto& s : mass.sites()) CHECK(std::max(std::abs(s[0]), std::abs(s[1])) <= 10);
  const auto again = initial_from_json({{"kind", "mass"}, {"mass", 2}, {"radius", 1}}, 2, 50, 10, 3);
  CHECK(mass.same_sites(again));
  CHECK_THROWS_AS(initial_from_json({{"kind", "mass"}, {"mass", 500}, {"radius", 0.1}}, 2, 50, 10, 3), ConfigError);
  CHECK_THROWS_AS(initial_from_json({{"kind", "nope"}}, 2, 50, 10, 3), ConfigError);
  const auto ball = initial_from_json({{"kind", "ball"}, {"radius", 1}}, 3, 1, 1, 1);
  CHECK(ball.size() == 7);
}

TEST_CASE("double formatting round trips") {
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("running stats against direct formulas") {
  const std::vector<double> v{1, 4, 2, 8, 5, 7};
  RunningStats s;
  for (double x : v) s.add(x);
  double m = 0.0;
  for (double x : v) m += x;
  m /= 6;
  double q = 0.0;
  for (double x : v) q += (x - m) * (x - m);
  CHECK(s.mean() == doctest::Approx(m));
  CHECK(s.variance() == doctest::Approx(q / 5));
  RunningStats a, b;
  for (int i = 0; i < 3; ++i) a.add(v[i]);
  for (int i = 3; i < 6; ++i) b.add(v[i]);
  a.merge(b);
  CHECK(a.variance() == doctest::Approx(s.variance()));
}

TEST_CASE("jackknife of the mean is the usual standard error") {
  const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
  RunningStats s;
  for (double x : v) s.add(x);
  const auto [est, se] = jackknife(v.size(), [&](std::size_t skip) {
    double sum = 0.0, n = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (i != skip) sum += v[i], n += 1;
    return sum / n;
  });
  CHECK(est == doctest::Approx(s.mean()));
  CHECK(se == doctest::Approx(s.se()));
}

TEST_CASE("normal and chi-square tails") {
  CHECK(normal_two_sided_p(1.959963985) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(normal_quantile(0.025) == doctest::Approx(1.959963985).epsilon(1e-6));
  const std::vector<std::uint64_t> counts{50, 50};
  const std::vector<double> probs{0.5, 0.5};
  CHECK(chi2_goodness(counts, probs).p_value == doctest::Approx(1.0));
  const std::vector<std::uint64_t> skew{70, 30};
  // chi2 = 16 with one degree of freedom
  CHECK(chi2_goodness(skew, probs).statistic == doctest::Approx(16.0));
  CHECK(chi2_goodness(skew, probs).p_value == doctest::Approx(6.334248e-5).epsilon(1e-4));
}

TEST_CASE("two sample chi-square detects a shift") {
  std::vector<std::int64_t> a, b, c;
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    a.push_back(static_cast<std::int64_t>(rng.index(10)));
    b.push_back(static_cast<std::int64_t>(rng.index(10)));
    c.push_back(static_cast<std::int64_t>(rng.index(10) + (rng.uniform() < 0.2)));
  }
  CHECK(chi2_two_sample(a, b).p_value > 0.001);
  CHECK(chi2_two_sample(a, c).p_value < 0.001);
}

TEST_CASE("slope through the origin") {
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6.5};
  CHECK(slope_through_origin(x, y) == doctest::Approx((2 + 8 + 19.5) / 14.0));
}

TEST_CASE("ladder verdicts") {
  const std::vector<Estimate> good{{1.5, 0.05, 500}, {1.2, 0.05, 500}, {1.05, 0.05, 500}};
  CHECK(ladder_verdict(good, 1.0).label == "pass");
  const std::vector<Estimate> slow{{1.5, 0.01, 500}, {1.3, 0.01, 500}, {1.2, 0.01, 500}};
  CHECK(ladder_verdict(slow, 1.0).label == "trend");
  const std::vector<Estimate> away{{1.1, 0.01, 500}, {1.3, 0.01, 500}, {1.5, 0.01, 500}};
  CHECK(ladder_verdict(away, 1.0).label == "fail");
  const std::vector<Estimate> few{{1.0, 0.1, 10}};
  CHECK(ladder_verdict(few, 1.0).label == "insufficient replicas");
}

TEST_CASE("uniform grid") {
  const auto g = uniform_grid(2.0, 4);
  REQUIRE(g.size() == 4);
  CHECK(g.front() == 0.5);
  CHECK(g.back() == 2.0);
}
