#include "doctest.h"

#include <cmath>
#include <map>

#include "svlv/kernel.hpp"
#include "svlv/lattice.hpp"
#include "svlv/perturbation.hpp"
#include "svlv/spin_system.hpp"
#include "svlv/stats.hpp"

using namespace svlv;

TEST_CASE("lattice keys round trip and translate") {
  for (int d = 1; d <= 4; ++d) {
    Lattice lat(d);
    Site s{};
    Site o{};
    for (int i = 0; i < d; ++i) {
      s[i] = 7 - 5 * i;
      o[i] = i % 2 ? -3 : 2;
    }
    CHECK(lat.decode(lat.encode(s)) == s);
    CHECK(Lattice::shift(lat.encode(s), lat.delta(o)) == lat.encode(s + o));
  }
  Lattice lat(2);
  CHECK(lat.encode(Site{-1, 5, 0, 0}) < lat.encode(Site{0, -5, 0, 0}));
  CHECK(lat.encode(Site{0, -5, 0, 0}) < lat.encode(Site{0, 4, 0, 0}));
}

TEST_CASE("box enumeration") {
  Box b{Site{0, 0, 0, 0}, Site{1, 2, 0, 0}};
  CHECK(b.volume(2) == 6);
  const auto s = b.sites(2);
  REQUIRE(s.size() == 6);
  CHECK(s.front() == Site{0, 0, 0, 0});
  CHECK(s.back() == Site{1, 2, 0, 0});
  CHECK(b.contains(Site{1, 1, 0, 0}, 2));
  CHECK_FALSE(b.contains(Site{2, 1, 0, 0}, 2));
}

TEST_CASE("nearest neighbour kernel") {
  for (int d = 1; d <= 4; ++d) {
    const auto k = nearest_neighbor_kernel(d);
    CHECK(k.support().size() == static_cast<std::size_t>(2 * d));
    CHECK(k.sigma2() == doctest::Approx(1.0 / d));
    CHECK(k.is_uniform());
    CHECK(k.ell(100) == doctest::Approx(10.0));
  }
}

TEST_CASE("long range kernel second moment") {
  for (std::int64_t M : {1, 4, 8}) {
    const auto k = build_long_range_kernel(2, M);
    // direct count over the square
    double s = 0.0, n = 0.0;
    for (std::int64_t i = -M; i <= M; ++i)
      for (std::int64_t j = -M; j <= M; ++j) {
        if (i == 0 && j == 0) continue;
        s += static_cast<double>(i * i);
        n += 1.0;
      }
    CHECK(k.support().size() == static_cast<std::size_t>(n));
    CHECK(k.sigma2() == doctest::Approx(s / n / static_cast<double>(M * M)).epsilon(1e-12));
    CHECK(k.ell(100) == doctest::Approx(10.0 * static_cast<double>(M)));
  }
  CHECK(build_long_range_kernel(2, 16).sigma2() < build_long_range_kernel(2, 8).sigma2());
}

TEST_CASE("fixed kernel validation") {
  const Offset e1{1, 0, 0, 0}, e2{0, 1, 0, 0};
  CHECK_THROWS_AS(build_fixed_kernel(2, {{e1, 0.5}, {e2, 0.5}}), KernelError);  // not symmetric
  CHECK_THROWS_AS(build_fixed_kernel(2, {{e1, 0.5}, {-e1, 0.5}}), KernelError);  // not isotropic
  CHECK_THROWS_AS(build_fixed_kernel(1, {{e1, 0.5}, {-e1, 0.4}}), KernelError);  // not normalized
  const auto k = build_fixed_kernel_exact(1, {{e1, Rational{1, 2}}, {-e1, Rational{1, 2}}});
  CHECK(k.exact_prob(e1) == Rational{1, 2});
  CHECK(k.sigma2() == doctest::Approx(1.0));
}

TEST_CASE("alias sampling matches the law") {
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  AliasTable t(w);
  Rng rng(5);
  std::vector<std::uint64_t> counts(4, 0);
  for (int i = 0; i < 100000; ++i) ++counts[t.sample(rng)];
  CHECK(chi2_goodness(counts, w).p_value > 0.001);
}

TEST_CASE("local densities and exact densities") {
  const auto k = nearest_neighbor_kernel(2);
  Configuration c(2);
  c.insert(Site{1, 0, 0, 0});
  c.insert(Site{0, 1, 0, 0});
  CHECK(local_density(c, k, Site{0, 0, 0, 0}, 1) == doctest::Approx(0.5));
  CHECK(local_density(c, k, Site{0, 0, 0, 0}, 0) == doctest::Approx(0.5));
  CHECK(local_density_exact(c, k, Site{0, 0, 0, 0}, 1)->value() == 0.5);
  CHECK(local_density_exact(c, k, Site{0, 0, 0, 0}, 1)->den == 4);
}

TEST_CASE("Lotka-Volterra table reproduces the product-form rates") {
  const auto p = nearest_neighbor_kernel(2);
  const double N = 30, t0 = 3, t1 = -2;
  const auto table = lv_table(p, t0, t1);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Configuration c(2);
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j)
        if (rng.uniform() < 0.5) c.insert(Site{i, j, 0, 0});
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j) {
        const Site x{i, j, 0, 0};
        const double f1 = local_density(c, p, x, 1), f0 = 1.0 - f1;
        const double direct = c.contains(x) ? N * f0 + t1 * f0 * f0 : N * f1 + t0 * f1 * f1;
        CHECK(flip_rate(c, x, p, table, N) == doctest::Approx(direct).epsilon(1e-12));
      }
  }
}

TEST_CASE("two-kernel table with distinct competition laws") {
  const auto p = nearest_neighbor_kernel(1);
  const OffsetLaw pb(1, {{Offset{2, 0, 0, 0}, 0.5}, {Offset{-2, 0, 0, 0}, 0.5}});
  const OffsetLaw pd(1, {{Offset{1, 0, 0, 0}, 1.0}});
  const auto table = lv_two_kernel_table(p, pb, pd, 2, 5);
  Configuration c(1);
  for (int i : {-2, 1, 3}) c.insert(Site{i, 0, 0, 0});
  for (int x = -3; x <= 4; ++x) {
    const Site s{x, 0, 0, 0};
    const double f1 = local_density(c, p.law(), s, 1), f0 = 1 - f1;
    const double direct = c.contains(s) ? 7 * f0 + 5 * f0 * local_density(c, pd, s, 0)
                                        : 7 * f1 + 2 * f1 * local_density(c, pb, s, 1);
    CHECK(flip_rate(c, s, p, table, 7) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("table origin fold and chi") {
  PerturbationTable t(1);
  t.add({Offset{0, 0, 0, 0}, Offset{1, 0, 0, 0}}, 3.0, 2.0);
  CHECK(t.size() == 1);
  CHECK(t.at({Offset{1, 0, 0, 0}}).delta == 2.0);
  CHECK(t.at({Offset{1, 0, 0, 0}}).beta == 0.0);
  Configuration c(1);
  c.insert(Site{1, 0, 0, 0});
  CHECK(chi(c, {Offset{1, 0, 0, 0}}, Site{0, 0, 0, 0}));
  CHECK_FALSE(chi(c, {Offset{-1, 0, 0, 0}}, Site{0, 0, 0, 0}));
  CHECK(chi(c, {}, Site{5, 0, 0, 0}));
}

TEST_CASE("validation certifies LV tables and flags negative rates") {
  const auto p = nearest_neighbor_kernel(3);
  const auto rep = validate_table(lv_table(p, 5, 5), p, 100);
  CHECK(rep.ok());
  REQUIRE(rep.k_delta);
  CHECK(rep.k_delta_source == "lv-certificate");
  CHECK(*rep.k_delta == doctest::Approx(5.0));
  PerturbationTable bad(3);
  bad.add({Offset{1, 0, 0, 0}}, -50.0, 0.0);
  CHECK_FALSE(validate_table(bad, p, 10).positivity_ok);
  const auto dk = dominating_kernels(lv_table(p, 5, 5), p, 5);
  CHECK(dk.c_bar == doctest::Approx(dk.c_beta + 5.0));
}
