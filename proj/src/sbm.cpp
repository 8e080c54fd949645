#include "svlv/sbm.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace svlv {

void MPParams::validate() const {
  if (!(b >= 0.0)) throw std::invalid_argument("branching rate must be >= 0");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma^2 must be > 0");
  if (!std::isfinite(theta)) throw std::invalid_argument("drift must be finite");
}

namespace {

// (e^{theta t} - 1) / theta, equal to t at theta = 0.
double growth_integral(double theta, double t) {
  if (theta == 0.0) return t;
  return std::expm1(theta * t) / theta;
}

}  // namespace

FellerMoments feller_moments(double z0, double t, double b, double theta) {
  if (z0 < 0.0 || t < 0.0) throw std::invalid_argument("feller_moments needs z0 >= 0 and t >= 0");
  const double e = std::exp(theta * t);
  return {z0 * e, b * z0 * e * growth_integral(theta, t)};
}

double feller_extinction_probability(double z0, double t, double b, double theta) {
  if (z0 == 0.0) return 1.0;
  if (b == 0.0 || t == 0.0) return 0.0;
  const double c = b * growth_integral(theta, t) / 2.0;
  return std::exp(-z0 * std::exp(theta * t) / c);
}

double simulate_feller(double z0, double t, double b, double theta, Rng& rng) {
  if (z0 < 0.0 || t < 0.0) throw std::invalid_argument("simulate_feller needs z0 >= 0 and t >= 0");
  if (z0 == 0.0) return 0.0;
  if (t == 0.0) return z0;
  if (b == 0.0) return z0 * std::exp(theta * t);
  const double c = b * growth_integral(theta, t) / 2.0;
  const double lambda = z0 * std::exp(theta * t) / c;
  std::poisson_distribution<std::int64_t> pois(lambda);
  const std::int64_t k = pois(rng.engine());
  if (k == 0) return 0.0;
  std::gamma_distribution<double> gam(static_cast<double>(k), c);
  return gam(rng.engine());
}

std::vector<double> simulate_feller_path(double z0, std::span<const double> grid, double b, double theta, Rng& rng) {
  std::vector<double> out;
  out.reserve(grid.size());
  double z = z0, t = 0.0;
  for (double g : grid) {
    if (g < t) throw std::invalid_argument("grid must be increasing and nonnegative");
    z = simulate_feller(z, g - t, b, theta, rng);
    t = g;
    out.push_back(z);
  }
  return out;
}

double simulate_feller_euler(double z0, double t, double b, double theta, double step, Rng& rng) {
  if (!(step > 0.0)) throw std::invalid_argument("Euler step must be > 0");
  double z = z0;
  const auto n = static_cast<std::int64_t>(std::ceil(t / step - 1e-9));
  const double h = n > 0 ? t / static_cast<double>(n) : 0.0;
  const double sh = std::sqrt(h);
  for (std::int64_t i = 0; i < n && z > 0.0; ++i) z += theta * z * h + std::sqrt(b * z) * sh * rng.normal();
  return std::max(z, 0.0);
}

TestFn heat_evolve(const TestFn& phi, int dim, double t, double sigma2) {
  switch (phi.kind()) {
    case TestFn::Kind::Constant:
      return phi;
    case TestFn::Kind::Gaussian: {
      const double w2 = phi.width() * phi.width();
      const double v2 = w2 + sigma2 * t;
      return TestFn::gaussian(phi.center(), std::sqrt(v2), phi.amplitude() * std::pow(w2 / v2, dim / 2.0));
    }
    default:
      throw std::invalid_argument("heat semigroup is closed-form only for constant and Gaussian test functions");
  }
}

double sbm_mean(std::span<const WeightedPoint> x0, int dim, const TestFn& phi, double t, double theta, double sigma2) {
  const TestFn pt = heat_evolve(phi, dim, t, sigma2);
  double s = 0.0;
  for (const auto& w : x0) s += w.mass * pt.value(0.0, w.y, dim);
  return std::exp(theta * t) * s;
}

double sbm_mean(const EmpiricalMeasure& x0, const TestFn& phi, double t, double theta, double sigma2) {
  std::vector<WeightedPoint> atoms;
  atoms.reserve(x0.atoms().size());
  for (const auto& a : x0.atoms()) atoms.push_back({a, x0.atom_mass()});
  return sbm_mean(atoms, x0.dim(), phi, t, theta, sigma2);
}

}  // namespace svlv
