#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svlv/observables.hpp"
#include "svlv/rng.hpp"

namespace svlv {

/// Parameters (b, theta, sigma^2) of the limiting martingale problem.
struct MPParams {
  double b = 0.0;
  double theta = 0.0;
  double sigma2 = 1.0;
  std::string provenance;
  /// Throws std::invalid_argument unless b >= 0 and sigma2 > 0.
  void validate() const;
};

struct FellerMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of Z_t for dZ = theta Z dt + sqrt(b Z) dW, Z_0 = z0.
FellerMoments feller_moments(double z0, double t, double b, double theta);

/// P(Z_t = 0) = exp(-z0 e^{theta t} / c_t) with c_t = b (e^{theta t} - 1) / (2 theta).
double feller_extinction_probability(double z0, double t, double b, double theta);

/// Exact transition: K ~ Poisson(z0 e^{theta t} / c_t), Z_t ~ Gamma(K, c_t)
/// (Z_t = 0 when K = 0).
double simulate_feller(double z0, double t, double b, double theta, Rng& rng);

/// Path on a grid by chaining exact transitions. grid must be increasing
/// and start at or after 0.
std::vector<double> simulate_feller_path(double z0, std::span<const double> grid, double b, double theta, Rng& rng);

/// Full-truncation Euler scheme, absorbed at 0 once the state is <= 0.
double simulate_feller_euler(double z0, double t, double b, double theta, double step, Rng& rng);

/// Weighted atoms of an analytic initial measure.
struct WeightedPoint {
  Point y{};
  double mass = 0.0;
};

/// e^{theta t} X0(P_t phi) with P_t the heat semigroup generated by
/// sigma^2 Delta / 2. Supports constant and Gaussian phi only.
double sbm_mean(std::span<const WeightedPoint> x0, int dim, const TestFn& phi, double t, double theta, double sigma2);
double sbm_mean(const EmpiricalMeasure& x0, const TestFn& phi, double t, double theta, double sigma2);

/// P_t phi for a Gaussian or constant phi.
TestFn heat_evolve(const TestFn& phi, int dim, double t, double sigma2);

}  // namespace svlv
