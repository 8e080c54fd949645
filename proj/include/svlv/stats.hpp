#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace svlv {

/// Welford running mean and variance.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o);
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance (0 for fewer than two samples).
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  /// Standard error of the mean.
  double se() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Proportion {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
  double p() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
  double se() const { return trials ? std::sqrt(p() * (1.0 - p()) / static_cast<double>(trials)) : 0.0; }
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df = 0.0;
};

/// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);
/// Upper quantile of the standard normal.
double normal_quantile(double p);
/// Pooled two-proportion z-test.
TestResult two_proportion_z(const Proportion& a, const Proportion& b);
/// z-test for equality of two independent means with given standard errors.
TestResult two_mean_z(double m1, double se1, double m2, double se2);
/// Chi-square homogeneity test of two samples of nonnegative integers.
/// Values are binned so that every bin has expected count >= min_expected
/// in both samples (tail bins are merged).
TestResult chi2_two_sample(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                           double min_expected = 5.0);
/// Chi-square goodness of fit of counts against probabilities.
TestResult chi2_goodness(std::span<const std::uint64_t> counts, std::span<const double> probs);

/// Least squares slope of y on x through the origin.
double slope_through_origin(std::span<const double> x, std::span<const double> y);

/// Delete-one jackknife: estimate(skip) recomputes the statistic without
/// replicate `skip` (skip = n means no deletion). Returns (estimate, se).
std::pair<double, double> jackknife(std::size_t n, const std::function<double(std::size_t)>& estimate);

/// One-sided Page-type trend check on a ladder of estimates: true when the
/// distances |e_i - target| are nonincreasing up to `slack` combined
/// standard errors and the last is smaller than the first by a positive
/// amount at the given level (one-sided z).
struct TrendVerdict {
  bool monotone = false;
  bool improved = false;
  double z_first_last = 0.0;
};
TrendVerdict trend_toward(std::span<const double> est, std::span<const double> se, double target, double slack,
                          double level);

}  // namespace svlv
