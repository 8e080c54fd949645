#include "svlv/stats.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace svlv {

void RunningStats::merge(const RunningStats& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(n_ + o.n_);
  const double d = o.mean_ - mean_;
  mean_ += d * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

double normal_two_sided_p(double z) {
  const boost::math::normal_distribution<double> nd;
  return 2.0 * boost::math::cdf(boost::math::complement(nd, std::abs(z)));
}

double normal_quantile(double p) {
  const boost::math::normal_distribution<double> nd;
  return boost::math::quantile(boost::math::complement(nd, p));
}

TestResult two_proportion_z(const Proportion& a, const Proportion& b) {
  TestResult r;
  if (a.trials == 0 || b.trials == 0) return r;
  const double pooled = static_cast<double>(a.successes + b.successes) / static_cast<double>(a.trials + b.trials);
  const double var = pooled * (1.0 - pooled) * (1.0 / static_cast<double>(a.trials) + 1.0 / static_cast<double>(b.trials));
  if (var <= 0.0) return r;
  r.statistic = (a.p() - b.p()) / std::sqrt(var);
  r.p_value = normal_two_sided_p(r.statistic);
  return r;
}

TestResult two_mean_z(double m1, double se1, double m2, double se2) {
  TestResult r;
  const double s = std::sqrt(se1 * se1 + se2 * se2);
  if (s <= 0.0) {
    r.p_value = m1 == m2 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = (m1 - m2) / s;
  r.p_value = normal_two_sided_p(r.statistic);
  return r;
}

namespace {

double chi2_upper(double stat, double df) {
  if (df <= 0.0) return 1.0;
  const boost::math::chi_squared_distribution<double> c(df);
  return boost::math::cdf(boost::math::complement(c, stat));
}

}  // namespace

TestResult chi2_two_sample(std::span<const std::int64_t> a, std::span<const std::int64_t> b, double min_expected) {
  std::map<std::int64_t, std::pair<double, double>> h;
  for (auto v : a) h[v].first += 1.0;
  for (auto v : b) h[v].second += 1.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TestResult r;
  if (na == 0 || nb == 0) return r;
  const double fa = na / (na + nb), fb = nb / (na + nb);
  std::vector<std::pair<double, double>> bins;
  std::pair<double, double> cur{0.0, 0.0};
  for (const auto& [v, c] : h) {
    cur.first += c.first;
    cur.second += c.second;
    const double tot = cur.first + cur.second;
    if (tot * fa >= min_expected && tot * fb >= min_expected) {
      bins.push_back(cur);
      cur = {0.0, 0.0};
    }
  }
  if (cur.first + cur.second > 0.0) {
    if (bins.empty()) bins.push_back(cur);
    else {
      bins.back().first += cur.first;
      bins.back().second += cur.second;
    }
  }
  if (bins.size() < 2) return r;
  for (const auto& [x, y] : bins) {
    const double tot = x + y;
    const double ea = tot * fa, eb = tot * fb;
    r.statistic += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
  }
  r.df = static_cast<double>(bins.size() - 1);
  r.p_value = chi2_upper(r.statistic, r.df);
  return r;
}

TestResult chi2_goodness(std::span<const std::uint64_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size()) throw std::invalid_argument("chi2_goodness: size mismatch");
  double n = 0.0;
  for (auto c : counts) n += static_cast<double>(c);
  TestResult r;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * probs[i];
    if (e <= 0.0) continue;
    const double d = static_cast<double>(counts[i]) - e;
    r.statistic += d * d / e;
    r.df += 1.0;
  }
  r.df -= 1.0;
  r.p_value = chi2_upper(r.statistic, r.df);
  return r;
}

double slope_through_origin(std::span<const double> x, std::span<const double> y) {
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::pair<double, double> jackknife(std::size_t n, const std::function<double(std::size_t)>& estimate) {
  const double full = estimate(n);
  if (n < 2) return {full, 0.0};
  std::vector<double> loo(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = estimate(i);
    mean += loo[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return {full, std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n))};
}

TrendVerdict trend_toward(std::span<const double> est, std::span<const double> se, double target, double slack,
                          double level) {
  TrendVerdict v;
  if (est.empty()) return v;
  v.monotone = true;
  for (std::size_t i = 1; i < est.size(); ++i) {
    const double prev = std::abs(est[i - 1] - target), now = std::abs(est[i] - target);
    const double s = std::sqrt(se[i - 1] * se[i - 1] + se[i] * se[i]);
    if (now > prev + slack * s) v.monotone = false;
  }
  const std::size_t l = est.size() - 1;
  const double s = std::sqrt(se[0] * se[0] + se[l] * se[l]);
  const double gain = std::abs(est[0] - target) - std::abs(est[l] - target);
  v.z_first_last = s > 0.0 ? gain / s : 0.0;
  v.improved = v.z_first_last > normal_quantile(level);
  return v;
}

}  // namespace svlv
