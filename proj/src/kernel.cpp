#include "svlv/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace svlv {

namespace {

constexpr double kNormTolerance = 1e-12;

Rational reduce(Rational r) {
  const std::int64_t g = std::gcd(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  if (r.den < 0) {
    r.num = -r.num;
    r.den = -r.den;
  }
  return r;
}

}  // namespace

Rational operator+(const Rational& a, const Rational& b) {
  const std::int64_t l = std::lcm(a.den, b.den);
  return reduce({a.num * (l / a.den) + b.num * (l / b.den), l});
}

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t n = weights.size();
  accept_.assign(n, 1.0);
  alias_.resize(n);
  std::iota(alias_.begin(), alias_.end(), 0u);
  if (n == 0) return;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    accept_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : small) accept_[i] = 1.0;
  for (auto i : large) accept_[i] = 1.0;
}

std::size_t AliasTable::sample(Rng& rng) const {
  const auto i = static_cast<std::size_t>(rng.index(accept_.size()));
  if (accept_[i] >= 1.0) return i;
  return rng.uniform() < accept_[i] ? i : alias_[i];
}

OffsetLaw::OffsetLaw(int dim, std::vector<std::pair<Offset, double>> table) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw KernelError("kernel dimension out of range");
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double sum = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& [off, p] = table[i];
    for (int k = dim; k < kMaxDim; ++k)
      if (off[k] != 0) throw KernelError("offset has coordinates beyond the kernel dimension");
    if (i > 0 && table[i - 1].first == off) throw KernelError("duplicate offset " + to_string(off, dim));
    if (!(p >= 0.0) || !std::isfinite(p)) throw KernelError("negative or non-finite probability");
    if (is_origin(off) && p != 0.0) throw KernelError("mass at origin");
    sum += p;
    if (p == 0.0) continue;
    offsets_.push_back(off);
    probs_.push_back(p);
    lookup_.emplace(off, p);
  }
  if (offsets_.empty()) throw KernelError("kernel has empty support");
  if (std::abs(sum - 1.0) > kNormTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "kernel not normalized: total mass " << sum;
    throw KernelError(os.str());
  }
  alias_ = AliasTable(probs_);
}

double OffsetLaw::prob(const Offset& o) const {
  auto it = lookup_.find(o);
  return it == lookup_.end() ? 0.0 : it->second;
}

double OffsetLaw::second_moment(int i, int j) const {
  double s = 0.0;
  for (std::size_t k = 0; k < offsets_.size(); ++k)
    s += static_cast<double>(offsets_[k][i]) * static_cast<double>(offsets_[k][j]) * probs_[k];
  return s;
}

std::optional<Rational> KernelSpec::exact_prob(const Offset& o) const {
  if (!is_uniform()) return std::nullopt;
  return law_.prob(o) > 0.0 ? Rational{1, uniform_den_} : Rational{0, 1};
}

double KernelSpec::ell(std::int64_t N) const {
  return static_cast<double>(range_) * std::sqrt(static_cast<double>(N));
}

void KernelSpec::finish() {
  const double m = static_cast<double>(range_);
  sigma2_ = law_.second_moment(0, 0) / (m * m);
  max_extent_ = 0;
  for (const auto& o : law_.offsets())
    for (int i = 0; i < dim(); ++i) max_extent_ = std::max<std::int64_t>(max_extent_, std::abs(o[i]));
}

namespace {

void check_symmetric_isotropic(const OffsetLaw& law) {
  const int d = law.dim();
  for (std::size_t k = 0; k < law.size(); ++k) {
    const Offset& o = law.offsets()[k];
    const double p = law.probs()[k];
    const double q = law.prob(-o);
    if (std::abs(p - q) > kNormTolerance)
      throw KernelError("asymmetric kernel: p" + to_string(o, d) + " != p" + to_string(-o, d));
  }
  const double s2 = law.second_moment(0, 0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double target = i == j ? s2 : 0.0;
      const double m = law.second_moment(i, j);
      if (std::abs(m - target) > 1e-9 * std::max(1.0, s2)) {
        std::ostringstream os;
        os << "anisotropic covariance: sum x" << i << " x" << j << " p(x) = " << m << " but expected " << target;
        throw KernelError(os.str());
      }
    }
}

}  // namespace

KernelSpec build_long_range_kernel(int dim, std::int64_t range) {
  if (range < 1) throw KernelError("long-range kernel needs M_N >= 1");
  if (dim < 1 || dim > kMaxDim) throw KernelError("kernel dimension out of range");
  Box box;
  for (int i = 0; i < dim; ++i) {
    box.lo[i] = static_cast<std::int32_t>(-range);
    box.hi[i] = static_cast<std::int32_t>(range);
  }
  const auto all = box.sites(dim);
  const auto count = static_cast<std::int64_t>(all.size()) - 1;
  std::vector<std::pair<Offset, double>> table;
  table.reserve(all.size());
  for (const auto& s : all)
    if (!is_origin(s)) table.emplace_back(s, 1.0 / static_cast<double>(count));
  // Uniform weights can miss 1 by a few ulps; the alias table and the
  // normalization check only need them equal.
  double sum = 0.0;
  for (auto& e : table) sum += e.second;
  if (std::abs(sum - 1.0) > kNormTolerance)
    throw KernelError("long-range kernel normalization failed");
  KernelSpec k;
  k.law_ = OffsetLaw(dim, std::move(table));
  k.variant_ = KernelVariant::LongRange;
  k.range_ = range;
  k.uniform_den_ = count;
  k.id_ = "lr" + std::to_string(dim) + "M" + std::to_string(range);
  k.finish();
  return k;
}

KernelSpec build_fixed_kernel(int dim, std::vector<std::pair<Offset, double>> table) {
  KernelSpec k;
  k.law_ = OffsetLaw(dim, std::move(table));
  check_symmetric_isotropic(k.law_);
  k.variant_ = KernelVariant::Fixed;
  k.range_ = 1;
  k.id_ = "fixed" + std::to_string(dim) + "n" + std::to_string(k.law_.size());
  k.finish();
  return k;
}

KernelSpec build_fixed_kernel_exact(int dim, std::vector<std::pair<Offset, Rational>> table) {
  Rational total{0, 1};
  std::vector<std::pair<Offset, double>> approx;
  bool uniform = true;
  std::optional<Rational> first;
  for (auto& [o, r] : table) {
    if (r.den <= 0 || r.num < 0) throw KernelError("negative or malformed rational probability");
    r = reduce(r);
    if (r.num == 0) continue;
    if (is_origin(o)) throw KernelError("mass at origin");
    total = total + r;
    if (!first) first = r;
    else if (!(*first == r)) uniform = false;
    approx.emplace_back(o, r.value());
  }
  if (!(total == Rational{1, 1})) throw KernelError("kernel not normalized (exact weights)");
  KernelSpec k = build_fixed_kernel(dim, std::move(approx));
  if (uniform && first && first->num == 1) k.uniform_den_ = first->den;
  return k;
}

KernelSpec nearest_neighbor_kernel(int dim) {
  std::vector<std::pair<Offset, Rational>> table;
  for (int i = 0; i < dim; ++i)
    for (int s : {-1, 1}) {
      Offset o{};
      o[i] = s;
      table.emplace_back(o, Rational{1, 2 * dim});
    }
  KernelSpec k = build_fixed_kernel_exact(dim, std::move(table));
  k.id_ = "nn" + std::to_string(dim);
  return k;
}

ScalingParams make_scaling(const KernelSpec& kernel, std::int64_t N) {
  if (N < 1) throw std::invalid_argument("N must be positive");
  return {N, N, kernel.ell(N)};
}

double local_density(const Configuration& config, const OffsetLaw& law, const Site& site, int type) {
  double f1 = 0.0;
  const auto offs = law.offsets();
  const auto probs = law.probs();
  for (std::size_t k = 0; k < offs.size(); ++k)
    if (config.contains(site + offs[k])) f1 += probs[k];
  return type == 1 ? f1 : 1.0 - f1;
}

std::optional<Rational> local_density_exact(const Configuration& config, const KernelSpec& kernel, const Site& site,
                                            int type) {
  if (!kernel.is_uniform()) return std::nullopt;
  std::int64_t count = 0;
  for (const auto& o : kernel.support())
    if (config.contains(site + o)) ++count;
  const std::int64_t den = kernel.uniform_denominator();
  return Rational{type == 1 ? count : den - count, den};
}

}  // namespace svlv
