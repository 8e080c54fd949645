#include "svlv/spin_system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace svlv {

Model voter_model(const KernelSpec& kernel, double N) {
  Model m;
  m.system = SpinSystem{kernel, N, PerturbationTable(kernel.dim()), std::nullopt};
  m.product = ProductForm{N};
  return m;
}

Model lv_model(const KernelSpec& kernel, double N, double theta0, double theta1) {
  Model m;
  m.system = SpinSystem{kernel, N, lv_table(kernel, theta0, theta1), std::nullopt};
  m.product = ProductForm{N, theta0, theta1};
  return m;
}

Model lv_two_kernel_model(const KernelSpec& p, const OffsetLaw& p_b, const OffsetLaw& p_d, double N, double theta0,
                          double theta1) {
  Model m;
  m.system = SpinSystem{p, N, lv_two_kernel_table(p, p_b, p_d, theta0, theta1), std::nullopt};
  ProductForm pf{N, theta0, theta1};
  pf.birth_law = p_b;
  pf.death_law = p_d;
  m.product = pf;
  return m;
}

Model biased_voter_model(const KernelSpec& p, const std::optional<OffsetLaw>& p_bar, double v, double b) {
  if (!(v > 0.0)) throw std::invalid_argument("biased voter model needs v > 0");
  if (b < 0.0) throw std::invalid_argument("biased voter model needs b >= 0");
  if (b > 0.0 && !p_bar) throw std::invalid_argument("bias kernel required when b > 0");
  ProductForm pf{v};
  pf.bias = b;
  if (b > 0.0) pf.bias_law = p_bar;
  Model m;
  m.system = SpinSystem{p, v, product_table(p, pf), std::nullopt};
  m.product = pf;
  return m;
}

Model table_model(const KernelSpec& kernel, double N, PerturbationTable table) {
  if (table.dim() != kernel.dim()) throw TableError("table dimension differs from kernel dimension");
  Model m;
  m.system = SpinSystem{kernel, N, std::move(table), std::nullopt};
  return m;
}

PerturbationTable product_table(const KernelSpec& kernel, const ProductForm& pf) {
  const OffsetLaw& pb = pf.birth_law ? *pf.birth_law : kernel.law();
  const OffsetLaw& pd = pf.death_law ? *pf.death_law : kernel.law();
  PerturbationTable t = lv_two_kernel_table(kernel, pb, pd, pf.theta0, pf.theta1);
  if (pf.bias > 0.0) {
    const OffsetLaw& bl = *pf.bias_law;
    for (std::size_t k = 0; k < bl.size(); ++k) t.add({bl.offsets()[k]}, pf.bias * bl.probs()[k], 0.0);
    t.origin.reset();
  }
  return t;
}

LocalRateEvaluator::LocalRateEvaluator(const SpinSystem& system)
    : speed_(system.speed), lattice_(system.kernel.dim()) {
  std::vector<Offset> u(system.kernel.support().begin(), system.kernel.support().end());
  const auto t = system.table.offsets();
  u.insert(u.end(), t.begin(), t.end());
  dep_ = canonical_set(std::move(u));
  for (const auto& o : dep_) dep_delta_.push_back(lattice_.delta(o));
  use_mask_ = dep_.size() <= 64;
  auto index_of = [&](const Offset& o) {
    return static_cast<std::uint32_t>(std::lower_bound(dep_.begin(), dep_.end(), o) - dep_.begin());
  };
  for (std::size_t k = 0; k < system.kernel.support().size(); ++k) {
    kernel_dep_.push_back(index_of(system.kernel.support()[k]));
    kernel_prob_.push_back(system.kernel.probs()[k]);
  }
  scale0_ = scale1_ = speed_;
  for (const auto& [set, r] : system.table.entries()) {
    std::uint64_t m = 0;
    std::vector<std::uint32_t> ids;
    for (const auto& a : set) {
      const auto i = index_of(a);
      ids.push_back(i);
      if (use_mask_) m |= std::uint64_t{1} << i;
    }
    entry_mask_.push_back(m);
    entry_ids_.push_back(std::move(ids));
    beta_.push_back(r.beta);
    delta_.push_back(r.delta);
    if (r.beta != 0.0) scale0_ += std::abs(r.beta);
    if (r.delta != 0.0) scale1_ += std::abs(r.delta);
  }
}

std::uint64_t LocalRateEvaluator::mask(const Configuration& config, SiteKey x) const {
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < dep_delta_.size(); ++i)
    if (config.contains(Lattice::shift(x, dep_delta_[i]))) m |= std::uint64_t{1} << i;
  return m;
}

double LocalRateEvaluator::finish(double rate, double scale, SiteKey x, const Configuration& config) const {
  if (rate >= 0.0) return rate;
  if (rate < -1e-12 * scale) {
    std::ostringstream os;
    os.precision(17);
    os << "rate-positivity violation at site " << to_string(lattice_.decode(x), lattice_.dim()) << ": c = " << rate
       << " (configuration fingerprint " << std::hex << config.fingerprint() << ")";
    throw RatePositivityError(os.str());
  }
  return 0.0;
}

double LocalRateEvaluator::rate(const Configuration& config, SiteKey x) const {
  const bool occ = config.contains(x);
  const std::vector<double>& coef = occ ? delta_ : beta_;
  double voter = 0.0;
  double rate = 0.0;
  if (use_mask_) {
    const std::uint64_t m = mask(config, x);
    for (std::size_t k = 0; k < kernel_dep_.size(); ++k)
      if (((m >> kernel_dep_[k]) & 1U) != static_cast<std::uint64_t>(occ)) voter += kernel_prob_[k];
    rate = speed_ * voter;
    for (std::size_t e = 0; e < coef.size(); ++e) {
      if (coef[e] == 0.0) continue;
      if ((m & entry_mask_[e]) == entry_mask_[e]) rate += coef[e];
    }
  } else {
    std::vector<char> on(dep_delta_.size());
    for (std::size_t i = 0; i < dep_delta_.size(); ++i)
      on[i] = static_cast<char>(config.contains(Lattice::shift(x, dep_delta_[i])));
    for (std::size_t k = 0; k < kernel_dep_.size(); ++k)
      if (static_cast<bool>(on[kernel_dep_[k]]) != occ) voter += kernel_prob_[k];
    rate = speed_ * voter;
    for (std::size_t e = 0; e < coef.size(); ++e) {
      if (coef[e] == 0.0) continue;
      bool all = true;
      for (auto i : entry_ids_[e])
        if (!on[i]) {
          all = false;
          break;
        }
      if (all) rate += coef[e];
    }
  }
  return finish(rate, occ ? scale1_ : scale0_, x, config);
}

LocalRateEvaluator::Parts LocalRateEvaluator::parts(const Configuration& config, SiteKey x) const {
  Parts p;
  p.occupied = config.contains(x);
  std::vector<char> on(dep_delta_.size());
  for (std::size_t i = 0; i < dep_delta_.size(); ++i)
    on[i] = static_cast<char>(config.contains(Lattice::shift(x, dep_delta_[i])));
  for (std::size_t k = 0; k < kernel_dep_.size(); ++k)
    if (static_cast<bool>(on[kernel_dep_[k]]) != p.occupied) p.disagree += kernel_prob_[k];
  for (std::size_t e = 0; e < beta_.size(); ++e) {
    bool all = true;
    for (auto i : entry_ids_[e])
      if (!on[i]) {
        all = false;
        break;
      }
    if (!all) continue;
    p.beta += beta_[e];
    p.delta += delta_[e];
  }
  return p;
}

}  // namespace svlv
