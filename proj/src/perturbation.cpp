#include "svlv/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace svlv {

OffsetSet canonical_set(std::vector<Offset> offsets) {
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  return offsets;
}

std::string to_string(const OffsetSet& set, int dim) {
  std::string s = "{";
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i) s += ",";
    s += to_string(set[i], dim);
  }
  return s + "}";
}

void PerturbationTable::add(OffsetSet set, double beta, double delta) {
  if (!std::isfinite(beta) || !std::isfinite(delta)) throw TableError("non-finite table entry");
  set = canonical_set(std::move(set));
  for (const auto& o : set)
    for (int k = dim_; k < kMaxDim; ++k)
      if (o[k] != 0) throw TableError("table offset has coordinates beyond the dimension");
  auto zero = std::find_if(set.begin(), set.end(), [](const Offset& o) { return is_origin(o); });
  if (zero != set.end()) {
    // delta'(A) = delta(A) + delta(A u {0}); beta is irrelevant when x is required occupied.
    set.erase(zero);
    beta = 0.0;
  }
  if (set.empty() && beta != 0.0) throw TableError("beta(empty set) must be 0");
  auto& r = entries_[set];
  r.beta += beta;
  r.delta += delta;
}

PerturbationRates PerturbationTable::at(const OffsetSet& set) const {
  auto it = entries_.find(canonical_set(set));
  return it == entries_.end() ? PerturbationRates{} : it->second;
}

std::vector<Offset> PerturbationTable::offsets() const {
  std::vector<Offset> all;
  for (const auto& [set, r] : entries_) all.insert(all.end(), set.begin(), set.end());
  return canonical_set(std::move(all));
}

std::size_t PerturbationTable::max_set_size() const {
  std::size_t m = 0;
  for (const auto& [set, r] : entries_) m = std::max(m, set.size());
  return m;
}

void PerturbationTable::prune() {
  std::erase_if(entries_, [](const auto& e) { return e.second.beta == 0.0 && e.second.delta == 0.0; });
}

PerturbationTable lv_table(const KernelSpec& kernel, double theta0, double theta1) {
  auto t = lv_two_kernel_table(kernel, kernel.law(), kernel.law(), theta0, theta1);
  t.origin->kind = "lv";
  return t;
}

PerturbationTable lv_two_kernel_table(const KernelSpec& p, const OffsetLaw& p_b, const OffsetLaw& p_d, double theta0,
                                      double theta1) {
  const int d = p.dim();
  if (p_b.dim() != d || p_d.dim() != d) throw TableError("kernel dimension mismatch");
  PerturbationTable t(d);
  t.origin = TableOrigin{"lv_two_kernel", theta0, theta1};
  if (theta0 == 0.0 && theta1 == 0.0) return t;

  // Union of the three supports; every key is drawn from it.
  std::vector<Offset> u(p.support().begin(), p.support().end());
  u.insert(u.end(), p_b.offsets().begin(), p_b.offsets().end());
  u.insert(u.end(), p_d.offsets().begin(), p_d.offsets().end());
  u = canonical_set(std::move(u));
  std::vector<double> pa(u.size()), pb(u.size()), pd(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    pa[i] = p.prob(u[i]);
    pb[i] = p_b.prob(u[i]);
    pd[i] = p_d.prob(u[i]);
  }
  if (theta1 != 0.0) t.add({}, 0.0, theta1);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double b = theta0 * pa[i] * pb[i];
    const double dl = theta1 * (pa[i] * pd[i] - pa[i] - pd[i]);
    if (b != 0.0 || dl != 0.0) t.add({u[i]}, b, dl);
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (pa[i] == 0.0 && pb[i] == 0.0 && pd[i] == 0.0) continue;
    for (std::size_t j = i + 1; j < u.size(); ++j) {
      const double b = theta0 * (pa[i] * pb[j] + pa[j] * pb[i]);
      const double dl = theta1 * (pa[i] * pd[j] + pa[j] * pd[i]);
      if (b != 0.0 || dl != 0.0) t.add({u[i], u[j]}, b, dl);
    }
  }
  return t;
}

bool chi(const Configuration& config, const OffsetSet& set, const Site& x) {
  for (const auto& a : set)
    if (!config.contains(x + a)) return false;
  return true;
}

namespace {

std::string fingerprint_hex(const Configuration& config) {
  std::ostringstream os;
  os << std::hex << config.fingerprint();
  return os.str();
}

}  // namespace

double flip_rate(const Configuration& config, const Site& site, const KernelSpec& kernel,
                 const PerturbationTable& table, double speed) {
  const bool occ = config.contains(site);
  double voter = 0.0;
  const auto sup = kernel.support();
  const auto probs = kernel.probs();
  for (std::size_t k = 0; k < sup.size(); ++k)
    if (config.contains(site + sup[k]) != occ) voter += probs[k];
  double rate = speed * voter;
  double scale = speed;
  for (const auto& [set, r] : table.entries()) {
    const double c = occ ? r.delta : r.beta;
    if (c == 0.0) continue;
    scale += std::abs(c);
    if (chi(config, set, site)) rate += c;
  }
  if (rate < 0.0) {
    if (rate < -1e-12 * scale) {
      std::ostringstream os;
      os.precision(17);
      os << "rate-positivity violation at site " << to_string(site, config.dim()) << ": c = " << rate
         << " (configuration fingerprint " << fingerprint_hex(config) << ")";
      throw RatePositivityError(os.str());
    }
    rate = 0.0;
  }
  return rate;
}

namespace {

// Local rate evaluation on the neighborhood U = support(p) u table offsets,
// with occupancy given as a byte vector indexed like U.
struct LocalModel {
  std::vector<Offset> nbhd;
  std::vector<std::pair<std::size_t, double>> kernel_idx;
  std::vector<std::vector<std::size_t>> sets;
  std::vector<PerturbationRates> rates;

  LocalModel(const PerturbationTable& table, const KernelSpec& kernel) {
    std::vector<Offset> u(kernel.support().begin(), kernel.support().end());
    auto t = table.offsets();
    u.insert(u.end(), t.begin(), t.end());
    nbhd = canonical_set(std::move(u));
    auto index_of = [&](const Offset& o) {
      return static_cast<std::size_t>(std::lower_bound(nbhd.begin(), nbhd.end(), o) - nbhd.begin());
    };
    for (std::size_t k = 0; k < kernel.support().size(); ++k)
      kernel_idx.emplace_back(index_of(kernel.support()[k]), kernel.probs()[k]);
    for (const auto& [set, r] : table.entries()) {
      std::vector<std::size_t> ids;
      for (const auto& a : set) ids.push_back(index_of(a));
      sets.push_back(std::move(ids));
      rates.push_back(r);
    }
  }

  double f0(const std::vector<char>& occ) const {
    double f = 0.0;
    for (auto [i, p] : kernel_idx)
      if (!occ[i]) f += p;
    return f;
  }

  // (rate, scale, delta_sum)
  std::tuple<double, double, double> eval(const std::vector<char>& occ, bool center, double speed) const {
    double voter = 0.0;
    for (auto [i, p] : kernel_idx)
      if (static_cast<bool>(occ[i]) != center) voter += p;
    double rate = speed * voter, scale = speed, dsum = 0.0;
    for (std::size_t e = 0; e < sets.size(); ++e) {
      bool all = true;
      for (auto i : sets[e])
        if (!occ[i]) {
          all = false;
          break;
        }
      const double c = center ? rates[e].delta : rates[e].beta;
      scale += std::abs(c);
      if (all) {
        rate += c;
        dsum += rates[e].delta;
      }
    }
    return {rate, scale, dsum};
  }

  std::string describe(const std::vector<char>& occ, bool center, int dim) const {
    std::string s = std::string("xi(0)=") + (center ? "1" : "0") + " occupied=";
    OffsetSet on;
    for (std::size_t i = 0; i < nbhd.size(); ++i)
      if (occ[i]) on.push_back(nbhd[i]);
    return s + to_string(on, dim);
  }
};

}  // namespace

ValidationReport validate_table(const PerturbationTable& table, const KernelSpec& kernel, double N,
                                const ValidationOptions& options) {
  ValidationReport rep;
  bool any_delta = false;
  for (const auto& [set, r] : table.entries()) {
    rep.p1_sum += static_cast<double>(std::max<std::size_t>(set.size(), 1)) * (std::abs(r.beta) + std::abs(r.delta));
    rep.delta_minus_sum += std::max(0.0, -r.delta);
    rep.c_beta += std::max(0.0, r.beta);
    if (set.empty() && r.beta != 0.0) rep.beta_empty_zero = false;
    if (r.delta != 0.0) any_delta = true;
  }
  if (options.user_k_delta) {
    rep.k_delta = *options.user_k_delta;
    rep.k_delta_source = "user";
  } else if (table.origin) {
    rep.k_delta = std::abs(table.origin->theta1);
    rep.k_delta_source = "lv-certificate";
  } else if (!any_delta) {
    rep.k_delta = 0.0;
    rep.k_delta_source = "zero-delta";
  } else {
    rep.k_delta_source = "none";
  }
  if (rep.k_delta) rep.c_bar = rep.c_beta + *rep.k_delta;

  const LocalModel lm(table, kernel);
  const std::size_t n = lm.nbhd.size();
  std::vector<char> occ(n, 0);
  auto check = [&](bool center) {
    ++rep.positivity_checked;
    auto [rate, scale, dsum] = lm.eval(occ, center, N);
    if (rep.positivity_ok && rate < -1e-12 * scale) {
      rep.positivity_ok = false;
      std::ostringstream os;
      os.precision(17);
      os << lm.describe(occ, center, kernel.dim()) << " rate=" << rate;
      rep.positivity_witness = os.str();
    }
    if (center && rep.k_delta && !rep.k_delta_falsified) {
      const double bound = -*rep.k_delta * lm.f0(occ);
      if (dsum < bound - 1e-12 * scale) {
        rep.k_delta_falsified = true;
        std::ostringstream os;
        os.precision(17);
        os << lm.describe(occ, center, kernel.dim()) << " sum delta chi=" << dsum << " < -k_delta f0=" << bound;
        rep.k_delta_witness = os.str();
      }
    }
  };
  if (n + 1 <= options.exhaustive_limit) {
    rep.positivity_method = "exhaustive";
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      for (std::size_t i = 0; i < n; ++i) occ[i] = static_cast<char>((mask >> i) & 1U);
      check(false);
      check(true);
    }
  } else {
    rep.positivity_method = "sampled";
    Rng rng(options.seed);
    for (std::uint64_t s = 0; s < options.samples; ++s) {
      // Random density so sparse and crowded neighborhoods both get coverage.
      const double q = rng.uniform();
      for (std::size_t i = 0; i < n; ++i) occ[i] = static_cast<char>(rng.uniform() < q);
      check((s & 1U) != 0);
    }
  }
  return rep;
}

DominatingKernels dominating_kernels(const PerturbationTable& table, const KernelSpec& kernel, double k_delta) {
  DominatingKernels dk;
  dk.k_delta = k_delta;
  std::map<Offset, double> hat;
  for (const auto& [set, r] : table.entries()) {
    if (r.beta <= 0.0) continue;
    dk.c_beta += r.beta;
    for (const auto& a : set) hat[a] += r.beta / static_cast<double>(set.size());
  }
  dk.c_bar = dk.c_beta + k_delta;
  const int d = kernel.dim();
  auto normalized = [d](const std::map<Offset, double>& w) {
    double s = 0.0;
    for (const auto& [o, v] : w) s += v;
    std::vector<std::pair<Offset, double>> t;
    for (const auto& [o, v] : w) t.emplace_back(o, v / s);
    // Division by the float sum can leave a few ulps of normalization error.
    double s2 = 0.0;
    for (const auto& e : t) s2 += e.second;
    if (std::abs(s2 - 1.0) > 1e-13) t.front().second += 1.0 - s2;
    return OffsetLaw(d, std::move(t));
  };
  if (dk.c_beta > 0.0) dk.p_hat = normalized(hat);
  if (dk.c_bar > 0.0) {
    std::map<Offset, double> bar;
    for (std::size_t k = 0; k < kernel.support().size(); ++k) bar[kernel.support()[k]] += k_delta * kernel.probs()[k];
    for (const auto& [o, v] : hat) bar[o] += v;  // c_beta * p_hat(o)
    std::erase_if(bar, [](const auto& e) { return e.second <= 0.0; });
    dk.p_bar = normalized(bar);
  }
  return dk;
}

}  // namespace svlv
