#include "svlv/coalescing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "svlv/simulator.hpp"

namespace svlv {

namespace {

constexpr std::size_t kMapThreshold = 32;

enum SeedTag : std::uint64_t { kTauTag = 11, kGammaTag = 12, kBetaDeltaTag = 13, kGammaNTag = 14, kVoterDual = 15,
                               kWalkDual = 16 };

}  // namespace

CoalescingSystem::CoalescingSystem(const OffsetLaw& law, double walk_rate, std::span<const Site> starts, Rng& rng)
    : law_(&law), rate_(walk_rate), rng_(&rng), lattice_(law.dim()) {
  if (!(walk_rate > 0.0)) throw std::invalid_argument("walk rate must be positive");
  for (const auto& o : law.offsets()) delta_.push_back(lattice_.delta(o));
  use_map_ = starts.size() > kMapThreshold;
  parent_.resize(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    parent_[i] = static_cast<std::uint32_t>(i);
    const SiteKey k = lattice_.encode(starts[i]);
    std::optional<std::size_t> hit;
    if (use_map_) {
      auto it = at_.find(k);
      if (it != at_.end()) hit = it->second;
    } else {
      for (std::size_t s = 0; s < roots_.size(); ++s)
        if (root_pos_[s] == k) hit = s;
    }
    if (hit) {
      parent_[i] = roots_[*hit];
      merges_.push_back({0.0, static_cast<std::uint32_t>(i), roots_[*hit]});
      continue;
    }
    if (use_map_) at_.emplace(k, static_cast<std::uint32_t>(roots_.size()));
    roots_.push_back(static_cast<std::uint32_t>(i));
    root_pos_.push_back(k);
  }
  if (roots_.size() <= 1) tau_ = 0.0;
}

std::uint32_t CoalescingSystem::find(std::size_t i) const {
  std::uint32_t r = static_cast<std::uint32_t>(i);
  while (parent_[r] != r) r = parent_[r];
  auto j = static_cast<std::uint32_t>(i);
  while (parent_[j] != r) {
    const auto next = parent_[j];
    parent_[j] = r;
    j = next;
  }
  return r;
}

Site CoalescingSystem::position(std::size_t label) const {
  const std::uint32_t r = find(label);
  for (std::size_t s = 0; s < roots_.size(); ++s)
    if (roots_[s] == r) return lattice_.decode(root_pos_[s]);
  throw std::logic_error("label without active root");
}

double CoalescingSystem::meeting_time(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  std::vector<std::uint32_t> p(parent_.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = static_cast<std::uint32_t>(k);
  auto f = [&](std::uint32_t x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
  };
  for (const auto& m : merges_) {
    p[f(m.a)] = f(m.b);
    if (f(static_cast<std::uint32_t>(i)) == f(static_cast<std::uint32_t>(j))) return m.time;
  }
  return kNever;
}

void CoalescingSystem::merge_into(std::uint32_t mover, std::uint32_t target, std::size_t mover_slot) {
  parent_[mover] = target;
  merges_.push_back({t_, mover, target});
  const std::size_t last = roots_.size() - 1;
  if (mover_slot != last) {
    roots_[mover_slot] = roots_[last];
    root_pos_[mover_slot] = root_pos_[last];
    if (use_map_) at_[root_pos_[mover_slot]] = static_cast<std::uint32_t>(mover_slot);
  }
  roots_.pop_back();
  root_pos_.pop_back();
  if (roots_.size() == 1 && !tau_) tau_ = t_;
}

void CoalescingSystem::advance(double until, bool stop_when_single) {
  if (until < t_) throw std::invalid_argument("advance: time goes backwards");
  for (;;) {
    const std::size_t k = roots_.size();
    if (k == 0 || (k == 1 && stop_when_single)) {
      t_ = until;
      return;
    }
    const double dt = rng_->exponential(static_cast<double>(k) * rate_);
    if (t_ + dt > until) {
      t_ = until;
      return;
    }
    t_ += dt;
    ++jumps_;
    const std::size_t s = k == 1 ? 0 : static_cast<std::size_t>(rng_->index(k));
    const SiteKey from = root_pos_[s];
    const SiteKey to = Lattice::shift(from, delta_[law_->sample_index(*rng_)]);
    root_pos_[s] = to;
    if (use_map_) {
      at_.erase(from);
      auto it = at_.find(to);
      if (it != at_.end()) {
        merge_into(roots_[s], roots_[it->second], s);
      } else {
        at_.emplace(to, static_cast<std::uint32_t>(s));
      }
    } else {
      for (std::size_t o = 0; o < k; ++o) {
        if (o != s && root_pos_[o] == to) {
          merge_into(roots_[s], roots_[o], s);
          break;
        }
      }
    }
  }
}

TauEstimate estimate_tau_leq(std::span<const Site> A, const OffsetLaw& law, double walk_rate, double t,
                             std::uint64_t reps, std::uint64_t seed) {
  TauEstimate est{1.0, 0.0, reps, t};
  std::vector<Site> uniq(A.begin(), A.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() <= 1) return est;
  Proportion pr;
  for (std::uint64_t r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, {kTauTag, r}));
    CoalescingSystem cs(law, walk_rate, uniq, rng);
    cs.advance(t, true);
    pr.trials++;
    if (cs.coalescence_time()) pr.successes++;
  }
  est.estimate = pr.p();
  est.se = pr.se();
  return est;
}

namespace {

struct LadderAccumulator {
  std::vector<double> horizons;
  std::vector<Proportion> props;
  RunningStats combined;
  double q;  // 4^{-a}

  LadderAccumulator(double T, int dim) : horizons{T, 2 * T, 4 * T}, props(3) {
    const double a = (dim - 2) / 2.0;
    q = a > 0.0 ? std::pow(4.0, -a) : 0.0;
  }
  void add(const bool ev[3]) {
    for (int i = 0; i < 3; ++i) {
      props[i].trials++;
      if (ev[i]) props[i].successes++;
    }
    combined.add(((ev[2] ? 1.0 : 0.0) - q * (ev[0] ? 1.0 : 0.0)) / (1.0 - q));
  }
  LadderEstimate finish() const {
    LadderEstimate le;
    le.horizons = horizons;
    for (int i = 0; i < 3; ++i) le.at.push_back({props[i].p(), props[i].se(), props[i].trials, horizons[i]});
    le.extrapolated = {combined.mean(), combined.se(), combined.count(), kNever};
    return le;
  }
};

}  // namespace

LadderEstimate estimate_gamma_e(const KernelSpec& kernel, double T, std::uint64_t reps, std::uint64_t seed) {
  LadderAccumulator acc(T, kernel.dim());
  const Site origin{};
  for (std::uint64_t r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, {kGammaTag, r}));
    const Site e = kernel.sample(rng);
    const Site starts[2] = {origin, e};
    CoalescingSystem cs(kernel.law(), 1.0, starts, rng);
    cs.advance(4 * T, true);
    const double tau = cs.coalescence_time().value_or(kNever);
    const bool ev[3] = {tau > T, tau > 2 * T, tau > 4 * T};
    acc.add(ev);
  }
  return acc.finish();
}

BetaDeltaEstimate estimate_beta_delta_coal(const KernelSpec& kernel, const OffsetLaw& second, double T,
                                           std::uint64_t reps, std::uint64_t seed) {
  LadderAccumulator b(T, kernel.dim()), d(T, kernel.dim());
  BetaDeltaEstimate out;
  const Site origin{};
  for (std::uint64_t r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, {kBetaDeltaTag, r}));
    const Site e = kernel.sample(rng);
    const Site e2 = second.sample(rng);
    const Site starts[3] = {origin, e, e2};
    CoalescingSystem cs(kernel.law(), 1.0, starts, rng);
    cs.advance(4 * T, true);
    const double t0 = std::min(cs.meeting_time(0, 1), cs.meeting_time(0, 2));
    const double t12 = cs.meeting_time(1, 2);
    bool eb[3], ed[3];
    for (int i = 0; i < 3; ++i) {
      const double h = b.horizons[i];
      ed[i] = t0 > h;
      eb[i] = ed[i] && t12 <= h;
      if (eb[i] && !ed[i]) ++out.containment_failures;
    }
    b.add(eb);
    d.add(ed);
  }
  out.beta = b.finish();
  out.delta = d.finish();
  return out;
}

TauEstimate estimate_gamma_N(const KernelSpec& kernel, double N, double eps, std::uint64_t reps, std::uint64_t seed) {
  Proportion pr;
  const Site origin{};
  for (std::uint64_t r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, {kGammaNTag, r}));
    const Site e = kernel.sample(rng);
    const Site starts[2] = {origin, e};
    CoalescingSystem cs(kernel.law(), N, starts, rng);
    cs.advance(eps, true);
    pr.trials++;
    if (!cs.coalescence_time()) pr.successes++;
  }
  return {pr.p(), pr.se(), reps, eps};
}

std::vector<OffsetSet> required_sigma_sets(const PerturbationTable& table) {
  std::vector<OffsetSet> out;
  for (const auto& [set, r] : table.entries()) {
    if (r.beta == 0.0 && r.delta == 0.0) continue;
    if (r.beta != 0.0) out.push_back(set);
    OffsetSet with0 = set;
    with0.push_back(Offset{});
    out.push_back(canonical_set(std::move(with0)));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SigmaMap indicator_sigma(const PerturbationTable& table) {
  SigmaMap m;
  for (const auto& s : required_sigma_sets(table)) m[s] = {s.size() <= 1 ? 1.0 : 0.0, 0.0, 0, kNever};
  return m;
}

ThetaEstimate assemble_theta(const PerturbationTable& table, const SigmaMap& sigma) {
  std::map<OffsetSet, double> coef;
  for (const auto& [set, r] : table.entries()) {
    if (r.beta != 0.0) coef[set] += r.beta;
    if (r.beta + r.delta != 0.0) {
      OffsetSet with0 = set;
      with0.push_back(Offset{});
      coef[canonical_set(std::move(with0))] -= r.beta + r.delta;
    }
  }
  std::vector<std::string> gaps;
  ThetaEstimate th;
  double var = 0.0;
  for (const auto& [set, c] : coef) {
    auto it = sigma.find(set);
    if (it == sigma.end()) {
      gaps.push_back(to_string(set, table.dim()));
      continue;
    }
    th.theta += c * it->second.estimate;
    var += c * c * it->second.se * it->second.se;
  }
  if (!gaps.empty()) {
    std::string msg = "missing sigma for";
    for (const auto& g : gaps) msg += " " + g;
    throw MissingSigma(msg);
  }
  th.se = std::sqrt(var);
  return th;
}

DualityReport duality_check(const KernelSpec& kernel, double N, const Configuration& initial, const OffsetSet& A,
                            const Site& x, double t, std::uint64_t reps, std::uint64_t seed) {
  DualityReport rep;
  const Model voter = voter_model(kernel, N);
  RunOptions opt;
  opt.horizon = t;
  for (std::uint64_t r = 0; r < reps; ++r) {
    auto engine = make_engine(voter, initial, derive_seed(seed, {kVoterDual, r}));
    run(*engine, opt);
    rep.voter.trials++;
    if (chi(engine->configuration(), A, x)) rep.voter.successes++;
  }
  std::vector<Site> starts;
  for (const auto& a : A) starts.push_back(x + a);
  for (std::uint64_t r = 0; r < reps; ++r) {
    rep.walks.trials++;
    if (starts.empty()) {
      rep.walks.successes++;
      continue;
    }
    Rng rng(derive_seed(seed, {kWalkDual, r}));
    CoalescingSystem cs(kernel.law(), N, starts, rng);
    cs.advance(t, false);
    bool all = true;
    for (std::size_t i = 0; i < starts.size() && all; ++i) all = initial.contains(cs.position(i));
    if (all) rep.walks.successes++;
  }
  rep.test = two_proportion_z(rep.voter, rep.walks);
  return rep;
}

}  // namespace svlv
