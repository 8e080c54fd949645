#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "svlv/configuration.hpp"
#include "svlv/kernel.hpp"
#include "svlv/perturbation.hpp"
#include "svlv/rng.hpp"
#include "svlv/stats.hpp"

namespace svlv {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

/// Labeled coalescing random walks. Each class jumps at `walk_rate` with
/// steps drawn from the law; after each jump the jumping class merges with
/// any class on its landing site.
class CoalescingSystem {
 public:
  CoalescingSystem(const OffsetLaw& law, double walk_rate, std::span<const Site> starts, Rng& rng);

  /// Runs until time `until`. With stop_when_single the clock jumps to
  /// `until` as soon as one class remains (positions then stop updating).
  void advance(double until, bool stop_when_single = false);

  double time() const { return t_; }
  std::size_t size() const { return parent_.size(); }
  std::size_t classes() const { return roots_.size(); }
  bool same_class(std::size_t i, std::size_t j) const { return find(i) == find(j); }
  Site position(std::size_t label) const;
  /// Time at which one class remained (0 when it started that way).
  std::optional<double> coalescence_time() const { return tau_; }
  /// First time labels i and j were in one class, kNever if not yet.
  double meeting_time(std::size_t i, std::size_t j) const;
  std::uint64_t jumps() const { return jumps_; }

 private:
  struct Merge {
    double time;
    std::uint32_t a, b;
  };
  std::uint32_t find(std::size_t i) const;
  void merge_into(std::uint32_t mover, std::uint32_t target, std::size_t mover_slot);

  const OffsetLaw* law_;
  std::vector<std::int64_t> delta_;
  double rate_;
  Rng* rng_;
  Lattice lattice_;
  mutable std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> roots_;   // active class representatives
  std::vector<SiteKey> root_pos_;      // position of roots_[i]
  absl::flat_hash_map<SiteKey, std::uint32_t> at_;  // position -> slot in roots_, large systems only
  bool use_map_ = false;
  std::vector<Merge> merges_;
  std::optional<double> tau_;
  double t_ = 0.0;
  std::uint64_t jumps_ = 0;
};

struct TauEstimate {
  double estimate = 0.0;
  double se = 0.0;
  std::uint64_t reps = 0;
  double horizon = 0.0;
};

/// Monte Carlo estimate of P(tau(A) <= t). |A| <= 1 gives exactly 1.
TauEstimate estimate_tau_leq(std::span<const Site> A, const OffsetLaw& law, double walk_rate, double t,
                             std::uint64_t reps, std::uint64_t seed);

/// An event probability on the horizon ladder T, 2T, 4T with common random
/// numbers, plus the extrapolation p(4T) + (p(4T) - p(T)) 4^{-a}/(1 - 4^{-a})
/// with a = (d - 2)/2 computed per replicate.
struct LadderEstimate {
  std::vector<double> horizons;
  std::vector<TauEstimate> at;
  TauEstimate extrapolated;
  /// Bracket [P(event at 4T), P(event at T)] for decreasing events.
  double lower() const { return at.back().estimate; }
  double upper() const { return at.front().estimate; }
};

/// gamma_e: P(tau(0, e) > h), e ~ p, rate 1 walks.
LadderEstimate estimate_gamma_e(const KernelSpec& kernel, double T, std::uint64_t reps, std::uint64_t seed);

struct BetaDeltaEstimate {
  LadderEstimate beta;
  LadderEstimate delta;
  std::uint64_t containment_failures = 0;  // replicates with beta-event but not delta-event
};

/// Three walks from {0, e, e'} with e ~ p, e' ~ second (p itself for the
/// Lotka-Volterra constants, p^b or p^d for the two-kernel constants).
BetaDeltaEstimate estimate_beta_delta_coal(const KernelSpec& kernel, const OffsetLaw& second, double T,
                                           std::uint64_t reps, std::uint64_t seed);

/// gamma_N = sum_e p(e) P(tauhat_N(0, e) > eps) with rate N walks.
TauEstimate estimate_gamma_N(const KernelSpec& kernel, double N, double eps, std::uint64_t reps, std::uint64_t seed);

/// sigma(A) lookup used by assemble_theta.
using SigmaMap = std::map<OffsetSet, TauEstimate>;

/// Every A and A u {0} needed for the table.
std::vector<OffsetSet> required_sigma_sets(const PerturbationTable& table);
/// sigma(A) = 1{|A| <= 1} with zero error.
SigmaMap indicator_sigma(const PerturbationTable& table);

struct ThetaEstimate {
  double theta = 0.0;
  double se = 0.0;
};

class MissingSigma : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// theta = sum_A beta(A) sigma(A) - sum_A (beta(A) + delta(A)) sigma(A u {0}),
/// with errors propagated from independent sigma estimates.
ThetaEstimate assemble_theta(const PerturbationTable& table, const SigmaMap& sigma);

struct DualityReport {
  Proportion voter;
  Proportion walks;
  TestResult test;
};

/// Compares E chi(A, x, xihat_t) for the voter model at speed N with
/// P(Bhat_t^{x+a} in xihat_0 for all a) for rate N coalescing walks.
DualityReport duality_check(const KernelSpec& kernel, double N, const Configuration& initial, const OffsetSet& A,
                            const Site& x, double t, std::uint64_t reps, std::uint64_t seed);

}  // namespace svlv
