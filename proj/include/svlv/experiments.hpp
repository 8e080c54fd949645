#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svlv/configuration.hpp"
#include "svlv/simulator.hpp"
#include "svlv/spin_system.hpp"

namespace svlv {

/// Per-replica quantities in rescaled units (mass 1/N per particle,
/// positions divided by ell).
struct ReplicaOutcome {
  std::uint64_t seed = 0;
  double x0 = 0.0;                 // X_0(1)
  double xT = 0.0;                 // X_T(1)
  std::vector<double> mass_at;     // X_t(1) at grid times
  double integrated_mass = 0.0;    // int_0^T X_s(1) ds
  double qv = 0.0;                 // <M(1)>_T, or its unbiased flip-count proxy
  bool qv_exact = false;           // true when <M(1)>_T came from tracked total rates
  double spread0 = 0.0;            // X_0(|y|^2)
  double spreadT = 0.0;            // X_T(|y|^2)
  std::uint64_t events = 0;
  bool budget_exceeded = false;
};

struct ReplicaSpec {
  const Model* model = nullptr;
  double N = 1.0;
  double ell = 1.0;
  double horizon = 1.0;
  std::vector<double> grid;
  EngineKind engine = EngineKind::Auto;
  std::uint64_t event_budget = 50'000'000;
};

/// One replica from `initial`. Budget overruns are flagged, not thrown.
ReplicaOutcome run_replica(const ReplicaSpec& spec, const Configuration& initial, std::uint64_t seed,
                           std::span<Observer* const> observers = {});

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t replicas = 0;
};

/// Least squares slope through the origin of log(mean X_t(1) / mean X_0(1))
/// on t over the grid; jackknife standard error over replicas. Replicas
/// with a budget overrun are excluded.
Estimate pooled_drift(std::span<const ReplicaOutcome> reps, std::span<const double> grid);
/// sum <M(1)>_T / sum int X_s(1) ds.
Estimate pooled_branching(std::span<const ReplicaOutcome> reps);
/// (sum X_T(|y|^2) / sum X_T(1) - sum X_0(|y|^2) / sum X_0(1)) / (d T).
Estimate pooled_diffusivity(std::span<const ReplicaOutcome> reps, int dim, double horizon);
/// Mean of X_T(1).
Estimate mean_terminal_mass(std::span<const ReplicaOutcome> reps);

/// Verdict of a ladder of estimates against a target.
struct Verdict {
  std::string label;  // "pass", "trend", "fail" or "insufficient replicas"
  bool monotone = false;
  bool improved = false;
  bool final_within = false;
  double final_z = 0.0;
};

/// pass: distances to target nonincreasing within `slack` combined s.e.
/// and the final estimate within `final_se` s.e. of the target. trend:
/// monotone and significantly improved at one-sided `level` but the final
/// estimate is still off. Ladders pooled over fewer than min_replicas per
/// cell are not gated.
Verdict ladder_verdict(std::span<const Estimate> ladder, double target, double slack = 1.0, double level = 0.05,
                       double final_se = 3.0, std::size_t min_replicas = 100);

/// Grid of n equally spaced times in (0, T].
std::vector<double> uniform_grid(double T, std::size_t n);

}  // namespace svlv
