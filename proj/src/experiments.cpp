#include "svlv/experiments.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "svlv/observables.hpp"
#include "svlv/stats.hpp"

namespace svlv {

namespace {

double spread(const Configuration& c, double N, double ell) {
  double s = 0.0;
  for (const auto& site : c.sites()) {
    const Point y = rescale(site, c.dim(), ell);
    for (int i = 0; i < c.dim(); ++i) s += y[i] * y[i];
  }
  return s / N;
}

std::vector<const ReplicaOutcome*> usable(std::span<const ReplicaOutcome> reps) {
  std::vector<const ReplicaOutcome*> out;
  for (const auto& r : reps)
    if (!r.budget_exceeded) out.push_back(&r);
  return out;
}

}  // namespace

ReplicaOutcome run_replica(const ReplicaSpec& spec, const Configuration& initial, std::uint64_t seed,
                           std::span<Observer* const> observers) {
  if (!spec.model) throw std::invalid_argument("replica spec without a model");
  ReplicaOutcome out;
  out.seed = seed;
  out.x0 = static_cast<double>(initial.size()) / spec.N;
  out.spread0 = spread(initial, spec.N, spec.ell);
  auto engine = make_engine(*spec.model, initial, seed, spec.engine);
  RunOptions opt{spec.horizon, spec.event_budget, spec.grid};
  try {
    const RunSummary s = run(*engine, opt, observers);
    out.xT = static_cast<double>(s.final_mass) / spec.N;
    for (auto m : s.mass_at) out.mass_at.push_back(static_cast<double>(m) / spec.N);
    out.integrated_mass = s.integrated_mass / spec.N;
    out.events = s.events;
    if (s.integrated_rate) {
      out.qv = *s.integrated_rate / (spec.N * spec.N);
      out.qv_exact = true;
    } else {
      out.qv = static_cast<double>(s.events) / (spec.N * spec.N);
    }
    out.spreadT = spread(engine->configuration(), spec.N, spec.ell);
  } catch (const BudgetExceeded&) {
    out.budget_exceeded = true;
    out.events = spec.event_budget;
  }
  return out;
}

Estimate pooled_drift(std::span<const ReplicaOutcome> reps, std::span<const double> grid) {
  const auto u = usable(reps);
  const std::size_t n = u.size();
  if (n < 2) throw std::invalid_argument("drift estimate needs at least two replicas");
  std::vector<double> total(grid.size(), 0.0);
  double total0 = 0.0;
  for (const auto* r : u) {
    total0 += r->x0;
    for (std::size_t i = 0; i < grid.size(); ++i) total[i] += r->mass_at[i];
  }
  auto slope = [&](std::size_t skip) {
    double m0 = total0;
    std::vector<double> y(grid.size());
    if (skip < n) m0 -= u[skip]->x0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double m = total[i];
      if (skip < n) m -= u[skip]->mass_at[i];
      // Extinct pooled mass has no logarithm; the slope is then unbounded below.
      y[i] = m > 0.0 ? std::log(m / m0) : -std::numeric_limits<double>::infinity();
    }
    return slope_through_origin(grid, y);
  };
  const auto [est, se] = jackknife(n, slope);
  return {est, se, n};
}

Estimate pooled_branching(std::span<const ReplicaOutcome> reps) {
  const auto u = usable(reps);
  const std::size_t n = u.size();
  if (n < 2) throw std::invalid_argument("branching estimate needs at least two replicas");
  double q = 0.0, m = 0.0;
  for (const auto* r : u) {
    q += r->qv;
    m += r->integrated_mass;
  }
  auto ratio = [&](std::size_t skip) {
    if (skip < n) return (q - u[skip]->qv) / (m - u[skip]->integrated_mass);
    return q / m;
  };
  const auto [est, se] = jackknife(n, ratio);
  return {est, se, n};
}

Estimate pooled_diffusivity(std::span<const ReplicaOutcome> reps, int dim, double horizon) {
  const auto u = usable(reps);
  const std::size_t n = u.size();
  if (n < 2) throw std::invalid_argument("diffusivity estimate needs at least two replicas");
  double s0 = 0.0, m0 = 0.0, sT = 0.0, mT = 0.0;
  for (const auto* r : u) {
    s0 += r->spread0;
    m0 += r->x0;
    sT += r->spreadT;
    mT += r->xT;
  }
  auto est = [&](std::size_t skip) {
    double a = s0, b = m0, c = sT, d = mT;
    if (skip < n) {
      a -= u[skip]->spread0;
      b -= u[skip]->x0;
      c -= u[skip]->spreadT;
      d -= u[skip]->xT;
    }
    return (c / d - a / b) / (dim * horizon);
  };
  const auto [e, se] = jackknife(n, est);
  return {e, se, n};
}

Estimate mean_terminal_mass(std::span<const ReplicaOutcome> reps) {
  RunningStats s;
  for (const auto* r : usable(reps)) s.add(r->xT);
  return {s.mean(), s.se(), s.count()};
}

Verdict ladder_verdict(std::span<const Estimate> ladder, double target, double slack, double level, double final_se,
                       std::size_t min_replicas) {
  Verdict v;
  if (ladder.empty()) throw std::invalid_argument("empty ladder");
  for (const auto& e : ladder)
    if (e.replicas < min_replicas) {
      v.label = "insufficient replicas";
      return v;
    }
  std::vector<double> est, se;
  for (const auto& e : ladder) {
    est.push_back(e.value);
    se.push_back(e.se);
  }
  const TrendVerdict t = trend_toward(est, se, target, slack, level);
  v.monotone = t.monotone;
  v.improved = t.improved;
  const auto& last = ladder.back();
  v.final_z = last.se > 0.0 ? (last.value - target) / last.se : (last.value == target ? 0.0 : INFINITY);
  v.final_within = std::isfinite(last.value) && std::abs(v.final_z) <= final_se;
  if (v.monotone && v.final_within)
    v.label = "pass";
  else if (v.monotone && v.improved)
    v.label = "trend";
  else
    v.label = "fail";
  return v;
}

std::vector<double> uniform_grid(double T, std::size_t n) {
  std::vector<double> g;
  for (std::size_t i = 1; i <= n; ++i) g.push_back(T * static_cast<double>(i) / static_cast<double>(n));
  return g;
}

}  // namespace svlv
