#include "svlv/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace svlv {

void Fenwick::resize(std::size_t n) {
  n_ = n;
  tree_.assign(n + 1, 0.0);
}

void Fenwick::add(std::size_t i, double v) {
  for (std::size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += v;
}

void Fenwick::rebuild(std::span<const double> values) {
  std::fill(tree_.begin(), tree_.end(), 0.0);
  for (std::size_t i = 0; i < values.size() && i < n_; ++i) tree_[i + 1] = values[i];
  for (std::size_t i = 1; i <= n_; ++i) {
    const std::size_t parent = i + (i & (~i + 1));
    if (parent <= n_) tree_[parent] += tree_[i];
  }
}

double Fenwick::total() const {
  double s = 0.0;
  for (std::size_t j = n_; j > 0; j -= j & (~j + 1)) s += tree_[j];
  return s;
}

std::size_t Fenwick::find(double target) const {
  std::size_t pos = 0;
  std::size_t step = 1;
  while (step * 2 <= n_) step *= 2;
  for (; step > 0; step >>= 1) {
    if (pos + step <= n_ && tree_[pos + step] <= target) {
      pos += step;
      target -= tree_[pos];
    }
  }
  return pos;
}

namespace {

std::int64_t max_extent(std::span<const Offset> offs, int dim) {
  std::int64_t m = 0;
  for (const auto& o : offs)
    for (int i = 0; i < dim; ++i) m = std::max<std::int64_t>(m, std::abs(o[i]));
  return m;
}

}  // namespace

EventEngine::EventEngine(SpinSystem system, Configuration initial, std::uint64_t seed, EventEngineOptions options)
    : system_(std::move(system)),
      eval_(system_),
      config_(std::move(initial)),
      rng_(seed),
      options_(options) {
  if (config_.dim() != system_.kernel.dim()) throw std::invalid_argument("configuration dimension differs from kernel");
  const int d = config_.dim();
  safe_limit_ = config_.lattice().coordinate_limit() - 2 * max_extent(eval_.dependence_offsets(), d) - 1;
  tree_.resize(1024);
  std::vector<SiteKey> keys(config_.keys().begin(), config_.keys().end());
  std::sort(keys.begin(), keys.end());
  for (auto k : keys) check_range(k);
  for (auto k : keys) {
    update_site(k);
    for (auto dd : eval_.dependence_deltas()) update_site(Lattice::shift(k, -dd));
  }
  rebuild_tree();
}

bool EventEngine::in_domain(SiteKey x) const {
  return !system_.domain || system_.domain->contains(config_.lattice().decode(x), config_.dim());
}

void EventEngine::check_range(SiteKey x) const {
  if (!config_.lattice().within(config_.lattice().decode(x), safe_limit_))
    throw LatticeRangeError("configuration reached the lattice coordinate limit");
}

void EventEngine::update_site(SiteKey x) { set_rate(x, in_domain(x) ? eval_.rate(config_, x) : 0.0); }

void EventEngine::set_rate(SiteKey x, double r) {
  auto it = slot_of_.find(x);
  if (r > 0.0) {
    if (it != slot_of_.end()) {
      const std::uint32_t s = it->second;
      const double old = slot_rate_[s];
      if (old == r) return;
      tree_.add(s, r - old);
      total_ += r - old;
      slot_rate_[s] = r;
      return;
    }
    std::uint32_t s;
    if (!free_.empty()) {
      s = free_.back();
      free_.pop_back();
      slot_key_[s] = x;
      slot_rate_[s] = r;
    } else {
      s = static_cast<std::uint32_t>(slot_key_.size());
      slot_key_.push_back(x);
      slot_rate_.push_back(r);
      if (slot_key_.size() > tree_.size()) {
        tree_.resize(2 * tree_.size());
        tree_.rebuild(slot_rate_);
        slot_of_.emplace(x, s);
        total_ += r;
        return;
      }
    }
    slot_of_.emplace(x, s);
    tree_.add(s, r);
    total_ += r;
  } else if (it != slot_of_.end()) {
    const std::uint32_t s = it->second;
    tree_.add(s, -slot_rate_[s]);
    total_ -= slot_rate_[s];
    slot_rate_[s] = 0.0;
    free_.push_back(s);
    slot_of_.erase(it);
  }
}

void EventEngine::rebuild_tree() {
  tree_.rebuild(slot_rate_);
  total_ = 0.0;
  for (double r : slot_rate_) total_ += r;
  since_refresh_ = 0;
}

void EventEngine::refresh() {
  for (const auto& [k, s] : slot_of_) slot_rate_[s] = in_domain(k) ? eval_.rate(config_, k) : 0.0;
  rebuild_tree();
}

double EventEngine::cached_rate(SiteKey x) const {
  auto it = slot_of_.find(x);
  return it == slot_of_.end() ? 0.0 : slot_rate_[it->second];
}

double EventEngine::recomputed_total() const {
  double s = 0.0;
  for (const auto& [k, slot] : slot_of_) s += slot_rate_[slot];
  return s;
}

std::vector<std::pair<SiteKey, double>> EventEngine::active_sites() const {
  std::vector<std::pair<SiteKey, double>> out;
  out.reserve(slot_of_.size());
  for (const auto& [k, s] : slot_of_) out.emplace_back(k, slot_rate_[s]);
  std::sort(out.begin(), out.end());
  return out;
}

SiteKey EventEngine::pick_tree(double target) const {
  const std::size_t s = tree_.find(target);
  if (s < slot_key_.size() && slot_rate_[s] > 0.0) return slot_key_[s];
  // Rounding put the target on a boundary; fall back to a linear scan.
  double cum = 0.0;
  std::size_t last = slot_key_.size();
  for (std::size_t i = 0; i < slot_key_.size(); ++i) {
    if (slot_rate_[i] <= 0.0) continue;
    last = i;
    cum += slot_rate_[i];
    if (target < cum) return slot_key_[i];
  }
  if (last == slot_key_.size()) throw std::logic_error("sample_site on an empty active set");
  return slot_key_[last];
}

SiteKey EventEngine::sample_site(double u) const { return pick_tree(u * total_); }

std::optional<Event> EventEngine::next_event(double t_max) {
  if (slot_of_.empty()) {
    total_ = 0.0;
    absorbed_ = true;
    return std::nullopt;
  }
  absorbed_ = false;
  if (options_.mode == SelectionMode::Canonical) {
    const auto sites = active_sites();
    double total = 0.0;
    for (const auto& [k, r] : sites) total += r;
    const double dt = rng_.exponential(total);
    if (t_ + dt > t_max) {
      t_ = t_max;
      return std::nullopt;
    }
    t_ += dt;
    const double target = rng_.uniform() * total;
    double cum = 0.0;
    SiteKey chosen = sites.back().first;
    for (const auto& [k, r] : sites) {
      cum += r;
      if (target < cum) {
        chosen = k;
        break;
      }
    }
    return Event{t_, chosen, !config_.contains(chosen)};
  }
  const double dt = rng_.exponential(total_);
  if (t_ + dt > t_max) {
    t_ = t_max;
    return std::nullopt;
  }
  t_ += dt;
  const SiteKey x = pick_tree(rng_.uniform() * total_);
  return Event{t_, x, !config_.contains(x)};
}

void EventEngine::commit(const Event& e) {
  const bool now = config_.flip(e.site);
  if (now != e.new_value) throw std::logic_error("event does not match the configuration");
  if (now) check_range(e.site);
  t_ = e.time;
  ++events_;
  update_site(e.site);
  for (auto dd : eval_.dependence_deltas()) update_site(Lattice::shift(e.site, -dd));
  if (++since_refresh_ >= options_.refresh_interval) rebuild_tree();
}

ThinningEngine::ThinningEngine(const KernelSpec& kernel, ProductForm rates, Configuration initial, std::uint64_t seed,
                               std::optional<Box> domain)
    : kernel_(kernel), rates_(std::move(rates)), config_(std::move(initial)), rng_(seed), domain_(domain) {
  const double v = rates_.speed;
  if (!(v > 0.0)) throw std::invalid_argument("thinning engine needs a positive voter speed");
  if (rates_.theta0 < -v || rates_.theta1 < -v)
    throw std::invalid_argument("thinning engine needs theta >= -speed for negative competition parameters");
  if (rates_.bias < 0.0) throw std::invalid_argument("negative bias");
  if (rates_.bias > 0.0 && !rates_.bias_law) throw std::invalid_argument("bias kernel missing");
  const Lattice& lat = config_.lattice();
  auto make = [&](const OffsetLaw& law) {
    Law l;
    l.law = &law;
    for (const auto& o : law.offsets()) l.delta.push_back(lat.delta(o));
    return l;
  };
  disp_ = make(kernel_.law());
  birth_ = make(rates_.birth_law ? *rates_.birth_law : kernel_.law());
  death_ = make(rates_.death_law ? *rates_.death_law : kernel_.law());
  std::int64_t ext = max_extent(kernel_.support(), lat.dim());
  if (rates_.birth_law) ext = std::max(ext, max_extent(rates_.birth_law->offsets(), lat.dim()));
  if (rates_.death_law) ext = std::max(ext, max_extent(rates_.death_law->offsets(), lat.dim()));
  if (rates_.bias > 0.0) {
    bias_ = make(*rates_.bias_law);
    ext = std::max(ext, max_extent(rates_.bias_law->offsets(), lat.dim()));
  }
  safe_limit_ = lat.coordinate_limit() - 2 * ext - 1;
  for (auto k : config_.keys())
    if (!lat.within(lat.decode(k), safe_limit_)) throw LatticeRangeError("initial site beyond the lattice limit");
  lambda_ = 2.0 * v + std::max(0.0, rates_.theta0) + std::max(0.0, rates_.theta1) + rates_.bias;
}

bool ThinningEngine::accept_site(SiteKey x) const {
  return !domain_ || domain_->contains(config_.lattice().decode(x), config_.dim());
}

std::optional<Event> ThinningEngine::next_event(double t_max) {
  const double v = rates_.speed;
  const double th0p = std::max(0.0, rates_.theta0);
  const double th1p = std::max(0.0, rates_.theta1);
  for (;;) {
    const std::size_t n = config_.size();
    if (n == 0) {
      absorbed_ = true;
      return std::nullopt;
    }
    const double dt = rng_.exponential(static_cast<double>(n) * lambda_);
    if (t_ + dt > t_max) {
      t_ = t_max;
      return std::nullopt;
    }
    t_ += dt;
    ++proposals_;
    const SiteKey y = config_.key_at(rng_.index(n));
    double u = rng_.uniform() * lambda_;
    if (u < v) {  // voter birth onto y - W
      const SiteKey x = disp_.draw(y, -1, rng_);
      if (config_.contains(x) || !accept_site(x)) continue;
      if (rates_.theta0 < 0.0 && rng_.uniform() * v < -rates_.theta0 && config_.contains(birth_.draw(x, 1, rng_)))
        continue;
      return Event{t_, x, true};
    }
    u -= v;
    if (u < v) {  // voter death of y
      if (config_.contains(disp_.draw(y, 1, rng_)) || !accept_site(y)) continue;
      if (rates_.theta1 < 0.0 && rng_.uniform() * v < -rates_.theta1 && !config_.contains(death_.draw(y, 1, rng_)))
        continue;
      return Event{t_, y, false};
    }
    u -= v;
    if (u < th0p) {  // competition-weighted birth
      const SiteKey x = disp_.draw(y, -1, rng_);
      if (config_.contains(x) || !accept_site(x)) continue;
      if (!config_.contains(birth_.draw(x, 1, rng_))) continue;
      return Event{t_, x, true};
    }
    u -= th0p;
    if (u < th1p) {  // competition-weighted death
      if (config_.contains(disp_.draw(y, 1, rng_)) || !accept_site(y)) continue;
      if (config_.contains(death_.draw(y, 1, rng_))) continue;
      return Event{t_, y, false};
    }
    // bias channel
    const SiteKey x = bias_.draw(y, -1, rng_);
    if (config_.contains(x) || !accept_site(x)) continue;
    return Event{t_, x, true};
  }
}

void ThinningEngine::commit(const Event& e) {
  const bool now = config_.flip(e.site);
  if (now != e.new_value) throw std::logic_error("event does not match the configuration");
  if (now && !config_.lattice().within(config_.lattice().decode(e.site), safe_limit_))
    throw LatticeRangeError("configuration reached the lattice coordinate limit");
  t_ = e.time;
  ++events_;
}

std::unique_ptr<SpinEngine> make_engine(const Model& model, Configuration initial, std::uint64_t seed,
                                        EngineKind kind) {
  if (kind == EngineKind::Thinning && !model.product)
    throw std::invalid_argument("thinning engine requires product-form rates");
  if (kind != EngineKind::Cached && model.product)
    return std::make_unique<ThinningEngine>(model.system.kernel, *model.product, std::move(initial), seed,
                                            model.system.domain);
  return std::make_unique<EventEngine>(model.system, std::move(initial), seed);
}

RunSummary run(SpinEngine& engine, const RunOptions& options, std::span<Observer* const> observers) {
  const double T = options.horizon;
  if (!(T >= engine.time())) throw std::invalid_argument("horizon precedes the engine clock");
  for (std::size_t i = 0; i < options.grid.size(); ++i) {
    if (options.grid[i] > T) throw std::invalid_argument("grid time beyond the horizon");
    if (i > 0 && options.grid[i] < options.grid[i - 1]) throw std::invalid_argument("grid times must be sorted");
  }
  RunSummary s;
  double t = engine.time();
  for (auto* o : observers) o->on_start(t, engine.configuration());
  std::size_t gi = 0;
  while (gi < options.grid.size() && options.grid[gi] < t) ++gi;  // grid points before the start are skipped
  s.mass_at.assign(options.grid.size(), 0);
  const bool tracks_rate = engine.total_rate().has_value();
  if (tracks_rate) s.integrated_rate = 0.0;
  std::uint64_t count = 0;
  for (;;) {
    const auto mass = static_cast<double>(engine.configuration().size());
    const double rate = tracks_rate ? *engine.total_rate() : 0.0;
    const auto ev = engine.next_event(T);
    const double t_next = ev ? ev->time : T;
    while (gi < options.grid.size() && (ev ? options.grid[gi] < t_next : options.grid[gi] <= T))
      s.mass_at[gi++] = engine.configuration().size();
    s.integrated_mass += mass * (t_next - t);
    if (tracks_rate) *s.integrated_rate += rate * (t_next - t);
    t = t_next;
    if (!ev) break;
    if (++count > options.event_budget)
      throw BudgetExceeded("event budget of " + std::to_string(options.event_budget) + " exceeded");
    for (auto* o : observers) o->before_flip(ev->time, ev->site, engine.configuration());
    engine.commit(*ev);
    for (auto* o : observers) o->after_flip(ev->time, ev->site, engine.configuration());
  }
  s.final_mass = engine.configuration().size();
  s.end_time = T;
  s.events = count;
  s.absorbed = engine.absorbed();
  for (auto* o : observers) o->on_finish(T, engine.configuration());
  return s;
}

void EventLogRecorder::on_start(double t, const Configuration& config) {
  log_.initial = config;
  log_.start = t;
  log_.events.clear();
  log_.complete = false;
}

void EventLogRecorder::after_flip(double t, SiteKey x, const Configuration& config) {
  log_.events.push_back(Event{t, x, config.contains(x)});
}

void EventLogRecorder::on_finish(double t, const Configuration&) {
  log_.horizon = t;
  log_.complete = true;
}

void write_event_log_csv(const EventLog& log, std::ostream& out) {
  const int d = log.initial.dim();
  out << "time";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  out << ",new_value\n";
  char buf[64];
  for (const auto& e : log.events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    out << buf;
    const Site s = log.initial.lattice().decode(e.site);
    for (int i = 0; i < d; ++i) out << ',' << s[i];
    out << ',' << (e.new_value ? 1 : 0) << '\n';
  }
}

RunSummary run_biased_voter(const Configuration& initial, const KernelSpec& p, const std::optional<OffsetLaw>& p_bar,
                            double v, double b, const RunOptions& options, std::uint64_t seed, EngineKind kind) {
  const Model m = biased_voter_model(p, p_bar, v, b);
  auto engine = make_engine(m, initial, seed, kind);
  return run(*engine, options);
}

CoupledSummary coupled_run(const SpinSystem& system, double k_delta, const Configuration& initial,
                           const RunOptions& options, std::uint64_t seed) {
  if (!(system.speed > k_delta)) throw std::invalid_argument("coupling needs N > k_delta");
  const DominatingKernels dk = dominating_kernels(system.table, system.kernel, k_delta);
  const double v = system.speed - k_delta;
  SpinSystem voter{system.kernel, v, PerturbationTable(system.kernel.dim()), system.domain};
  ProductForm pf{v};
  pf.bias = dk.c_bar;
  if (dk.c_bar > 0.0) pf.bias_law = dk.p_bar;
  SpinSystem biased{system.kernel, v, product_table(system.kernel, pf), system.domain};

  EventEngine e0(system, initial, 0);
  EventEngine e1(std::move(voter), initial, 0);
  EventEngine e2(std::move(biased), initial, 0);
  EventEngine* eng[3] = {&e0, &e1, &e2};
  Rng rng(seed);

  CoupledSummary s{e0.configuration(), e1.configuration(), e2.configuration()};
  s.c_bar = dk.c_bar;
  s.k_delta = k_delta;
  const double T = options.horizon;
  std::size_t gi = 0;
  const std::size_t ng = options.grid.size();
  s.mass_xi.assign(ng, 0);
  s.mass_xihat.assign(ng, 0);
  s.mass_xibar.assign(ng, 0);
  auto record_until = [&](double t_next, bool inclusive) {
    while (gi < ng && (inclusive ? options.grid[gi] <= t_next : options.grid[gi] < t_next)) {
      s.mass_xi[gi] = e0.configuration().size();
      s.mass_xihat[gi] = e1.configuration().size();
      s.mass_xibar[gi] = e2.configuration().size();
      ++gi;
    }
  };
  double t = 0.0;
  for (;;) {
    double R[3];
    for (int p = 0; p < 3; ++p) R[p] = eng[p]->active_size() ? *eng[p]->total_rate() : 0.0;
    const double total = R[0] + R[1] + R[2];
    if (!(total > 0.0)) break;
    const double dt = rng.exponential(total);
    if (t + dt > T) break;
    record_until(t + dt, false);
    t += dt;
    if (++s.events > options.event_budget)
      throw BudgetExceeded("event budget of " + std::to_string(options.event_budget) + " exceeded");
    const double u = rng.uniform() * total;
    const int p = u < R[0] ? 0 : (u < R[0] + R[1] ? 1 : 2);
    const SiteKey x = eng[p]->sample_site(rng.uniform());
    double c[3];
    for (int q = 0; q < 3; ++q) c[q] = eng[q]->cached_rate(x);
    const double cmax = c[0] + c[1] + c[2];
    const double m = rng.uniform() * cmax;
    for (int q = 0; q < 3; ++q) {
      const bool occ = eng[q]->configuration().contains(x);
      const bool flip = occ ? (m >= cmax - c[q]) : (m < c[q]);
      if (flip && c[q] > 0.0) {
        eng[q]->commit(Event{t, x, !occ});
        ++s.flips[q];
      }
    }
    const bool bar = e2.configuration().contains(x);
    if ((e0.configuration().contains(x) && !bar) || (e1.configuration().contains(x) && !bar)) {
      ++s.violations;
      throw DominationViolation("domination violated at " +
                                to_string(e0.configuration().lattice().decode(x), e0.configuration().dim()));
    }
  }
  record_until(T, true);
  s.xi = e0.configuration();
  s.xihat = e1.configuration();
  s.xibar = e2.configuration();
  return s;
}

}  // namespace svlv
