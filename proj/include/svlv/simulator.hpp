#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "svlv/configuration.hpp"
#include "svlv/rng.hpp"
#include "svlv/spin_system.hpp"

namespace svlv {

struct Event {
  double time = 0.0;
  SiteKey site = 0;
  bool new_value = false;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Common interface of the exact engines.
///
/// next_event(t_max) draws the next flip. If it happens at or before t_max
/// the engine clock moves to the event time and the event is returned; the
/// configuration is unchanged until commit(). Otherwise the clock moves to
/// t_max and nullopt is returned. In a trap (total rate 0) the clock does
/// not move, absorbed() becomes true and nullopt is returned.
class SpinEngine {
 public:
  virtual ~SpinEngine() = default;
  virtual double time() const = 0;
  virtual const Configuration& configuration() const = 0;
  virtual std::optional<Event> next_event(double t_max) = 0;
  virtual void commit(const Event& e) = 0;
  virtual bool absorbed() const = 0;
  /// Exact total flip rate when the engine tracks it.
  virtual std::optional<double> total_rate() const { return std::nullopt; }
  virtual std::uint64_t events() const = 0;
};

/// Binary indexed tree over slot rates.
class Fenwick {
 public:
  void resize(std::size_t n);
  std::size_t size() const { return n_; }
  void add(std::size_t i, double v);
  void rebuild(std::span<const double> values);
  double total() const;
  /// Slot i with prefix(i) <= target < prefix(i + 1); size() when target
  /// is past the end.
  std::size_t find(double target) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> tree_;
};

enum class SelectionMode {
  Tree,       // O(log n) Fenwick selection
  Canonical,  // sites scanned in lexicographic key order; reproduces the dense oracle bit for bit
};

struct EventEngineOptions {
  SelectionMode mode = SelectionMode::Tree;
  std::uint64_t refresh_interval = std::uint64_t{1} << 16;
};

/// Gillespie engine with a per-site rate cache over the active set.
class EventEngine final : public SpinEngine {
 public:
  EventEngine(SpinSystem system, Configuration initial, std::uint64_t seed, EventEngineOptions options = {});

  double time() const override { return t_; }
  const Configuration& configuration() const override { return config_; }
  std::optional<Event> next_event(double t_max) override;
  void commit(const Event& e) override;
  bool absorbed() const override { return absorbed_; }
  std::optional<double> total_rate() const override { return total_; }
  std::uint64_t events() const override { return events_; }

  const SpinSystem& system() const { return system_; }
  /// Cached rate of x (0 when outside the active set).
  double cached_rate(SiteKey x) const;
  std::size_t active_size() const { return slot_of_.size(); }
  /// Sum of cached rates recomputed from scratch.
  double recomputed_total() const;
  /// Active keys with their cached rates.
  std::vector<std::pair<SiteKey, double>> active_sites() const;
  /// Recomputes every cached rate and the tree.
  void refresh();
  /// Site drawn with probability proportional to its cached rate, using
  /// u in [0, 1). Requires a nonempty active set.
  SiteKey sample_site(double u) const;

 private:
  SiteKey pick_tree(double target) const;
  void rebuild_tree();
  void update_site(SiteKey x);
  void set_rate(SiteKey x, double r);
  void check_range(SiteKey x) const;
  bool in_domain(SiteKey x) const;

  SpinSystem system_;
  LocalRateEvaluator eval_;
  Configuration config_;
  Rng rng_;
  EventEngineOptions options_;
  double t_ = 0.0;
  double total_ = 0.0;
  bool absorbed_ = false;
  std::uint64_t events_ = 0;
  std::uint64_t since_refresh_ = 0;
  std::int64_t safe_limit_ = 0;

  absl::flat_hash_map<SiteKey, std::uint32_t> slot_of_;
  std::vector<SiteKey> slot_key_;
  std::vector<double> slot_rate_;
  std::vector<std::uint32_t> free_;
  Fenwick tree_;
};

/// Exact thinning engine for product-form rates. Every particle carries a
/// proposal clock of rate 2v + theta0^+ + theta1^+ + b; each proposal picks
/// a channel and is accepted with the exact conditional probability, so
/// the cost per proposal is O(1) in the kernel size.
class ThinningEngine final : public SpinEngine {
 public:
  ThinningEngine(const KernelSpec& kernel, ProductForm rates, Configuration initial, std::uint64_t seed,
                 std::optional<Box> domain = std::nullopt);
  ThinningEngine(const ThinningEngine&) = delete;
  ThinningEngine& operator=(const ThinningEngine&) = delete;

  double time() const override { return t_; }
  const Configuration& configuration() const override { return config_; }
  std::optional<Event> next_event(double t_max) override;
  void commit(const Event& e) override;
  bool absorbed() const override { return absorbed_; }
  std::uint64_t events() const override { return events_; }
  std::uint64_t proposals() const { return proposals_; }

 private:
  struct Law {
    const OffsetLaw* law = nullptr;
    std::vector<std::int64_t> delta;
    SiteKey draw(SiteKey y, int sign, Rng& rng) const {
      const auto d = delta[law->sample_index(rng)];
      return Lattice::shift(y, sign * d);
    }
  };
  bool accept_site(SiteKey x) const;

  KernelSpec kernel_;
  ProductForm rates_;
  Configuration config_;
  Rng rng_;
  std::optional<Box> domain_;
  Law disp_, birth_, death_, bias_;
  double lambda_ = 0.0;
  double t_ = 0.0;
  bool absorbed_ = false;
  std::uint64_t events_ = 0;
  std::uint64_t proposals_ = 0;
  std::int64_t safe_limit_ = 0;
};

enum class EngineKind { Auto, Cached, Thinning };

/// Thinning when the model has product form and kind allows it; the cached
/// engine otherwise.
std::unique_ptr<SpinEngine> make_engine(const Model& model, Configuration initial, std::uint64_t seed,
                                        EngineKind kind = EngineKind::Auto);

class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_start(double /*t*/, const Configuration& /*config*/) {}
  /// Called with the configuration just before the flip at x.
  virtual void before_flip(double /*t*/, SiteKey /*x*/, const Configuration& /*config*/) {}
  virtual void after_flip(double /*t*/, SiteKey /*x*/, const Configuration& /*config*/) {}
  virtual void on_finish(double /*t*/, const Configuration& /*config*/) {}
};

struct RunOptions {
  double horizon = 0.0;
  std::uint64_t event_budget = 50'000'000;
  /// Sorted times at which |xi| is recorded.
  std::vector<double> grid;
};

struct RunSummary {
  std::size_t final_mass = 0;
  double end_time = 0.0;
  std::uint64_t events = 0;
  bool absorbed = false;
  double integrated_mass = 0.0;                // int_0^T |xi_s| ds
  std::optional<double> integrated_rate;       // int_0^T sum_x c(x, xi_s) ds
  std::vector<std::size_t> mass_at;            // |xi| at grid times
};

/// Drives an engine to the horizon, calling observers at every event.
/// Throws BudgetExceeded when more than options.event_budget flips occur.
RunSummary run(SpinEngine& engine, const RunOptions& options, std::span<Observer* const> observers = {});

/// Recorded path: initial configuration plus every flip.
struct EventLog {
  explicit EventLog(const Configuration& c) : initial(c) {}
  Configuration initial;
  double start = 0.0;
  double horizon = 0.0;
  bool complete = false;
  std::vector<Event> events;
};

class EventLogRecorder final : public Observer {
 public:
  explicit EventLogRecorder(EventLog& log) : log_(log) {}
  void on_start(double t, const Configuration& config) override;
  void after_flip(double t, SiteKey x, const Configuration& config) override;
  void on_finish(double t, const Configuration& config) override;

 private:
  EventLog& log_;
};

/// Writes "time,x0,...,x{d-1},new_value" rows.
void write_event_log_csv(const EventLog& log, std::ostream& out);

/// Biased voter run: 0 -> 1 at v f1 + b fbar1, 1 -> 0 at v f0.
RunSummary run_biased_voter(const Configuration& initial, const KernelSpec& p, const std::optional<OffsetLaw>& p_bar,
                            double v, double b, const RunOptions& options, std::uint64_t seed,
                            EngineKind kind = EngineKind::Auto);

/// Three processes driven by one event stream: the perturbed process xi,
/// the voter model xihat at speed N - k_delta, and the biased voter model
/// xibar at speed N - k_delta with bias c_bar through pbar.
struct CoupledSummary {
  Configuration xi, xihat, xibar;
  std::uint64_t events = 0;
  std::uint64_t flips[3] = {0, 0, 0};
  std::uint64_t violations = 0;
  std::vector<std::size_t> mass_xi, mass_xihat, mass_xibar;  // at grid times
  double c_bar = 0.0;
  double k_delta = 0.0;
};

class DominationViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Requires speed > k_delta. Throws DominationViolation if xi or xihat ever
/// leaves xibar.
CoupledSummary coupled_run(const SpinSystem& system, double k_delta, const Configuration& initial,
                           const RunOptions& options, std::uint64_t seed);

}  // namespace svlv
