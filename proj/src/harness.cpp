#include "svlv/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "svlv/coalescing.hpp"
#include "svlv/experiments.hpp"
#include "svlv/perturbation.hpp"
#include "svlv/stats.hpp"

namespace svlv {

namespace fs = std::filesystem;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

EngineKind parse_engine(const std::string& s) {
  if (s == "auto") return EngineKind::Auto;
  if (s == "cached") return EngineKind::Cached;
  if (s == "thinning") return EngineKind::Thinning;
  throw ConfigError("unknown engine '" + s + "'");
}

Point point_from_json(const json& j, int dim) {
  Point p{};
  if (j.is_null()) return p;
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw ConfigError("center must have " + std::to_string(dim) + " coordinates");
  for (int i = 0; i < dim; ++i) p[i] = j[i].get<double>();
  return p;
}

json point_to_json(const Point& p, int dim) {
  json j = json::array();
  for (int i = 0; i < dim; ++i) j.push_back(p[i]);
  return j;
}

json estimate_json(const Estimate& e) { return {{"estimate", e.value}, {"se", e.se}, {"replicas", e.replicas}}; }

json tau_json(const TauEstimate& e) {
  return {{"estimate", e.estimate}, {"se", e.se}, {"replicas", e.reps}, {"horizon", e.horizon}};
}

json ladder_json(const LadderEstimate& l) {
  json at = json::array();
  for (const auto& a : l.at) at.push_back(tau_json(a));
  return {{"horizons", l.horizons}, {"at", at}, {"extrapolated", tau_json(l.extrapolated)},
          {"lower", l.lower()}, {"upper", l.upper()}};
}

json verdict_json(const Verdict& v) {
  return {{"label", v.label}, {"monotone", v.monotone}, {"improved", v.improved}, {"final_within", v.final_within},
          {"final_z", std::isfinite(v.final_z) ? json(v.final_z) : json(nullptr)}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

double eps_for(const ExperimentConfig& c, double N) { return std::pow(N, -c.analysis.constants.eps_exponent); }

}  // namespace

TestFn test_fn_from_json(const json& j, int dim) {
  const auto kind = j.value("kind", std::string());
  if (kind == "constant") return TestFn::constant(get_or(j, "value", 1.0));
  if (kind == "gaussian")
    return TestFn::gaussian(point_from_json(j.value("center", json()), dim), get_or(j, "width", 1.0),
                            get_or(j, "amplitude", 1.0));
  if (kind == "smooth_indicator")
    return TestFn::smooth_indicator(point_from_json(j.value("center", json()), dim), get_or(j, "radius", 0.5),
                                    get_or(j, "ramp", 0.5));
  if (kind == "time_dependent") {
    std::vector<double> knots;
    std::vector<TestFn> comps;
    for (const auto& k : j.at("schedule")) {
      knots.push_back(k.at("t").get<double>());
      comps.push_back(test_fn_from_json(k.at("fn"), dim));
    }
    return TestFn::time_dependent(std::move(knots), std::move(comps));
  }
  throw ConfigError("unknown test function kind '" + kind + "'");
}

json test_fn_to_json(const TestFn& f, int dim) {
  switch (f.kind()) {
    case TestFn::Kind::Constant:
      return {{"kind", "constant"}, {"value", f.constant_value()}};
    case TestFn::Kind::Gaussian:
      return {{"kind", "gaussian"}, {"center", point_to_json(f.center(), dim)}, {"width", f.width()},
              {"amplitude", f.amplitude()}};
    case TestFn::Kind::SmoothIndicator:
      return {{"kind", "smooth_indicator"}, {"center", point_to_json(f.center(), dim)}, {"radius", f.radius()},
              {"ramp", f.ramp()}};
    case TestFn::Kind::TimeDependent: {
      json s = json::array();
      for (std::size_t k = 0; k < f.num_components(); ++k)
        s.push_back({{"t", f.knots()[k]}, {"fn", test_fn_to_json(f.component(k), dim)}});
      return {{"kind", "time_dependent"}, {"schedule", s}};
    }
  }
  return {};
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c;
  c.name = j.value("name", std::string("experiment"));
  if (!j.contains("model")) throw ConfigError("missing \"model\" block");
  const json& m = j.at("model");
  if (!m.contains("kernel")) throw ConfigError("model needs \"kernel\"");
  c.model.kernel_json = m.at("kernel");
  json kj = c.model.kernel_json;
  std::vector<std::int64_t> ranges;
  if (kj.contains("M_N") && kj.at("M_N").is_array()) {
    ranges = kj.at("M_N").get<std::vector<std::int64_t>>();
    if (ranges.empty()) throw ConfigError("M_N list is empty");
    kj["M_N"] = ranges.front();
  }
  try {
    c.model.kernel = kernel_from_json(kj);
  } catch (const KernelError& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  }
  const int d = c.model.kernel.dim();
  c.model.type = m.value("type", std::string("lv"));
  c.model.theta0 = get_or(m, "theta0", 0.0);
  c.model.theta1 = get_or(m, "theta1", 0.0);
  c.model.bias = get_or(m, "bias", 0.0);
  try {
    if (m.contains("birth_law")) c.model.birth_law = law_from_json(m.at("birth_law"), d);
    if (m.contains("death_law")) c.model.death_law = law_from_json(m.at("death_law"), d);
    if (m.contains("bias_law")) c.model.bias_law = law_from_json(m.at("bias_law"), d);
    if (m.contains("table")) c.model.table = table_from_json(m.at("table"), d);
  } catch (const KernelError& e) {
    throw ConfigError(e.what());
  } catch (const TableError& e) {
    throw ConfigError(e.what());
  }
  if (m.contains("k_delta")) c.model.k_delta = m.at("k_delta").get<double>();
  const auto& t = c.model.type;
  if (t != "voter" && t != "lv" && t != "lv_two_kernel" && t != "biased_voter" && t != "table")
    throw ConfigError("unknown model type '" + t + "'");
  if (t == "lv_two_kernel" && (!c.model.birth_law || !c.model.death_law))
    throw ConfigError("lv_two_kernel needs \"birth_law\" and \"death_law\"");
  if (t == "table" && !c.model.table) throw ConfigError("table model needs \"table\"");
  if (t == "biased_voter" && c.model.bias < 0.0) throw ConfigError("bias must be >= 0");
  if (!m.contains("N")) throw ConfigError("model needs an \"N\" ladder");
  for (const auto& n : m.at("N")) {
    const double v = n.get<double>();
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("N values must be positive integers");
    if (!c.model.N.empty() && !(v > c.model.N.back())) throw ConfigError("N ladder must be strictly increasing");
    c.model.N.push_back(v);
  }
  if (c.model.N.empty()) throw ConfigError("N ladder is empty");
  if (!ranges.empty() && ranges.size() != c.model.N.size())
    throw ConfigError("M_N list must have one entry per N");
  for (std::size_t k = 0; k < c.model.N.size(); ++k) {
    if (ranges.empty()) {
      c.model.kernels.push_back(c.model.kernel);
      continue;
    }
    kj["M_N"] = ranges[k];
    try {
      c.model.kernels.push_back(kernel_from_json(kj));
    } catch (const KernelError& e) {
      throw ConfigError(std::string("kernel: ") + e.what());
    }
  }
  if (!m.contains("initial")) throw ConfigError("model needs \"initial\"");
  c.model.initial = m.at("initial");

  const json r = j.value("run", json::object());
  c.run.horizon = get_or(r, "horizon", 1.0);
  if (!(c.run.horizon > 0.0)) throw ConfigError("horizon must be > 0");
  const auto reps = get_or<std::int64_t>(r, "replicas", 1);
  if (reps < 1) throw ConfigError("replicas must be >= 1");
  c.run.replicas = static_cast<std::uint64_t>(reps);
  c.run.event_budget = get_or<std::uint64_t>(r, "event_budget", c.run.event_budget);
  c.run.seed = get_or<std::uint64_t>(r, "seed", c.run.seed);
  c.run.grid_points = get_or<std::size_t>(r, "grid_points", c.run.grid_points);
  if (c.run.grid_points < 1) throw ConfigError("grid_points must be >= 1");
  c.run.engine = parse_engine(r.value("engine", std::string("auto")));
  c.run.record_events = get_or(r, "record_events", false);

  const json a = j.value("analysis", json::object());
  if (a.contains("test_functions"))
    for (const auto& f : a.at("test_functions")) c.analysis.test_functions.push_back(f);
  else
    c.analysis.test_functions.push_back({{"kind", "constant"}, {"value", 1.0}});
  for (const auto& f : c.analysis.test_functions) (void)test_fn_from_json(f, d);
  const json k = a.value("constants", json::object());
  c.analysis.constants.horizon = get_or(k, "horizon", c.analysis.constants.horizon);
  c.analysis.constants.replicas = get_or<std::uint64_t>(k, "replicas", c.analysis.constants.replicas);
  c.analysis.constants.sigma_replicas = get_or<std::uint64_t>(k, "sigma_replicas", c.analysis.constants.sigma_replicas);
  c.analysis.constants.sigma_set_limit = get_or<std::size_t>(k, "sigma_set_limit", c.analysis.constants.sigma_set_limit);
  c.analysis.constants.eps_exponent = get_or(k, "eps_exponent", c.analysis.constants.eps_exponent);
  c.analysis.constants.report = k.value("report", std::string());
  if (!(c.analysis.constants.horizon > 0.0) || c.analysis.constants.replicas < 2)
    throw ConfigError("constants need horizon > 0 and replicas >= 2");
  c.analysis.trend_level = get_or(a, "trend_level", c.analysis.trend_level);
  c.analysis.trend_slack = get_or(a, "trend_slack", c.analysis.trend_slack);
  c.analysis.final_se = get_or(a, "final_se", c.analysis.final_se);
  c.analysis.min_replicas = get_or<std::size_t>(a, "min_replicas", c.analysis.min_replicas);

  // Fail early on an unusable initial configuration.
  (void)build_initial(c, 0, 0);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig c = parse_config(read_json_file(path));
  auto& rep = c.analysis.constants.report;
  if (!rep.empty() && fs::path(rep).is_relative()) rep = (fs::path(path).parent_path() / rep).string();
  return c;
}

Model build_model(const ModelBlock& m, std::size_t k) {
  const KernelSpec& p = m.kernel_at(k);
  const double N = m.N.at(k);
  if (m.type == "voter") return voter_model(p, N);
  if (m.type == "lv") return lv_model(p, N, m.theta0, m.theta1);
  if (m.type == "lv_two_kernel") return lv_two_kernel_model(p, *m.birth_law, *m.death_law, N, m.theta0, m.theta1);
  if (m.type == "biased_voter") return biased_voter_model(p, m.bias_law, N, m.bias);
  return table_model(p, N, *m.table);
}

PerturbationTable active_table(const ModelBlock& m, std::size_t k) { return build_model(m, k).system.table; }

Configuration build_initial(const ExperimentConfig& c, std::size_t k, std::uint64_t r) {
  const double N = c.model.N.at(k);
  return initial_from_json(c.model.initial, c.model.kernel.dim(), N, c.model.kernel_at(k).ell(static_cast<std::int64_t>(N)),
                           derive_seed(c.run.seed, {kTagInitial, k, r}));
}

// ---------------------------------------------------------------------------

CommandResult cmd_simulate(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  if (c.run.record_events) ensure_dir(join(out_dir, "events"));
  std::ofstream csv(join(out_dir, "replicas.csv"));
  csv << "N,replica,seed,initial_sites,final_sites,X0,XT,integrated_mass,qv,events,budget_exceeded\n";
  CommandResult res;
  json cells = json::array();
  const int d = c.model.kernel.dim();
  for (std::size_t k = 0; k < c.model.N.size(); ++k) {
    const double N = c.model.N[k];
    const Model model = build_model(c.model, k);
    ReplicaSpec spec{&model, N, c.model.kernel_at(k).ell(static_cast<std::int64_t>(N)), c.run.horizon,
                     uniform_grid(c.run.horizon, c.run.grid_points), c.run.engine, c.run.event_budget};
    std::vector<ReplicaOutcome> reps;
    std::uint64_t overruns = 0;
    for (std::uint64_t r = 0; r < c.run.replicas; ++r) {
      const Configuration init = build_initial(c, k, r);
      const std::uint64_t seed = derive_seed(c.run.seed, {kTagRun, k, r});
      EventLog ev(init);
      EventLogRecorder rec(ev);
      Observer* obs[1] = {&rec};
      auto out = run_replica(spec, init, seed,
                             c.run.record_events ? std::span<Observer* const>(obs) : std::span<Observer* const>());
      if (c.run.record_events && !out.budget_exceeded) {
        std::ofstream f(join(out_dir, "events/N" + std::to_string(static_cast<std::int64_t>(N)) + "_r" +
                                          std::to_string(r) + ".csv"));
        write_event_log_csv(ev, f);
      }
      overruns += out.budget_exceeded;
      csv << static_cast<std::int64_t>(N) << ',' << r << ',' << seed << ',' << init.size() << ','
          << (out.budget_exceeded ? std::string() : std::to_string(std::llround(out.xT * N))) << ','
          << format_double(out.x0) << ',' << format_double(out.xT) << ',' << format_double(out.integrated_mass) << ','
          << format_double(out.qv) << ',' << out.events << ',' << out.budget_exceeded << '\n';
      reps.push_back(std::move(out));
    }
    const Estimate m = mean_terminal_mass(reps);
    RunningStats x0;
    for (const auto& r : reps) x0.add(r.x0);
    cells.push_back({{"N", N},
                     {"replicas", c.run.replicas},
                     {"budget_exceeded", overruns},
                     {"mean_initial_mass", x0.mean()},
                     {"mean_terminal_mass", estimate_json(m)},
                     {"seed", c.run.seed}});
    log << "N=" << N << " mean X_T(1) = " << m.value << " +- " << m.se << " (" << overruns << " budget overruns)\n";
  }
  (void)d;
  res.report = {{"command", "simulate"}, {"name", c.name}, {"horizon", c.run.horizon}, {"cells", cells}};
  write_json_file(join(out_dir, "summary.json"), res.report);
  return res;
}

// ---------------------------------------------------------------------------

json estimate_constants(const ExperimentConfig& c, std::ostream& log) {
  const KernelSpec& k = c.model.kernel;
  const auto& cc = c.analysis.constants;
  const int d = k.dim();
  const bool fixed = k.variant() == KernelVariant::Fixed;
  const std::uint64_t seed = c.run.seed;
  json rep;
  json warnings = json::array();
  rep["kernel"] = c.model.kernel_json;
  rep["model_type"] = c.model.type;
  rep["seed"] = seed;
  if (fixed) {
    rep["sigma2"] = k.sigma2();
  } else {
    rep["sigma2"] = 1.0 / 3.0;
    json s2 = json::array();
    for (std::size_t i = 0; i < c.model.N.size(); ++i)
      s2.push_back({{"N", c.model.N[i]}, {"M_N", c.model.kernel_at(i).range()}, {"sigma2", c.model.kernel_at(i).sigma2()}});
    rep["sigma2_N"] = s2;
  }
  rep["eps_exponent"] = cc.eps_exponent;

  std::optional<BetaDeltaEstimate> bd;
  std::optional<LadderEstimate> beta_ladder, delta_ladder;
  if (fixed && d >= 3) {
    log << "estimating gamma_e (" << cc.replicas << " replicates)\n";
    const auto g = estimate_gamma_e(k, cc.horizon, cc.replicas, derive_seed(seed, {kTagConstants, 1}));
    rep["gamma_e"] = ladder_json(g);
    rep["gamma"] = g.extrapolated.estimate;
    rep["branching_target"] = {{"value", 2.0 * g.extrapolated.estimate}, {"se", 2.0 * g.extrapolated.se}};
    if (c.model.type == "lv" || c.model.type == "lv_two_kernel") {
      log << "estimating beta and delta\n";
      if (c.model.type == "lv") {
        bd = estimate_beta_delta_coal(k, k.law(), cc.horizon, cc.replicas, derive_seed(seed, {kTagConstants, 2}));
        beta_ladder = bd->beta;
        delta_ladder = bd->delta;
        rep["containment_failures"] = bd->containment_failures;
      } else {
        const auto b = estimate_beta_delta_coal(k, *c.model.birth_law, cc.horizon, cc.replicas,
                                                derive_seed(seed, {kTagConstants, 2}));
        const auto dd = estimate_beta_delta_coal(k, *c.model.death_law, cc.horizon, cc.replicas,
                                                 derive_seed(seed, {kTagConstants, 3}));
        beta_ladder = b.beta;
        delta_ladder = dd.delta;
        rep["containment_failures"] = b.containment_failures + dd.containment_failures;
      }
      rep["beta"] = ladder_json(*beta_ladder);
      rep["delta"] = ladder_json(*delta_ladder);
    }
  } else if (fixed) {
    warnings.push_back("fixed kernel in d <= 2: escape constants vanish (walks are recurrent)");
    rep["gamma"] = 0.0;
    rep["branching_target"] = {{"value", 0.0}, {"se", 0.0}};
  } else {
    rep["gamma"] = 1.0;
    rep["branching_target"] = {{"value", 2.0}, {"se", 0.0}};
  }

  // Drift of the limit.
  const PerturbationTable table0 = active_table(c.model, 0);
  json theta;
  const bool lv_like = c.model.type == "lv" || c.model.type == "lv_two_kernel";
  if (table0.empty()) {
    theta = {{"value", 0.0}, {"se", 0.0}, {"method", "zero-table"}};
  } else if (!fixed && lv_like) {
    const auto fin = assemble_theta(table0, indicator_sigma(table0));
    theta = {{"value", -c.model.theta1},
             {"se", 0.0},
             {"method", "long-range-analytic"},
             {"finite_range_value", fin.theta}};
  } else if (!fixed) {
    const auto th = assemble_theta(table0, indicator_sigma(table0));
    theta = {{"value", th.theta}, {"se", th.se}, {"method", "indicator-sigma"}};
  } else if (lv_like && beta_ladder) {
    const double b = beta_ladder->extrapolated.estimate, dl = delta_ladder->extrapolated.estimate;
    const double sb = beta_ladder->extrapolated.se, sd = delta_ladder->extrapolated.se;
    theta = {{"value", c.model.theta0 * b - c.model.theta1 * dl},
             {"se", std::hypot(c.model.theta0 * sb, c.model.theta1 * sd)},
             {"method", "coalescing-beta-delta"}};
  } else if (d >= 3) {
    SigmaMap sigma;
    const auto sets = required_sigma_sets(table0);
    std::uint64_t idx = 0;
    for (const auto& A : sets) {
      std::vector<Site> starts(A.begin(), A.end());
      sigma[A] = estimate_tau_leq(starts, k.law(), 1.0, 4.0 * cc.horizon, cc.sigma_replicas,
                                  derive_seed(seed, {kTagConstants, 10, idx++}));
    }
    const auto th = assemble_theta(table0, sigma);
    theta = {{"value", th.theta}, {"se", th.se}, {"method", "finite-horizon-sigma"},
             {"sigma_horizon", 4.0 * cc.horizon}};
  } else {
    SigmaMap sigma;
    for (const auto& A : required_sigma_sets(table0)) sigma[A] = TauEstimate{1.0, 0.0, 0, kNever};
    const auto th = assemble_theta(table0, sigma);
    theta = {{"value", th.theta}, {"se", th.se}, {"method", "recurrent-sigma-one"}};
  }
  rep["theta"] = theta;

  // Finite-N constants along the ladder.
  json gN = json::array(), sN = json::array();
  for (std::size_t i = 0; i < c.model.N.size(); ++i) {
    const double N = c.model.N[i];
    const double eps = eps_for(c, N);
    const auto g = estimate_gamma_N(c.model.kernel_at(i), N, eps, cc.sigma_replicas, derive_seed(seed, {kTagConstants, 20, i}));
    gN.push_back({{"N", N}, {"eps", eps}, {"estimate", g.estimate}, {"se", g.se}, {"replicas", g.reps}});
    const auto sets = required_sigma_sets(active_table(c.model, i));
    json entries = json::array();
    const std::size_t n = std::min(sets.size(), cc.sigma_set_limit);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<Site> starts(sets[s].begin(), sets[s].end());
      const auto e = estimate_tau_leq(starts, c.model.kernel_at(i).law(), N, eps, cc.sigma_replicas,
                                      derive_seed(seed, {kTagConstants, 30 + i, s}));
      entries.push_back({{"A", to_string(sets[s], d)}, {"estimate", e.estimate}, {"se", e.se}});
    }
    sN.push_back({{"N", N}, {"eps", eps}, {"sets", entries}, {"total_sets", sets.size()},
                  {"truncated", sets.size() > n}});
    log << "N=" << N << ": gamma_N = " << g.estimate << " +- " << g.se << ", " << n << " sigma_N sets\n";
  }
  rep["gamma_N"] = gN;
  rep["sigma_N"] = sN;
  rep["warnings"] = warnings;
  return rep;
}

CommandResult cmd_estimate_constants(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  CommandResult res;
  res.report = estimate_constants(c, log);
  for (const auto& w : res.report["warnings"]) log << "warning: " << w.get<std::string>() << "\n";
  write_json_file(join(out_dir, "constants.json"), res.report);
  log << "theta = " << res.report["theta"]["value"] << " +- " << res.report["theta"]["se"] << "\n";
  return res;
}

// ---------------------------------------------------------------------------

CommandResult cmd_verify_convergence(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
  if (c.analysis.constants.report.empty()) throw ConfigError("verify-convergence needs a constants report");
  const json constants = read_json_file(c.analysis.constants.report);
  for (const char* key : {"theta", "branching_target", "sigma2"})
    if (!constants.contains(key)) throw ConfigError(std::string("constants report lacks \"") + key + "\"");
  const double theta = constants["theta"]["value"].get<double>();
  const double btarget = constants["branching_target"]["value"].get<double>();
  const double sigma2 = constants["sigma2"].get<double>();
  ensure_dir(out_dir);

  std::vector<Estimate> drift, branch, diff;
  std::ofstream csv(join(out_dir, "convergence.csv"));
  csv << "N,quantity,estimate,se,replicas\n";
  const auto grid = uniform_grid(c.run.horizon, c.run.grid_points);
  const int d = c.model.kernel.dim();
  for (std::size_t k = 0; k < c.model.N.size(); ++k) {
    const double N = c.model.N[k];
    const Model model = build_model(c.model, k);
    ReplicaSpec spec{&model, N, c.model.kernel_at(k).ell(static_cast<std::int64_t>(N)), c.run.horizon, grid, c.run.engine,
                     c.run.event_budget};
    std::vector<ReplicaOutcome> reps;
    for (std::uint64_t r = 0; r < c.run.replicas; ++r)
      reps.push_back(run_replica(spec, build_initial(c, k, r), derive_seed(c.run.seed, {kTagRun, k, r})));
    if (reps.size() < 2) {
      drift.push_back({NAN, NAN, reps.size()});
      branch.push_back({NAN, NAN, reps.size()});
      diff.push_back({NAN, NAN, reps.size()});
    } else {
      drift.push_back(pooled_drift(reps, grid));
      branch.push_back(pooled_branching(reps));
      diff.push_back(pooled_diffusivity(reps, d, c.run.horizon));
    }
    for (auto [name, e] : {std::pair<const char*, Estimate>{"drift", drift.back()},
                           {"branching", branch.back()},
                           {"diffusivity", diff.back()}})
      csv << static_cast<std::int64_t>(N) << ',' << name << ',' << format_double(e.value) << ','
          << format_double(e.se) << ',' << e.replicas << '\n';
    log << "N=" << N << ": drift " << drift.back().value << " +- " << drift.back().se << ", branching "
        << branch.back().value << " +- " << branch.back().se << ", diffusivity " << diff.back().value << " +- "
        << diff.back().se << "\n";
  }
  const auto& a = c.analysis;
  auto verdict = [&](const std::vector<Estimate>& l, double target) {
    return ladder_verdict(l, target, a.trend_slack, a.trend_level, a.final_se, a.min_replicas);
  };
  const Verdict vd = verdict(drift, theta), vb = verdict(branch, btarget), vs = verdict(diff, sigma2);
  auto ladder = [](const std::vector<Estimate>& l) {
    json j = json::array();
    for (const auto& e : l) j.push_back(estimate_json(e));
    return j;
  };
  CommandResult res;
  res.report = {{"command", "verify-convergence"},
                {"name", c.name},
                {"N", c.model.N},
                {"seed", c.run.seed},
                {"drift", {{"target", theta}, {"ladder", ladder(drift)}, {"verdict", verdict_json(vd)}}},
                {"branching", {{"target", btarget}, {"ladder", ladder(branch)}, {"verdict", verdict_json(vb)}}},
                {"diffusivity", {{"target", sigma2}, {"ladder", ladder(diff)}, {"verdict", verdict_json(vs)}}}};
  write_json_file(join(out_dir, "convergence.json"), res.report);
  for (const auto* v : {&vd, &vb, &vs})
    if (v->label == "fail" || v->label == "trend") res.exit_code = 2;
  log << "drift: " << vd.label << ", branching: " << vb.label << ", diffusivity: " << vs.label << "\n";
  return res;
}

// ---------------------------------------------------------------------------

CommandResult cmd_coupling_check(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  CommandResult res;
  json cells = json::array();
  const auto grid = uniform_grid(c.run.horizon, c.run.grid_points);
  bool ok = true;
  for (std::size_t k = 0; k < c.model.N.size(); ++k) {
    const double N = c.model.N[k];
    const KernelSpec& kernel = c.model.kernel_at(k);
    const Model model = build_model(c.model, k);
    double k_delta = 0.0;
    if (c.model.k_delta) {
      k_delta = *c.model.k_delta;
    } else {
      ValidationOptions vo;
      vo.samples = 2000;
      const auto v = validate_table(model.system.table, kernel, N, vo);
      if (!v.k_delta) throw ConfigError("no k_delta certificate; set model.k_delta");
      k_delta = *v.k_delta;
    }
    if (!(N > k_delta)) throw ConfigError("coupling needs N > k_delta");
    const DominatingKernels dk = dominating_kernels(model.system.table, kernel, k_delta);
    const double v = N - k_delta;

    std::uint64_t violations = 0, mismatches = 0, overruns = 0;
    std::vector<std::int64_t> xi_T, xihat_T, xibar_T;
    std::vector<RunningStats> m1(grid.size()), m2(grid.size());
    RunningStats hat_change;
    for (std::uint64_t r = 0; r < c.run.replicas; ++r) {
      const Configuration init = build_initial(c, k, r);
      const double b0 = static_cast<double>(init.size());
      try {
        const auto s = coupled_run(model.system, k_delta, init, RunOptions{c.run.horizon, c.run.event_budget, grid},
                                   derive_seed(c.run.seed, {kTagCoupled, k, r}));
        xi_T.push_back(static_cast<std::int64_t>(s.xi.size()));
        xihat_T.push_back(static_cast<std::int64_t>(s.xihat.size()));
        xibar_T.push_back(static_cast<std::int64_t>(s.xibar.size()));
        if (model.system.table.empty() && !s.xi.same_sites(s.xihat)) ++mismatches;
        hat_change.add(static_cast<double>(s.xihat.size()) - b0);
        if (b0 > 0.0)
          for (std::size_t g = 0; g < grid.size(); ++g) {
            const double t = grid[g];
            const double e = std::exp(dk.c_bar * t);
            const double bound1 = e * b0;
            const double growth = dk.c_bar > 0.0 ? (dk.c_bar + 2.0 * v) / dk.c_bar * -std::expm1(-dk.c_bar * t)
                                                  : 2.0 * v * t;
            const double bound2 = e * e * (b0 * b0 + growth * b0);
            const double x = static_cast<double>(s.mass_xibar[g]);
            m1[g].add(x / bound1);
            m2[g].add(x * x / bound2);
          }
      } catch (const DominationViolation& e) {
        ++violations;
        log << "replica " << r << ": " << e.what() << "\n";
      } catch (const BudgetExceeded&) {
        ++overruns;
      }
    }
    // Independent marginals.
    std::vector<std::int64_t> ind_xi, ind_hat, ind_bar;
    const Model hat = voter_model(kernel, v);
    const Model bar = biased_voter_model(kernel, dk.p_bar, v, dk.c_bar);
    for (std::uint64_t r = 0; r < c.run.replicas; ++r) {
      const Configuration init = build_initial(c, k, r);
      const RunOptions opt{c.run.horizon, c.run.event_budget};
      try {
        auto e0 = make_engine(model, init, derive_seed(c.run.seed, {kTagMarginal, k, 3 * r}), c.run.engine);
        ind_xi.push_back(static_cast<std::int64_t>(run(*e0, opt).final_mass));
        auto e1 = make_engine(hat, init, derive_seed(c.run.seed, {kTagMarginal, k, 3 * r + 1}));
        ind_hat.push_back(static_cast<std::int64_t>(run(*e1, opt).final_mass));
        auto e2 = make_engine(bar, init, derive_seed(c.run.seed, {kTagMarginal, k, 3 * r + 2}));
        ind_bar.push_back(static_cast<std::int64_t>(run(*e2, opt).final_mass));
      } catch (const BudgetExceeded&) {
        ++overruns;
      }
    }
    auto marginal = [&](const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
      const TestResult t = chi2_two_sample(a, b);
      return json{{"chi2", t.statistic}, {"df", t.df}, {"p_value", t.p_value}, {"pass", t.p_value >= 0.01}};
    };
    json marg = {{"xi", marginal(xi_T, ind_xi)}, {"xihat", marginal(xihat_T, ind_hat)},
                 {"xibar", marginal(xibar_T, ind_bar)}};
    bool moments_ok = true;
    json moments = json::array();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const bool a = m1[g].mean() <= 1.0 + 3.0 * m1[g].se();
      const bool b = m2[g].mean() <= 1.0 + 3.0 * m2[g].se();
      moments_ok = moments_ok && a && b;
      moments.push_back({{"t", grid[g]},
                         {"first_ratio", m1[g].mean()},
                         {"first_se", m1[g].se()},
                         {"second_ratio", m2[g].mean()},
                         {"second_se", m2[g].se()},
                         {"pass", a && b}});
    }
    const bool mart = std::abs(hat_change.mean()) <= 4.0 * hat_change.se() || hat_change.se() == 0.0;
    bool marg_ok = true;
    for (const auto& [key, val] : marg.items()) marg_ok = marg_ok && val["pass"].get<bool>();
    const bool cell_ok = violations == 0 && mismatches == 0 && moments_ok && mart && marg_ok;
    ok = ok && cell_ok;
    cells.push_back({{"N", N},
                     {"k_delta", k_delta},
                     {"c_bar", dk.c_bar},
                     {"replicas", c.run.replicas},
                     {"violations", violations},
                     {"xi_xihat_mismatches", mismatches},
                     {"budget_exceeded", overruns},
                     {"moment_bounds", moments},
                     {"voter_mass_change", {{"mean", hat_change.mean()}, {"se", hat_change.se()}, {"pass", mart}}},
                     {"marginals", marg},
                     {"pass", cell_ok}});
    log << "N=" << N << ": " << violations << " violations, moment bounds " << (moments_ok ? "ok" : "FAILED")
        << ", marginals " << (marg_ok ? "ok" : "FAILED") << "\n";
  }
  res.report = {{"command", "coupling-check"}, {"name", c.name}, {"seed", c.run.seed}, {"cells", cells}, {"pass", ok}};
  write_json_file(join(out_dir, "coupling.json"), res.report);
  res.exit_code = ok ? 0 : 2;
  return res;
}

// ---------------------------------------------------------------------------

CommandResult cmd_decomposition_check(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  CommandResult res;
  const int d = c.model.kernel.dim();
  std::vector<TestFn> fns;
  for (const auto& f : c.analysis.test_functions) fns.push_back(test_fn_from_json(f, d));
  const auto grid = uniform_grid(c.run.horizon, c.run.grid_points);
  json cells = json::array();
  bool ok = true;
  for (std::size_t k = 0; k < c.model.N.size(); ++k) {
    const double N = c.model.N[k];
    const double ell = c.model.kernel_at(k).ell(static_cast<std::int64_t>(N));
    const Model model = build_model(c.model, k);
    ReplicaSpec spec{&model, N, ell, c.run.horizon, {}, c.run.engine, c.run.event_budget};
    const std::size_t F = fns.size(), G = grid.size();
    std::vector<double> max_res(F, 0.0);
    std::vector<std::vector<RunningStats>> mean_m(F, std::vector<RunningStats>(G)),
        comp(F, std::vector<RunningStats>(G));
    std::uint64_t overruns = 0;
    for (std::uint64_t r = 0; r < c.run.replicas; ++r) {
      std::vector<std::unique_ptr<DecompositionObserver>> obs;
      std::vector<Observer*> ptrs;
      for (const auto& f : fns) {
        obs.push_back(std::make_unique<DecompositionObserver>(model.system, N, ell, f, grid, true));
        ptrs.push_back(obs.back().get());
      }
      const auto out = run_replica(spec, build_initial(c, k, r), derive_seed(c.run.seed, {kTagDecomposition, k, r}),
                                   ptrs);
      if (out.budget_exceeded) {
        ++overruns;
        continue;
      }
      for (std::size_t f = 0; f < F; ++f) {
        const auto& rep = obs[f]->report();
        max_res[f] = std::max(max_res[f], rep.max_relative_residual);
        for (std::size_t g = 0; g < G; ++g) {
          const auto& row = rep.rows[g];
          mean_m[f][g].add(row.M);
          comp[f][g].add(row.M * row.M - (row.QV1 + row.QV2));
        }
        if (r == 0) {
          std::ofstream csv(join(out_dir, "decomposition_N" + std::to_string(static_cast<std::int64_t>(N)) + "_f" +
                                              std::to_string(f) + ".csv"));
          csv << "t,X_phi,D1,D2,D3,M,QV1,QV2,residual\n";
          for (const auto& row : rep.rows)
            csv << format_double(row.t) << ',' << format_double(row.X_phi) << ',' << format_double(row.D1) << ','
                << format_double(row.D2) << ',' << format_double(row.D3) << ',' << format_double(row.M) << ','
                << format_double(row.QV1) << ',' << format_double(row.QV2) << ',' << format_double(row.residual)
                << '\n';
        }
      }
    }
    for (std::size_t f = 0; f < F; ++f) {
      const bool res_ok = max_res[f] <= 1e-9;
      bool mart_ok = true, comp_ok = true;
      json times = json::array();
      for (std::size_t g = 0; g < G; ++g) {
        const auto& a = mean_m[f][g];
        const auto& b = comp[f][g];
        const bool ma = a.count() < 2 || std::abs(a.mean()) <= 4.0 * a.se();
        const bool cb = b.count() < 2 || std::abs(b.mean()) <= 4.0 * b.se();
        mart_ok = mart_ok && ma;
        comp_ok = comp_ok && cb;
        times.push_back({{"t", grid[g]},
                         {"mean_M", a.mean()},
                         {"se_M", a.se()},
                         {"mean_M2_minus_QV", b.mean()},
                         {"se_M2_minus_QV", b.se()}});
      }
      const bool all = res_ok && mart_ok && comp_ok;
      ok = ok && all;
      cells.push_back({{"N", N},
                       {"test_function", test_fn_to_json(fns[f], d)},
                       {"max_relative_residual", max_res[f]},
                       {"residual_gate", res_ok},
                       {"martingale_gate", mart_ok},
                       {"compensator_gate", comp_ok},
                       {"budget_exceeded", overruns},
                       {"times", times},
                       {"pass", all}});
      log << "N=" << N << " " << fns[f].describe() << ": residual " << max_res[f] << ", martingale "
          << (mart_ok ? "ok" : "FAILED") << ", compensator " << (comp_ok ? "ok" : "FAILED") << "\n";
    }
  }
  res.report = {{"command", "decomposition-check"}, {"name", c.name}, {"seed", c.run.seed}, {"cells", cells},
                {"pass", ok}};
  write_json_file(join(out_dir, "decomposition.json"), res.report);
  res.exit_code = ok ? 0 : 2;
  return res;
}

}  // namespace svlv
