#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svlv/io.hpp"
#include "svlv/kernel.hpp"
#include "svlv/observables.hpp"
#include "svlv/simulator.hpp"
#include "svlv/spin_system.hpp"

namespace svlv {

struct ModelBlock {
  json kernel_json;
  KernelSpec kernel;                 // first rung
  std::vector<KernelSpec> kernels;   // one per N (long-range M_N may be a list)
  std::string type = "lv";  // voter, lv, lv_two_kernel, biased_voter, table
  double theta0 = 0.0;
  double theta1 = 0.0;
  std::optional<OffsetLaw> birth_law, death_law, bias_law;
  double bias = 0.0;
  std::optional<PerturbationTable> table;
  std::optional<double> k_delta;
  std::vector<double> N;
  json initial;

  const KernelSpec& kernel_at(std::size_t k) const { return kernels.at(k); }
};

struct RunBlock {
  double horizon = 1.0;
  std::uint64_t replicas = 1;
  std::uint64_t event_budget = 50'000'000;
  std::uint64_t seed = 1;
  std::size_t grid_points = 10;
  EngineKind engine = EngineKind::Auto;
  bool record_events = false;
};

struct ConstantsBlock {
  double horizon = 250.0;
  std::uint64_t replicas = 100000;
  std::uint64_t sigma_replicas = 10000;
  std::size_t sigma_set_limit = 200;
  double eps_exponent = 0.25;  // eps_N = N^{-eps_exponent}
  std::string report;          // path of a constants report for verify-convergence
};

struct AnalysisBlock {
  std::vector<json> test_functions;
  ConstantsBlock constants;
  double trend_level = 0.05;
  double trend_slack = 1.0;
  double final_se = 3.0;
  std::size_t min_replicas = 100;
};

struct ExperimentConfig {
  std::string name;
  ModelBlock model;
  RunBlock run;
  AnalysisBlock analysis;
};

/// Parses and validates a configuration; throws ConfigError.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::string& path);

TestFn test_fn_from_json(const json& j, int dim);
json test_fn_to_json(const TestFn& f, int dim);

/// Model for ladder index k.
Model build_model(const ModelBlock& m, std::size_t k);
/// The perturbation table of the configured model at ladder index k.
PerturbationTable active_table(const ModelBlock& m, std::size_t k);
/// Initial configuration of replica r at ladder index k.
Configuration build_initial(const ExperimentConfig& c, std::size_t k, std::uint64_t r);

/// Seed tags of the splitting rule derive_seed(master, {tag, k, r}).
enum SeedTag : std::uint64_t {
  kTagInitial = 101,
  kTagRun = 102,
  kTagConstants = 103,
  kTagCoupled = 104,
  kTagMarginal = 105,
  kTagDecomposition = 106,
};

/// Exit codes: 0 all gates pass, 2 a gate failed, 1 usage or config error.
struct CommandResult {
  int exit_code = 0;
  json report;
};

CommandResult cmd_simulate(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log);
CommandResult cmd_estimate_constants(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log);
CommandResult cmd_verify_convergence(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log);
CommandResult cmd_coupling_check(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log);
CommandResult cmd_decomposition_check(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log);

/// Constants report without writing files (used by the commands and the
/// acceptance suite).
json estimate_constants(const ExperimentConfig& c, std::ostream& log);

}  // namespace svlv
