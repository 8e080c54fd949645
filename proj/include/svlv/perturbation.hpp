#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svlv/configuration.hpp"
#include "svlv/kernel.hpp"

namespace svlv {

/// Finite subset of Z^d stored as a sorted, duplicate-free offset list.
using OffsetSet = std::vector<Offset>;

OffsetSet canonical_set(std::vector<Offset> offsets);
std::string to_string(const OffsetSet& set, int dim);

struct PerturbationRates {
  double beta = 0.0;
  double delta = 0.0;
};

/// Provenance of constructor-built tables.
struct TableOrigin {
  std::string kind;  // "lv" or "lv_two_kernel"
  double theta0 = 0.0;
  double theta1 = 0.0;
};

class TableError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite map A -> (beta_N(A), delta_N(A)).
///
/// Keys never contain the origin and beta(empty) is always zero. Raw
/// entries whose key contains the origin are folded on insertion: their
/// delta moves to A \ {0} and their beta is dropped, which leaves the
/// perturbation rate unchanged.
class PerturbationTable {
 public:
  explicit PerturbationTable(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  /// Adds (beta, delta) to the entry for A, applying the origin fold.
  void add(OffsetSet set, double beta, double delta);

  const std::map<OffsetSet, PerturbationRates>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  PerturbationRates at(const OffsetSet& set) const;
  /// Sorted union of all offsets appearing in keys.
  std::vector<Offset> offsets() const;
  std::size_t max_set_size() const;
  /// Drops entries with beta == delta == 0.
  void prune();

  std::optional<TableOrigin> origin;

 private:
  int dim_;
  std::map<OffsetSet, PerturbationRates> entries_;
};

/// Lotka-Volterra table for a symmetric kernel.
PerturbationTable lv_table(const KernelSpec& kernel, double theta0, double theta1);
/// Two-kernel Lotka-Volterra table with competition laws p_b and p_d.
PerturbationTable lv_two_kernel_table(const KernelSpec& p, const OffsetLaw& p_b, const OffsetLaw& p_d, double theta0,
                                      double theta1);

/// 1 iff every site x + a, a in A, is occupied (1 for the empty set).
bool chi(const Configuration& config, const OffsetSet& set, const Site& x);

class RatePositivityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// c_N(x, xi) = speed * sum_e p(e) 1{xi(x+e) != xi(x)}
///            + sum_A chi(A, x, xi) (beta(A) 1{xi(x)=0} + delta(A) 1{xi(x)=1}).
/// `speed` is N for voter-model perturbations. Throws RatePositivityError
/// when the result is negative beyond rounding.
double flip_rate(const Configuration& config, const Site& site, const KernelSpec& kernel,
                 const PerturbationTable& table, double speed);

struct ValidationReport {
  double p1_sum = 0.0;           // sum max(|A|,1)(|beta| + |delta|)
  double delta_minus_sum = 0.0;  // sum delta(A)^-
  double c_beta = 0.0;           // sum beta(A)^+
  std::optional<double> k_delta;
  std::string k_delta_source;  // "lv-certificate", "zero-delta", "user", or "none"
  bool k_delta_falsified = false;
  std::string k_delta_witness;
  std::optional<double> c_bar;  // c_beta + k_delta
  bool beta_empty_zero = true;
  bool positivity_ok = true;
  std::string positivity_method;  // "exhaustive" or "sampled"
  std::uint64_t positivity_checked = 0;
  std::string positivity_witness;
  bool ok() const { return positivity_ok && beta_empty_zero && !k_delta_falsified; }
};

struct ValidationOptions {
  std::optional<double> user_k_delta;
  std::size_t exhaustive_limit = 20;  // neighborhood sites incl. the center
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0x7ab1e;
};

ValidationReport validate_table(const PerturbationTable& table, const KernelSpec& kernel, double N,
                                const ValidationOptions& options = {});

/// Kernels and constants of the dominating biased voter model.
struct DominatingKernels {
  double c_beta = 0.0;
  double k_delta = 0.0;
  double c_bar = 0.0;
  std::optional<OffsetLaw> p_hat;  // absent when c_beta == 0
  std::optional<OffsetLaw> p_bar;  // absent when c_bar == 0
};
DominatingKernels dominating_kernels(const PerturbationTable& table, const KernelSpec& kernel, double k_delta);

}  // namespace svlv
