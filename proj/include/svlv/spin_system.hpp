#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "svlv/configuration.hpp"
#include "svlv/kernel.hpp"
#include "svlv/perturbation.hpp"

namespace svlv {

/// Rates c(x, xi) = speed * c^v(x, xi) + c^*(x, xi) in table form. An
/// optional box restricts flips to its sites (absorbing complement).
struct SpinSystem {
  KernelSpec kernel;
  double speed = 1.0;
  PerturbationTable table{1};
  std::optional<Box> domain;
};

/// Product-form rates, used by the thinning engine:
///   0 -> 1 at  v f1 + theta0 f1 f1^b + b fbar1
///   1 -> 0 at  v f0 + theta1 f0 f0^d
/// with f computed from p, p^b, p^d and pbar. Equivalent to a SpinSystem
/// with speed v and the two-kernel table plus beta({a}) += b pbar(a).
struct ProductForm {
  double speed = 1.0;
  double theta0 = 0.0;
  double theta1 = 0.0;
  double bias = 0.0;
  std::optional<OffsetLaw> birth_law;  // defaults to the dispersal kernel
  std::optional<OffsetLaw> death_law;
  std::optional<OffsetLaw> bias_law;
};

struct Model {
  SpinSystem system;
  std::optional<ProductForm> product;
};

Model voter_model(const KernelSpec& kernel, double N);
Model lv_model(const KernelSpec& kernel, double N, double theta0, double theta1);
Model lv_two_kernel_model(const KernelSpec& p, const OffsetLaw& p_b, const OffsetLaw& p_d, double N, double theta0,
                          double theta1);
/// 0 -> 1 at v f1 + b fbar1, 1 -> 0 at v f0.
Model biased_voter_model(const KernelSpec& p, const std::optional<OffsetLaw>& p_bar, double v, double b);
Model table_model(const KernelSpec& kernel, double N, PerturbationTable table);

/// Table form of a product-form model.
PerturbationTable product_table(const KernelSpec& kernel, const ProductForm& pf);

/// Flip-rate evaluation on packed keys. Summation order matches flip_rate
/// exactly (voter part in kernel support order, then table entries in
/// table order) so both give bit-identical values.
class LocalRateEvaluator {
 public:
  explicit LocalRateEvaluator(const SpinSystem& system);

  double rate(const Configuration& config, SiteKey x) const;

  struct Parts {
    bool occupied = false;
    double disagree = 0.0;  // c^v(x, xi)
    double beta = 0.0;      // sum_A beta(A) chi(A, x, xi)
    double delta = 0.0;     // sum_A delta(A) chi(A, x, xi)
  };
  Parts parts(const Configuration& config, SiteKey x) const;

  /// Key deltas of every offset o in kernel support u table offsets. A flip
  /// at z can only change rates at z and at z - o.
  const std::vector<std::int64_t>& dependence_deltas() const { return dep_delta_; }
  const std::vector<Offset>& dependence_offsets() const { return dep_; }

 private:
  std::uint64_t mask(const Configuration& config, SiteKey x) const;
  double finish(double rate, double scale, SiteKey x, const Configuration& config) const;

  double speed_ = 1.0;
  Lattice lattice_;
  std::vector<Offset> dep_;
  std::vector<std::int64_t> dep_delta_;
  std::vector<std::uint32_t> kernel_dep_;  // dep index of each kernel support point
  std::vector<double> kernel_prob_;
  // Table entries in table order.
  std::vector<std::uint64_t> entry_mask_;
  std::vector<std::vector<std::uint32_t>> entry_ids_;
  std::vector<double> beta_, delta_;
  double scale0_ = 0.0, scale1_ = 0.0;
  bool use_mask_ = true;
};

}  // namespace svlv
