#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "svlv/configuration.hpp"
#include "svlv/lattice.hpp"
#include "svlv/rng.hpp"

namespace svlv {

class KernelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exact probability p = num/den for kernels built from uniform weights.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

Rational operator+(const Rational& a, const Rational& b);

/// Walker alias table for O(1) draws from a finite discrete law.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> weights);
  std::size_t sample(Rng& rng) const;
  std::size_t size() const { return accept_.size(); }

 private:
  std::vector<double> accept_;
  std::vector<std::uint32_t> alias_;
};

/// A probability law on nonzero offsets of Z^d. Symmetry is not required;
/// competition and bias kernels use this type directly.
class OffsetLaw {
 public:
  OffsetLaw() = default;
  /// Entries with zero probability are dropped. Throws KernelError on
  /// negative weights, mass at the origin, or sum outside 1 +- 1e-12.
  OffsetLaw(int dim, std::vector<std::pair<Offset, double>> table);

  int dim() const { return dim_; }
  std::span<const Offset> offsets() const { return offsets_; }
  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return offsets_.size(); }
  bool empty() const { return offsets_.empty(); }
  double prob(const Offset& o) const;

  std::size_t sample_index(Rng& rng) const { return alias_.sample(rng); }
  const Offset& sample(Rng& rng) const { return offsets_[alias_.sample(rng)]; }

  /// Sum_x x_i x_j p(x).
  double second_moment(int i, int j) const;

 private:
  int dim_ = 0;
  std::vector<Offset> offsets_;  // lexicographic order
  std::vector<double> probs_;
  std::map<Offset, double> lookup_;
  AliasTable alias_;
};

enum class KernelVariant { LongRange, Fixed };

/// Symmetric, isotropic step distribution p on Z^d (integer offsets).
///
/// For the long-range variant the offsets are the integer points of
/// [-M, M]^d minus the origin; the rescaled step is offset / M and the
/// lattice spacing is 1/ell_N with ell_N = M sqrt(N).
class KernelSpec {
 public:
  int dim() const { return law_.dim(); }
  KernelVariant variant() const { return variant_; }
  /// M_N for long-range kernels, 1 for fixed kernels.
  std::int64_t range() const { return range_; }
  const OffsetLaw& law() const { return law_; }
  std::span<const Offset> support() const { return law_.offsets(); }
  std::span<const double> probs() const { return law_.probs(); }
  double prob(const Offset& o) const { return law_.prob(o); }
  /// Exact probability when the kernel is uniform on its support.
  std::optional<Rational> exact_prob(const Offset& o) const;
  bool is_uniform() const { return uniform_den_ > 0; }
  std::int64_t uniform_denominator() const { return uniform_den_; }

  /// Per-coordinate second moment of the rescaled step W_N (offset / M).
  double sigma2() const { return sigma2_; }
  /// ell_N = M_N sqrt(N).
  double ell(std::int64_t N) const;
  /// Largest absolute offset coordinate.
  std::int64_t max_extent() const { return max_extent_; }
  /// Human readable identifier, e.g. "nn3" or "lr2M8".
  const std::string& id() const { return id_; }

  const Offset& sample(Rng& rng) const { return law_.sample(rng); }

 private:
  friend KernelSpec build_long_range_kernel(int, std::int64_t);
  friend KernelSpec build_fixed_kernel(int, std::vector<std::pair<Offset, double>>);
  friend KernelSpec build_fixed_kernel_exact(int, std::vector<std::pair<Offset, Rational>>);
  friend KernelSpec nearest_neighbor_kernel(int);
  void finish();

  OffsetLaw law_;
  KernelVariant variant_ = KernelVariant::Fixed;
  std::int64_t range_ = 1;
  std::int64_t uniform_den_ = 0;
  double sigma2_ = 0.0;
  std::int64_t max_extent_ = 0;
  std::string id_;
};

/// Uniform law on ([-M, M]^d cap Z^d) minus the origin.
KernelSpec build_long_range_kernel(int dim, std::int64_t range);
/// User table; must be symmetric, zero at the origin, normalized within
/// 1e-12, with isotropic covariance. Finite support only.
KernelSpec build_fixed_kernel(int dim, std::vector<std::pair<Offset, double>> table);
/// Same checks as build_fixed_kernel, with exact rational weights.
KernelSpec build_fixed_kernel_exact(int dim, std::vector<std::pair<Offset, Rational>> table);
/// p(+-e_i) = 1/(2d).
KernelSpec nearest_neighbor_kernel(int dim);

/// Scaling for one member of the N-indexed family (N' is fixed equal to N).
struct ScalingParams {
  std::int64_t N = 1;
  std::int64_t N_prime = 1;
  double ell = 1.0;
};
ScalingParams make_scaling(const KernelSpec& kernel, std::int64_t N);

/// f_i(x, xi) = sum_y p(y - x) 1{xi(y) = i}.
double local_density(const Configuration& config, const OffsetLaw& law, const Site& site, int type);
inline double local_density(const Configuration& config, const KernelSpec& kernel, const Site& site, int type) {
  return local_density(config, kernel.law(), site, type);
}
/// Exact version for uniform kernels; nullopt otherwise.
std::optional<Rational> local_density_exact(const Configuration& config, const KernelSpec& kernel, const Site& site,
                                            int type);

}  // namespace svlv
