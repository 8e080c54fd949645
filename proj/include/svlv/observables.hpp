#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svlv/configuration.hpp"
#include "svlv/kernel.hpp"
#include "svlv/simulator.hpp"
#include "svlv/spin_system.hpp"

namespace svlv {

using Point = std::array<double, kMaxDim>;

/// Rescaled position x / ell_N.
Point rescale(const Site& s, int dim, double ell);

/// Atoms of mass 1/N at occupied sites divided by ell_N.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(int dim, double N, double ell) : dim_(dim), N_(N), ell_(ell) {}
  int dim() const { return dim_; }
  double atom_mass() const { return 1.0 / N_; }
  double ell() const { return ell_; }
  std::span<const Point> atoms() const { return atoms_; }
  void add_atom(const Point& p) { atoms_.push_back(p); }
  double total_mass() const { return static_cast<double>(atoms_.size()) / N_; }

 private:
  int dim_;
  double N_;
  double ell_;
  std::vector<Point> atoms_;
};

EmpiricalMeasure empirical_measure(const Configuration& config, double N, double ell);

/// Test functions with analytic gradient and Laplacian.
class TestFn {
 public:
  enum class Kind { Constant, Gaussian, SmoothIndicator, TimeDependent };

  static TestFn constant(double c);
  /// amplitude * exp(-|y - center|^2 / (2 width^2)).
  static TestFn gaussian(const Point& center, double width, double amplitude = 1.0);
  /// 1 inside radius, 0 beyond radius + ramp, quintic smoothstep between.
  static TestFn smooth_indicator(const Point& center, double radius, double ramp);
  /// Piecewise linear in t between static components at the knots,
  /// constant outside [knots.front(), knots.back()].
  static TestFn time_dependent(std::vector<double> knots, std::vector<TestFn> components);

  Kind kind() const { return kind_; }
  bool is_static() const { return kind_ != Kind::TimeDependent; }
  std::string describe() const;

  double constant_value() const { return c_; }
  const Point& center() const { return center_; }
  double width() const { return width_; }
  double amplitude() const { return amplitude_; }
  double radius() const { return radius_; }
  double ramp() const { return ramp_; }
  const std::vector<double>& knots() const { return knots_; }

  double value(double t, const Point& y, int dim) const;
  /// Partial derivative in t (right derivative at knots).
  double time_derivative(double t, const Point& y, int dim) const;
  Point gradient(double t, const Point& y, int dim) const;
  double laplacian(double t, const Point& y, int dim) const;

  /// Upper bounds over all t.
  double sup_norm() const;
  double lipschitz_norm() const;  // sup |phi| + sup |grad phi|

  /// Static components and linear weights on [t0, t1] pieces.
  std::size_t num_components() const { return is_static() ? 1 : components_.size(); }
  const TestFn& component(std::size_t k) const { return is_static() ? *this : components_[k]; }
  struct Piece {
    double t0, t1;
    std::size_t k0, k1;
    double a0, a1;  // weight of component k0 at t0 and t1
    double b0, b1;  // weight of component k1 (0 when unused)
  };
  /// Splits [t0, t1] at knots; on each piece phi_t = a(t) psi_k0 + b(t) psi_k1
  /// with a, b linear.
  std::vector<Piece> pieces(double t0, double t1) const;
  /// (k0, a, k1, b) at a single time.
  Piece weights_at(double t) const;

 private:
  double static_value(const Point& y, int dim) const;
  Point static_gradient(const Point& y, int dim) const;
  double static_laplacian(const Point& y, int dim) const;

  Kind kind_ = Kind::Constant;
  double c_ = 0.0;
  Point center_{};
  double width_ = 1.0;
  double amplitude_ = 1.0;
  double radius_ = 0.0;
  double ramp_ = 1.0;
  std::vector<double> knots_;
  std::vector<TestFn> components_;
};

/// Finite-difference estimate of sup |phi| + sup |grad phi| over random
/// points in [-extent, extent]^d and times in [0, t_max].
double lipschitz_audit(const TestFn& phi, int dim, double extent, double t_max, std::uint64_t samples,
                       std::uint64_t seed);

/// A_N psi(x) = N sum_e p(e) (psi((x + e)/ell) - psi(x/ell)).
double generator_apply(const KernelSpec& kernel, double N, const TestFn& phi, double t, const Site& x);

/// max over grid points of |A_N phi - sigma^2 Delta phi / 2| at the
/// nearest lattice site.
double generator_gap(const KernelSpec& kernel, double N, const TestFn& phi, std::span<const Point> grid);

struct DecompositionRow {
  double t = 0.0;
  double X_phi = 0.0;
  double D1 = 0.0, D2 = 0.0, D3 = 0.0;
  double M = 0.0;
  double QV1 = 0.0, QV2 = 0.0;
  double residual = 0.0;
  double lemma_b = 0.0;  // 2 int X(phi^2 f0) ds
};

struct DecompositionReport {
  std::vector<DecompositionRow> rows;  // one per grid time
  double max_relative_residual = 0.0;  // over grid and (optionally) event times
  std::uint64_t checked_times = 0;
};

/// Pathwise decomposition X_t(phi_t) = X_0(phi_0) + D1 + D2 - D3 + M with
/// M = (jumps of X(phi)) - (compensator computed from the flip rates).
/// Integrals are exact over inter-event intervals. Attach to run() or feed
/// a recorded event log through decompose().
class DecompositionObserver final : public Observer {
 public:
  DecompositionObserver(const SpinSystem& system, double N, double ell, TestFn phi, std::vector<double> grid,
                        bool check_every_event = false);

  void on_start(double t, const Configuration& config) override;
  void before_flip(double t, SiteKey x, const Configuration& config) override;
  void after_flip(double t, SiteKey x, const Configuration& config) override;
  void on_finish(double t, const Configuration& config) override;

  const DecompositionReport& report() const { return report_; }

 private:
  void integrate_to(double t);
  void apply_site(SiteKey x, const Configuration& config, double sign);
  double x_phi_scratch(double t, const Configuration& config) const;
  void emit_row(double t, const Configuration& config);
  void check_residual(double t, const Configuration& config);
  double psi(std::size_t k, SiteKey x) const;
  double row_residual(double t, double x_now, double scale) const;

  SpinSystem system_;
  LocalRateEvaluator eval_;
  double N_, ell_;
  TestFn phi_;
  std::vector<double> grid_;
  bool every_event_;
  Lattice lattice_;
  std::size_t K_;
  std::size_t grid_i_ = 0;
  double t_ = 0.0;
  double x0_ = 0.0;
  // per component sums (index k) and adjacent pair sums (index 2k + j, j in {0, 1} for l = k + j)
  std::vector<double> X_, XA_, B_, D3s_, C_;
  std::vector<double> Q1_, Q2_, F0_;
  double D1_ = 0.0, D2_ = 0.0, D3_ = 0.0, C_int_ = 0.0, J_ = 0.0, QV1_ = 0.0, QV2_ = 0.0, LB_ = 0.0;
  DecompositionReport report_;
};

/// Replays a complete event log through a DecompositionObserver.
DecompositionReport decompose(const EventLog& log, const SpinSystem& system, double N, double ell, const TestFn& phi,
                              std::vector<double> grid, bool check_every_event = false);

/// Accumulates int_0^t Delta(A, phi_s, xi_s) ds with
/// Delta = (1/N) sum_x phi(x) chi(A, x, xi) - sigma X(phi).
class PerturbationStatistic final : public Observer {
 public:
  PerturbationStatistic(OffsetSet A, int dim, double N, double ell, TestFn phi, double sigma);
  void on_start(double t, const Configuration& config) override;
  void before_flip(double t, SiteKey x, const Configuration& config) override;
  void after_flip(double t, SiteKey x, const Configuration& config) override;
  void on_finish(double t, const Configuration& config) override;
  double value() const { return integral_; }

 private:
  void integrate_to(double t);
  void apply(SiteKey z, const Configuration& config, double sign);
  double psi(std::size_t k, SiteKey x) const;

  OffsetSet A_;
  std::vector<std::int64_t> a_delta_;
  Lattice lattice_;
  double N_, ell_;
  TestFn phi_;
  double sigma_;
  std::vector<double> S_, X_;
  double t_ = 0.0;
  double integral_ = 0.0;
};

double perturbation_statistic(const EventLog& log, const OffsetSet& A, const TestFn& phi, double N, double ell,
                              double sigma, double t);

}  // namespace svlv
