#include "svlv/observables.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace svlv {

Point rescale(const Site& s, int dim, double ell) {
  Point p{};
  for (int i = 0; i < dim; ++i) p[i] = static_cast<double>(s[i]) / ell;
  return p;
}

EmpiricalMeasure empirical_measure(const Configuration& config, double N, double ell) {
  EmpiricalMeasure m(config.dim(), N, ell);
  for (const auto& s : config.sites()) m.add_atom(rescale(s, config.dim(), ell));
  return m;
}

TestFn TestFn::constant(double c) {
  TestFn f;
  f.kind_ = Kind::Constant;
  f.c_ = c;
  return f;
}

TestFn TestFn::gaussian(const Point& center, double width, double amplitude) {
  if (!(width > 0.0)) throw std::invalid_argument("Gaussian test function needs width > 0");
  TestFn f;
  f.kind_ = Kind::Gaussian;
  f.center_ = center;
  f.width_ = width;
  f.amplitude_ = amplitude;
  return f;
}

TestFn TestFn::smooth_indicator(const Point& center, double radius, double ramp) {
  if (!(ramp > 0.0) || radius < 0.0) throw std::invalid_argument("smooth indicator needs ramp > 0, radius >= 0");
  TestFn f;
  f.kind_ = Kind::SmoothIndicator;
  f.center_ = center;
  f.radius_ = radius;
  f.ramp_ = ramp;
  return f;
}

TestFn TestFn::time_dependent(std::vector<double> knots, std::vector<TestFn> components) {
  if (knots.empty() || knots.size() != components.size())
    throw std::invalid_argument("time-dependent test function needs one component per knot");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1])) throw std::invalid_argument("knots must be strictly increasing");
  for (const auto& c : components)
    if (!c.is_static()) throw std::invalid_argument("components must be static");
  TestFn f;
  f.kind_ = Kind::TimeDependent;
  f.knots_ = std::move(knots);
  f.components_ = std::move(components);
  return f;
}

std::string TestFn::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Constant:
      os << "constant(" << c_ << ")";
      break;
    case Kind::Gaussian:
      os << "gaussian(w=" << width_ << ",a=" << amplitude_ << ")";
      break;
    case Kind::SmoothIndicator:
      os << "smooth_indicator(r=" << radius_ << ",ramp=" << ramp_ << ")";
      break;
    case Kind::TimeDependent:
      os << "time_dependent[";
      for (std::size_t i = 0; i < knots_.size(); ++i) os << (i ? "," : "") << knots_[i] << ":" << components_[i].describe();
      os << "]";
      break;
  }
  return os.str();
}

namespace {

double dist2(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double smoothstep(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
double smoothstep_d1(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
double smoothstep_d2(double u) { return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }

}  // namespace

double TestFn::static_value(const Point& y, int dim) const {
  switch (kind_) {
    case Kind::Constant:
      return c_;
    case Kind::Gaussian:
      return amplitude_ * std::exp(-dist2(y, center_, dim) / (2.0 * width_ * width_));
    case Kind::SmoothIndicator: {
      const double r = std::sqrt(dist2(y, center_, dim));
      const double u = std::clamp((radius_ + ramp_ - r) / ramp_, 0.0, 1.0);
      return smoothstep(u);
    }
    case Kind::TimeDependent:
      break;
  }
  throw std::logic_error("static_value on a time-dependent function");
}

Point TestFn::static_gradient(const Point& y, int dim) const {
  Point g{};
  switch (kind_) {
    case Kind::Constant:
      return g;
    case Kind::Gaussian: {
      const double v = static_value(y, dim);
      for (int i = 0; i < dim; ++i) g[i] = -(y[i] - center_[i]) / (width_ * width_) * v;
      return g;
    }
    case Kind::SmoothIndicator: {
      const double r = std::sqrt(dist2(y, center_, dim));
      const double u = (radius_ + ramp_ - r) / ramp_;
      if (u <= 0.0 || u >= 1.0 || r <= 0.0) return g;
      const double dr = -smoothstep_d1(u) / ramp_;
      for (int i = 0; i < dim; ++i) g[i] = dr * (y[i] - center_[i]) / r;
      return g;
    }
    case Kind::TimeDependent:
      break;
  }
  throw std::logic_error("static_gradient on a time-dependent function");
}

double TestFn::static_laplacian(const Point& y, int dim) const {
  switch (kind_) {
    case Kind::Constant:
      return 0.0;
    case Kind::Gaussian: {
      const double w2 = width_ * width_;
      return static_value(y, dim) * (dist2(y, center_, dim) / (w2 * w2) - dim / w2);
    }
    case Kind::SmoothIndicator: {
      const double r = std::sqrt(dist2(y, center_, dim));
      const double u = (radius_ + ramp_ - r) / ramp_;
      if (u <= 0.0 || u >= 1.0 || r <= 0.0) return 0.0;
      const double d1 = -smoothstep_d1(u) / ramp_;
      const double d2 = smoothstep_d2(u) / (ramp_ * ramp_);
      return d2 + (dim - 1) * d1 / r;
    }
    case Kind::TimeDependent:
      break;
  }
  throw std::logic_error("static_laplacian on a time-dependent function");
}

TestFn::Piece TestFn::weights_at(double t) const {
  if (is_static()) return {t, t, 0, 0, 1.0, 1.0, 0.0, 0.0};
  const std::size_t m = knots_.size() - 1;
  if (t < knots_.front()) return {t, t, 0, 0, 1.0, 1.0, 0.0, 0.0};
  if (t >= knots_.back()) return {t, t, m, m, 1.0, 1.0, 0.0, 0.0};
  const std::size_t j = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin()) - 1;
  const double lam = (t - knots_[j]) / (knots_[j + 1] - knots_[j]);
  return {t, t, j, j + 1, 1.0 - lam, 1.0 - lam, lam, lam};
}

std::vector<TestFn::Piece> TestFn::pieces(double t0, double t1) const {
  std::vector<Piece> out;
  if (!(t1 > t0)) return out;
  if (is_static()) {
    out.push_back({t0, t1, 0, 0, 1.0, 1.0, 0.0, 0.0});
    return out;
  }
  std::vector<double> cuts{t0};
  for (double k : knots_)
    if (k > t0 && k < t1) cuts.push_back(k);
  cuts.push_back(t1);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    const double mid = 0.5 * (a + b);
    Piece p = weights_at(mid);
    p.t0 = a;
    p.t1 = b;
    if (p.k0 != p.k1) {
      const std::size_t j = p.k0;
      const double span = knots_[j + 1] - knots_[j];
      const double la = (a - knots_[j]) / span, lb = (b - knots_[j]) / span;
      p.a0 = 1.0 - la;
      p.a1 = 1.0 - lb;
      p.b0 = la;
      p.b1 = lb;
    }
    out.push_back(p);
  }
  return out;
}

double TestFn::value(double t, const Point& y, int dim) const {
  if (is_static()) return static_value(y, dim);
  const Piece w = weights_at(t);
  double v = w.a0 * components_[w.k0].static_value(y, dim);
  if (w.b0 != 0.0) v += w.b0 * components_[w.k1].static_value(y, dim);
  return v;
}

double TestFn::time_derivative(double t, const Point& y, int dim) const {
  if (is_static()) return 0.0;
  const Piece w = weights_at(t);
  if (w.k0 == w.k1) return 0.0;
  const double span = knots_[w.k1] - knots_[w.k0];
  return (components_[w.k1].static_value(y, dim) - components_[w.k0].static_value(y, dim)) / span;
}

Point TestFn::gradient(double t, const Point& y, int dim) const {
  if (is_static()) return static_gradient(y, dim);
  const Piece w = weights_at(t);
  Point g = components_[w.k0].static_gradient(y, dim);
  for (int i = 0; i < dim; ++i) g[i] *= w.a0;
  if (w.b0 != 0.0) {
    const Point h = components_[w.k1].static_gradient(y, dim);
    for (int i = 0; i < dim; ++i) g[i] += w.b0 * h[i];
  }
  return g;
}

double TestFn::laplacian(double t, const Point& y, int dim) const {
  if (is_static()) return static_laplacian(y, dim);
  const Piece w = weights_at(t);
  double v = w.a0 * components_[w.k0].static_laplacian(y, dim);
  if (w.b0 != 0.0) v += w.b0 * components_[w.k1].static_laplacian(y, dim);
  return v;
}

double TestFn::sup_norm() const {
  switch (kind_) {
    case Kind::Constant:
      return std::abs(c_);
    case Kind::Gaussian:
      return std::abs(amplitude_);
    case Kind::SmoothIndicator:
      return 1.0;
    case Kind::TimeDependent: {
      double m = 0.0;
      for (const auto& c : components_) m = std::max(m, c.sup_norm());
      return m;
    }
  }
  return 0.0;
}

double TestFn::lipschitz_norm() const {
  switch (kind_) {
    case Kind::Constant:
      return std::abs(c_);
    case Kind::Gaussian:
      return std::abs(amplitude_) * (1.0 + 1.0 / (width_ * std::sqrt(std::exp(1.0))));
    case Kind::SmoothIndicator:
      return 1.0 + 15.0 / (8.0 * ramp_);
    case Kind::TimeDependent: {
      double m = 0.0;
      for (const auto& c : components_) m = std::max(m, c.lipschitz_norm());
      return m;
    }
  }
  return 0.0;
}

double lipschitz_audit(const TestFn& phi, int dim, double extent, double t_max, std::uint64_t samples,
                       std::uint64_t seed) {
  Rng rng(seed);
  double sup = 0.0, grad = 0.0;
  const double h = 1e-6 * std::max(1.0, extent);
  auto probe = [&](double t, const Point& y) {
    sup = std::max(sup, std::abs(phi.value(t, y, dim)));
    double g2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      Point a = y, b = y;
      a[i] += h;
      b[i] -= h;
      const double d = (phi.value(t, a, dim) - phi.value(t, b, dim)) / (2.0 * h);
      g2 += d * d;
    }
    grad = std::max(grad, std::sqrt(g2));
  };
  for (std::uint64_t s = 0; s < samples; ++s) {
    Point y{};
    for (int i = 0; i < dim; ++i) y[i] = (2.0 * rng.uniform() - 1.0) * extent;
    probe(rng.uniform() * t_max, y);
  }
  // Dense ray along the first axis catches radial maxima.
  for (int s = 0; s <= 20000; ++s) {
    Point y{};
    y[0] = -extent + 2.0 * extent * s / 20000.0;
    probe(0.0, y);
    probe(t_max, y);
  }
  return sup + grad;
}

double generator_apply(const KernelSpec& kernel, double N, const TestFn& phi, double t, const Site& x) {
  const int d = kernel.dim();
  const double ell = kernel.ell(static_cast<std::int64_t>(N));
  const double here = phi.value(t, rescale(x, d, ell), d);
  double s = 0.0;
  for (std::size_t k = 0; k < kernel.support().size(); ++k)
    s += kernel.probs()[k] * (phi.value(t, rescale(x + kernel.support()[k], d, ell), d) - here);
  return N * s;
}

double generator_gap(const KernelSpec& kernel, double N, const TestFn& phi, std::span<const Point> grid) {
  const int d = kernel.dim();
  const double ell = kernel.ell(static_cast<std::int64_t>(N));
  double gap = 0.0;
  for (const auto& y : grid) {
    Site x{};
    for (int i = 0; i < d; ++i) x[i] = static_cast<std::int32_t>(std::lround(y[i] * ell));
    const double lhs = generator_apply(kernel, N, phi, 0.0, x);
    const double rhs = kernel.sigma2() * phi.laplacian(0.0, rescale(x, d, ell), d) / 2.0;
    gap = std::max(gap, std::abs(lhs - rhs));
  }
  return gap;
}

// ---------------------------------------------------------------------------

DecompositionObserver::DecompositionObserver(const SpinSystem& system, double N, double ell, TestFn phi,
                                             std::vector<double> grid, bool check_every_event)
    : system_(system),
      eval_(system_),
      N_(N),
      ell_(ell),
      phi_(std::move(phi)),
      grid_(std::move(grid)),
      every_event_(check_every_event),
      lattice_(system.kernel.dim()),
      K_(phi_.num_components()) {
  if (system_.domain) throw std::invalid_argument("decomposition needs an unrestricted system");
  std::sort(grid_.begin(), grid_.end());
}

double DecompositionObserver::psi(std::size_t k, SiteKey x) const {
  return phi_.component(k).value(0.0, rescale(lattice_.decode(x), lattice_.dim(), ell_), lattice_.dim());
}

void DecompositionObserver::apply_site(SiteKey x, const Configuration& config, double sign) {
  const auto p = eval_.parts(config, x);
  const double occ = p.occupied ? 1.0 : 0.0;
  const double rate = eval_.rate(config, x);
  const double f0 = p.occupied ? p.disagree : 1.0 - p.disagree;
  const double cstar = p.occupied ? p.delta : p.beta;
  if (p.beta == 0.0 && p.delta == 0.0 && rate == 0.0 && !p.occupied) return;
  const double invN = 1.0 / N_;
  std::vector<double> ps(K_);
  for (std::size_t k = 0; k < K_; ++k) ps[k] = psi(k, x);
  for (std::size_t k = 0; k < K_; ++k) {
    B_[k] += sign * invN * ps[k] * p.beta;
    D3s_[k] += sign * invN * ps[k] * occ * (p.beta + p.delta);
    C_[k] += sign * invN * ps[k] * rate * (1.0 - 2.0 * occ);
    for (std::size_t j = 0; j < 2 && k + j < K_; ++j) {
      const double pp = ps[k] * ps[k + j];
      Q1_[2 * k + j] += sign * invN * invN * pp * N_ * p.disagree;
      Q2_[2 * k + j] += sign * invN * invN * pp * cstar;
      F0_[2 * k + j] += sign * invN * pp * occ * f0;
    }
  }
}

double DecompositionObserver::x_phi_scratch(double t, const Configuration& config) const {
  const int d = lattice_.dim();
  double s = 0.0;
  for (auto k : config.sorted_keys()) s += phi_.value(t, rescale(lattice_.decode(k), d, ell_), d);
  return s / N_;
}

void DecompositionObserver::on_start(double t, const Configuration& config) {
  t_ = t;
  X_.assign(K_, 0.0);
  XA_.assign(K_, 0.0);
  B_.assign(K_, 0.0);
  D3s_.assign(K_, 0.0);
  C_.assign(K_, 0.0);
  Q1_.assign(2 * K_, 0.0);
  Q2_.assign(2 * K_, 0.0);
  F0_.assign(2 * K_, 0.0);
  D1_ = D2_ = D3_ = C_int_ = J_ = QV1_ = QV2_ = LB_ = 0.0;
  report_ = {};
  grid_i_ = 0;
  while (grid_i_ < grid_.size() && grid_[grid_i_] < t) ++grid_i_;
  // Every site with a nonzero local term is occupied or sees an occupied
  // site through a dependence offset.
  absl::flat_hash_map<SiteKey, bool> seen;
  for (auto k : config.keys()) {
    seen.emplace(k, true);
    for (auto dd : eval_.dependence_deltas()) seen.emplace(Lattice::shift(k, -dd), true);
  }
  std::vector<SiteKey> sites;
  for (const auto& [k, v] : seen) sites.push_back(k);
  std::sort(sites.begin(), sites.end());
  for (auto k : sites) apply_site(k, config, 1.0);
  for (auto k : config.sorted_keys())
    for (std::size_t c = 0; c < K_; ++c) {
      X_[c] += psi(c, k) / N_;
      XA_[c] += generator_apply(system_.kernel, N_, phi_.component(c), 0.0, lattice_.decode(k)) / N_;
    }
  x0_ = x_phi_scratch(t, config);
  while (grid_i_ < grid_.size() && grid_[grid_i_] <= t) {
    emit_row(grid_[grid_i_], config);
    ++grid_i_;
  }
}

void DecompositionObserver::integrate_to(double t) {
  for (const auto& p : phi_.pieces(t_, t)) {
    const double dt = p.t1 - p.t0;
    const double Ia = dt * (p.a0 + p.a1) / 2.0, Ib = dt * (p.b0 + p.b1) / 2.0;
    const double Iaa = dt * (p.a0 * p.a0 + p.a0 * p.a1 + p.a1 * p.a1) / 3.0;
    const double Ibb = dt * (p.b0 * p.b0 + p.b0 * p.b1 + p.b1 * p.b1) / 3.0;
    const double Iab = dt * (2.0 * p.a0 * p.b0 + p.a0 * p.b1 + p.a1 * p.b0 + 2.0 * p.a1 * p.b1) / 6.0;
    const std::size_t k0 = p.k0, k1 = p.k1;
    D1_ += Ia * XA_[k0] + (p.a1 - p.a0) * X_[k0];
    D2_ += Ia * B_[k0];
    D3_ += Ia * D3s_[k0];
    C_int_ += Ia * C_[k0];
    QV1_ += Iaa * Q1_[2 * k0];
    QV2_ += Iaa * Q2_[2 * k0];
    LB_ += 2.0 * Iaa * F0_[2 * k0];
    if (k1 != k0) {
      D1_ += Ib * XA_[k1] + (p.b1 - p.b0) * X_[k1];
      D2_ += Ib * B_[k1];
      D3_ += Ib * D3s_[k1];
      C_int_ += Ib * C_[k1];
      QV1_ += 2.0 * Iab * Q1_[2 * k0 + 1] + Ibb * Q1_[2 * k1];
      QV2_ += 2.0 * Iab * Q2_[2 * k0 + 1] + Ibb * Q2_[2 * k1];
      LB_ += 2.0 * (2.0 * Iab * F0_[2 * k0 + 1] + Ibb * F0_[2 * k1]);
    }
  }
  t_ = std::max(t_, t);
}

double DecompositionObserver::row_residual(double t, double x_now, double scale) const {
  (void)t;
  const double D = D1_ + D2_ - D3_;
  const double M = J_ - C_int_;
  return std::abs(x_now - x0_ - D - M) / std::max(scale, 1e-300);
}

void DecompositionObserver::emit_row(double t, const Configuration& config) {
  DecompositionRow r;
  r.t = t;
  r.X_phi = x_phi_scratch(t, config);
  r.D1 = D1_;
  r.D2 = D2_;
  r.D3 = D3_;
  r.M = J_ - C_int_;
  r.QV1 = QV1_;
  r.QV2 = QV2_;
  r.lemma_b = LB_;
  r.residual = r.X_phi - x0_ - (D1_ + D2_ - D3_) - r.M;
  const double scale = std::abs(r.X_phi) + std::abs(x0_) + std::abs(D1_) + std::abs(D2_) + std::abs(D3_) +
                       std::abs(J_) + std::abs(C_int_);
  report_.max_relative_residual = std::max(report_.max_relative_residual, row_residual(t, r.X_phi, scale));
  ++report_.checked_times;
  report_.rows.push_back(r);
}

void DecompositionObserver::check_residual(double t, const Configuration& config) {
  const double x = x_phi_scratch(t, config);
  const double scale = std::abs(x) + std::abs(x0_) + std::abs(D1_) + std::abs(D2_) + std::abs(D3_) + std::abs(J_) +
                       std::abs(C_int_);
  report_.max_relative_residual = std::max(report_.max_relative_residual, row_residual(t, x, scale));
  ++report_.checked_times;
}

void DecompositionObserver::before_flip(double t, SiteKey z, const Configuration& config) {
  while (grid_i_ < grid_.size() && grid_[grid_i_] < t) {
    integrate_to(grid_[grid_i_]);
    emit_row(grid_[grid_i_], config);
    ++grid_i_;
  }
  integrate_to(t);
  const auto w = phi_.weights_at(t);
  const bool was = config.contains(z);
  double phz = w.a0 * psi(w.k0, z);
  if (w.b0 != 0.0) phz += w.b0 * psi(w.k1, z);
  J_ += (was ? -1.0 : 1.0) * phz / N_;
  apply_site(z, config, -1.0);
  for (auto dd : eval_.dependence_deltas()) apply_site(Lattice::shift(z, -dd), config, -1.0);
  if (was)
    for (std::size_t c = 0; c < K_; ++c) {
      X_[c] -= psi(c, z) / N_;
      XA_[c] -= generator_apply(system_.kernel, N_, phi_.component(c), 0.0, lattice_.decode(z)) / N_;
    }
}

void DecompositionObserver::after_flip(double t, SiteKey z, const Configuration& config) {
  apply_site(z, config, 1.0);
  for (auto dd : eval_.dependence_deltas()) apply_site(Lattice::shift(z, -dd), config, 1.0);
  if (config.contains(z))
    for (std::size_t c = 0; c < K_; ++c) {
      X_[c] += psi(c, z) / N_;
      XA_[c] += generator_apply(system_.kernel, N_, phi_.component(c), 0.0, lattice_.decode(z)) / N_;
    }
  if (every_event_) check_residual(t, config);
}

void DecompositionObserver::on_finish(double t, const Configuration& config) {
  while (grid_i_ < grid_.size() && grid_[grid_i_] <= t) {
    integrate_to(grid_[grid_i_]);
    emit_row(grid_[grid_i_], config);
    ++grid_i_;
  }
  integrate_to(t);
}

namespace {

void replay(const EventLog& log, double t_end, std::span<Observer* const> obs) {
  if (!log.complete) throw std::invalid_argument("truncated event log");
  Configuration c = log.initial;
  for (auto* o : obs) o->on_start(log.start, c);
  for (const auto& e : log.events) {
    if (e.time > t_end) break;
    for (auto* o : obs) o->before_flip(e.time, e.site, c);
    const bool now = c.flip(e.site);
    if (now != e.new_value) throw std::invalid_argument("event log inconsistent with its initial configuration");
    for (auto* o : obs) o->after_flip(e.time, e.site, c);
  }
  for (auto* o : obs) o->on_finish(t_end, c);
}

}  // namespace

DecompositionReport decompose(const EventLog& log, const SpinSystem& system, double N, double ell, const TestFn& phi,
                              std::vector<double> grid, bool check_every_event) {
  DecompositionObserver obs(system, N, ell, phi, std::move(grid), check_every_event);
  Observer* o[1] = {&obs};
  replay(log, log.horizon, o);
  return obs.report();
}

// ---------------------------------------------------------------------------

PerturbationStatistic::PerturbationStatistic(OffsetSet A, int dim, double N, double ell, TestFn phi, double sigma)
    : A_(canonical_set(std::move(A))), lattice_(dim), N_(N), ell_(ell), phi_(std::move(phi)), sigma_(sigma) {
  for (const auto& a : A_) a_delta_.push_back(lattice_.delta(a));
}

double PerturbationStatistic::psi(std::size_t k, SiteKey x) const {
  return phi_.component(k).value(0.0, rescale(lattice_.decode(x), lattice_.dim(), ell_), lattice_.dim());
}

void PerturbationStatistic::apply(SiteKey z, const Configuration& config, double sign) {
  const std::size_t K = phi_.num_components();
  if (config.contains(z))
    for (std::size_t k = 0; k < K; ++k) X_[k] += sign * psi(k, z) / N_;
  for (auto da : a_delta_) {
    const SiteKey x = Lattice::shift(z, -da);
    bool all = true;
    for (auto db : a_delta_)
      if (!config.contains(Lattice::shift(x, db))) {
        all = false;
        break;
      }
    if (all)
      for (std::size_t k = 0; k < K; ++k) S_[k] += sign * psi(k, x) / N_;
  }
}

void PerturbationStatistic::on_start(double t, const Configuration& config) {
  t_ = t;
  integral_ = 0.0;
  const std::size_t K = phi_.num_components();
  S_.assign(K, 0.0);
  X_.assign(K, 0.0);
  if (A_.empty()) return;
  for (auto k : config.sorted_keys())
    for (std::size_t c = 0; c < K; ++c) X_[c] += psi(c, k) / N_;
  // chi(A, x) = 1 requires x + a_0 occupied.
  for (auto y : config.sorted_keys()) {
    const SiteKey x = Lattice::shift(y, -a_delta_[0]);
    bool all = true;
    for (auto db : a_delta_)
      if (!config.contains(Lattice::shift(x, db))) {
        all = false;
        break;
      }
    if (all)
      for (std::size_t c = 0; c < K; ++c) S_[c] += psi(c, x) / N_;
  }
}

void PerturbationStatistic::integrate_to(double t) {
  if (A_.empty()) {
    t_ = t;
    return;
  }
  for (const auto& p : phi_.pieces(t_, t)) {
    const double dt = p.t1 - p.t0;
    integral_ += dt * (p.a0 + p.a1) / 2.0 * (S_[p.k0] - sigma_ * X_[p.k0]);
    if (p.k1 != p.k0) integral_ += dt * (p.b0 + p.b1) / 2.0 * (S_[p.k1] - sigma_ * X_[p.k1]);
  }
  t_ = std::max(t_, t);
}

void PerturbationStatistic::before_flip(double t, SiteKey z, const Configuration& config) {
  integrate_to(t);
  if (!A_.empty()) apply(z, config, -1.0);
}

void PerturbationStatistic::after_flip(double, SiteKey z, const Configuration& config) {
  if (!A_.empty()) apply(z, config, 1.0);
}

void PerturbationStatistic::on_finish(double t, const Configuration&) { integrate_to(t); }

double perturbation_statistic(const EventLog& log, const OffsetSet& A, const TestFn& phi, double N, double ell,
                              double sigma, double t) {
  PerturbationStatistic ps(A, log.initial.dim(), N, ell, phi, sigma);
  Observer* o[1] = {&ps};
  replay(log, t, o);
  return ps.value();
}

}  // namespace svlv
