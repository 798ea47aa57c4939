#pragma once

// Transition density, Levy density and ball harmonic measure of the rotation
// invariant alpha-stable process with E exp(i xi X_t) = exp(-t |xi|^alpha).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "stabletrace/core.hpp"
#include "stabletrace/quadrature.hpp"

namespace stabletrace {

/// Surface area of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
inline double unit_sphere_area(int d) {
  if (d < 1) throw std::domain_error("unit_sphere_area: d must be >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Volume of the unit ball in R^d.
inline double unit_ball_volume(int d) { return unit_sphere_area(d) / d; }

/// C1 = p_1(0) = omega_d Gamma(d/alpha) / ((2 pi)^d alpha).
inline double c1_constant(const StableParams& p) {
  p.validate();
  return unit_sphere_area(p.d) * std::tgamma(p.d / p.alpha) /
         (std::pow(2.0 * std::numbers::pi, p.d) * p.alpha);
}

/// A_{d,gamma} = Gamma((d - gamma)/2) / (2^gamma pi^{d/2} |Gamma(gamma/2)|).
/// std::tgamma handles negative non-integer arguments through reflection.
inline double riesz_constant(int d, double gamma) {
  return std::tgamma(0.5 * (d - gamma)) /
         (std::pow(2.0, gamma) * std::pow(std::numbers::pi, 0.5 * d) * std::abs(std::tgamma(0.5 * gamma)));
}

/// Levy density nu(x) = A_{d,-alpha} |x|^{-d-alpha}.
inline double levy_density(double dist, const StableParams& p) {
  p.validate();
  p.require_jumps("levy_density");
  if (!(dist > 0.0)) throw std::domain_error("levy_density: singular at dist = 0");
  return riesz_constant(p.d, -p.alpha) * std::pow(dist, -p.d - p.alpha);
}

/// Levy mass of {|z| > r}: A_{d,-alpha} omega_d r^{-alpha} / alpha.
inline double levy_tail_mass(double r, const StableParams& p) {
  p.require_jumps("levy_tail_mass");
  return riesz_constant(p.d, -p.alpha) * unit_sphere_area(p.d) * std::pow(r, -p.alpha) / p.alpha;
}

/// C_alpha^d = Gamma(d/2) pi^{-d/2-1} sin(pi alpha / 2).
inline double harmonic_measure_constant(const StableParams& p) {
  p.require_jumps("harmonic_measure_constant");
  return std::tgamma(0.5 * p.d) * std::pow(std::numbers::pi, -0.5 * p.d - 1.0) *
         std::sin(0.5 * std::numbers::pi * p.alpha);
}

/// Density of the exit position from B(center, r) started at x, evaluated at y.
inline double ball_harmonic_measure_density(const Vec& x, const Vec& center, double r, const Vec& y,
                                            const StableParams& p) {
  p.validate();
  p.require_jumps("ball_harmonic_measure_density");
  if (!(r > 0.0)) throw std::domain_error("ball_harmonic_measure_density: radius must be positive");
  const double ax2 = (x - center).norm2();
  const double ay2 = (y - center).norm2();
  if (!(ax2 < r * r)) throw std::domain_error("ball_harmonic_measure_density: x must lie inside the ball");
  if (!(ay2 > r * r)) throw std::domain_error("ball_harmonic_measure_density: y must lie outside the closed ball");
  return harmonic_measure_constant(p) * std::pow((r * r - ax2) / (ay2 - r * r), 0.5 * p.alpha) *
         std::pow((x - y).norm(), -p.d);
}

namespace kernel_detail {

enum class Method { closed_form, small_series, large_series, quadrature };

struct Evaluation {
  double value = 0.0;
  double error = std::numeric_limits<double>::infinity();
  Method method = Method::quadrature;
  int terms = 0;
};

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

// Power series in rho^2 of p_1(rho):
//   b_m = (-1)^m 2^{1-d/2} (2 pi)^{-d/2} Gamma((d+2m)/alpha) / (alpha m! Gamma(m + d/2)) 4^{-m}.
// Convergent for alpha > 1 (and alpha = 1, rho < 1); asymptotic for alpha < 1.
inline double small_log_coeff(int m, const StableParams& p) {
  const double d = p.d;
  return (1.0 - 0.5 * d) * std::numbers::ln2 - 0.5 * d * std::log(2.0 * std::numbers::pi) +
         std::lgamma((d + 2.0 * m) / p.alpha) - std::log(p.alpha) - std::lgamma(m + 1.0) -
         std::lgamma(m + 0.5 * d) - 2.0 * m * std::numbers::ln2;
}

// Expansion in rho^{-alpha} of the tail:
//   a_k = (-1)^{k+1}/k! 2^{k alpha} pi^{-d/2-1} Gamma((k alpha + d)/2) Gamma(1 + k alpha/2) sin(pi k alpha/2).
// Convergent for alpha < 1 (and alpha = 1, rho > 1); asymptotic for alpha > 1.
// Returns log of the coefficient magnitude without the sine factor.
inline double large_log_envelope(int k, const StableParams& p) {
  const double ka = k * p.alpha;
  return ka * std::numbers::ln2 - (0.5 * p.d + 1.0) * std::log(std::numbers::pi) + std::lgamma(0.5 * (ka + p.d)) +
         std::lgamma(1.0 + 0.5 * ka) - std::lgamma(k + 1.0);
}

inline double large_sign_sine(int k, const StableParams& p) {
  const double s = std::sin(0.5 * std::numbers::pi * k * p.alpha);
  return ((k % 2 == 1) ? 1.0 : -1.0) * s;
}

inline Evaluation small_series(double rho, const StableParams& p, int max_terms = 400) {
  Evaluation ev;
  ev.method = Method::small_series;
  if (rho == 0.0) {
    ev.value = std::exp(small_log_coeff(0, p));
    ev.error = 2.0 * kEps * ev.value;
    ev.terms = 1;
    return ev;
  }
  const double lr2 = 2.0 * std::log(rho);
  CompensatedSum sum;
  double abs_sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  double tail = std::numeric_limits<double>::infinity();
  for (int m = 0; m < max_terms; ++m) {
    const double lt = small_log_coeff(m, p) + m * lr2;
    if (lt > 700.0) break;
    const double term = std::exp(lt);
    if (p.alpha < 1.0 && m > 2 && term > prev) {  // asymptotic: stop at the smallest term
      tail = prev;
      break;
    }
    sum.add((m % 2 == 0) ? term : -term);
    abs_sum += term;
    ev.terms = m + 1;
    prev = term;
    tail = term;
    if (term < 1e-18 * std::abs(sum.value()) && m > 2) break;
  }
  ev.value = sum.value();
  ev.error = tail + 4.0 * kEps * abs_sum;
  return ev;
}

inline Evaluation large_series(double rho, const StableParams& p, int max_terms = 400) {
  Evaluation ev;
  ev.method = Method::large_series;
  if (!(rho > 0.0) || p.is_gaussian()) return ev;
  const double lr = std::log(rho);
  CompensatedSum sum;
  double abs_sum = 0.0;
  double prev_env = std::numeric_limits<double>::infinity();
  double tail = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= max_terms; ++k) {
    const double lenv = large_log_envelope(k, p) - (k * p.alpha + p.d) * lr;
    if (lenv > 700.0) break;
    const double env = std::exp(lenv);
    if (p.alpha > 1.0 && k > 3 && env > prev_env) {
      tail = prev_env;
      break;
    }
    const double term = env * large_sign_sine(k, p);
    sum.add(term);
    abs_sum += std::abs(term);
    ev.terms = k;
    prev_env = env;
    tail = env;
    if (env < 1e-18 * std::abs(sum.value()) && k > 3) break;
  }
  ev.value = sum.value();
  ev.error = tail + 4.0 * kEps * abs_sum;
  return ev;
}

/// Radial Fourier inversion of exp(-|xi|^alpha) at distance rho > 0:
///   p_1(rho) = (2 pi)^{-d/2} rho^{1-d/2} int_0^inf exp(-s^alpha) s^{d/2} J_{d/2-1}(s rho) ds,
/// with J_{-1/2} and J_{1/2} written out for d = 1 and d = 3.
inline Evaluation hankel_quadrature(double rho, const StableParams& p, double rel_tol = 1e-13) {
  Evaluation ev;
  ev.method = Method::quadrature;
  const double a = p.alpha;
  const int d = p.d;
  // exp(-s^alpha) s^{d/2} < e^{-60} beyond s_max
  double s_max = 1.0;
  for (int i = 0; i < 50; ++i) s_max = std::pow(60.0 + (0.5 * d + 1.0) * std::log(std::max(s_max, 1.0)), 1.0 / a);

  const double half_period = std::numbers::pi / rho;
  std::vector<double> breaks{0.0};
  const double s1 = std::min(1.0, half_period);
  if (a != 1.0)  // exp(-s^alpha) is not smooth at 0
    for (int k = 10; k >= 1; --k) breaks.push_back(s1 * std::pow(0.25, k));
  breaks.push_back(s1);
  double s = s1;
  while (s < s_max) {
    const double smooth_width = std::max(0.5, 0.5 * std::pow(s, 1.0 - a) / a);
    s = std::min(s_max, s + std::min(half_period, smooth_width));
    breaks.push_back(s);
  }

  quad::QuadResult q;
  double prefactor = 0.0;
  if (d == 1) {
    prefactor = 1.0 / std::numbers::pi;
    q = quad::over_panels([&](double u) { return std::exp(-std::pow(u, a)) * std::cos(u * rho); }, breaks, rel_tol);
  } else if (d == 3) {
    prefactor = 1.0 / (2.0 * std::numbers::pi * std::numbers::pi * rho);
    q = quad::over_panels([&](double u) { return std::exp(-std::pow(u, a)) * u * std::sin(u * rho); }, breaks,
                          rel_tol);
  } else {
    const double nu = 0.5 * d - 1.0;
    prefactor = std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::pow(rho, -nu);
    q = quad::over_panels(
        [&](double u) {
          if (u == 0.0) return 0.0;
          return std::exp(-std::pow(u, a)) * std::pow(u, 0.5 * d) * std::cyl_bessel_j(nu, u * rho);
        },
        breaks, rel_tol);
  }
  ev.value = prefactor * q.value;
  ev.error = prefactor * (q.error + 8.0 * kEps * q.l1);
  ev.terms = static_cast<int>(breaks.size());
  return ev;
}

inline double gaussian_density(double t, double dist, int d) {
  return std::pow(4.0 * std::numbers::pi * t, -0.5 * d) * std::exp(-dist * dist / (4.0 * t));
}

/// Best available evaluation of p_1(rho): series where they are accurate, quadrature otherwise.
inline Evaluation standard_density(double rho, const StableParams& p) {
  if (p.is_gaussian()) {
    return {gaussian_density(1.0, rho, p.d), 0.0, Method::closed_form, 0};
  }
  Evaluation best = small_series(rho, p);
  if (rho == 0.0) return best;
  const Evaluation large = large_series(rho, p);
  if (std::isfinite(large.value) && large.error / std::abs(large.value) < best.error / std::abs(best.value))
    best = large;
  if (!(best.error <= 1e-12 * std::abs(best.value))) {
    const Evaluation q = hankel_quadrature(rho, p);
    if (!(best.error <= q.error)) best = q;
  }
  return best;
}

}  // namespace kernel_detail

/// Transition density p_t(x) of the free process at |x| = dist.
/// alpha = 2 uses the heat kernel (4 pi t)^{-d/2} exp(-|x|^2 / 4t); otherwise p_1 is evaluated at
/// t^{-1/alpha} dist and rescaled by t^{-d/alpha}.
inline double transition_density(double t, double dist, const StableParams& p) {
  p.validate();
  if (!(t > 0.0)) throw std::domain_error("transition_density: t must be positive");
  if (!(dist >= 0.0)) throw std::domain_error("transition_density: dist must be nonnegative");
  if (p.is_gaussian()) return kernel_detail::gaussian_density(t, dist, p.d);
  const double scale = std::pow(t, -1.0 / p.alpha);
  const auto ev = kernel_detail::standard_density(dist * scale, p);
  const double rel = ev.error / std::abs(ev.value);
  if (!(rel <= 1e-8) || !(ev.value >= 0.0))
    throw ConvergenceError("transition_density: radial inversion did not converge", rel);
  return std::pow(scale, p.d) * ev.value;
}

/// Precomputed evaluator of p_t(r) for repeated calls inside Monte Carlo loops.
/// Power series near the origin, the tail expansion far out, and a log-log
/// cubic table built from the accurate evaluator in between.
class TransitionKernel {
 public:
  TransitionKernel() = default;
  explicit TransitionKernel(const StableParams& p, double table_spacing = 0.005) : params_(p) {
    p.validate();
    c1_ = c1_constant(p);
    if (p.is_gaussian()) return;
    build_series();
    build_table(table_spacing);
  }

  const StableParams& params() const noexcept { return params_; }

  /// p_1(rho).
  double standard(double rho) const {
    if (params_.is_gaussian()) return kernel_detail::gaussian_density(1.0, rho, params_.d);
    if (rho <= rho_lo_) {
      const double x = rho * rho;
      double s = 0.0;
      for (auto it = small_.rbegin(); it != small_.rend(); ++it) s = s * x + *it;
      return s;
    }
    if (rho >= rho_hi_) {
      const double y = std::pow(rho, -params_.alpha);
      double s = 0.0;
      for (auto it = large_.rbegin(); it != large_.rend(); ++it) s = s * y + *it;
      return s * y * std::pow(rho, -params_.d);
    }
    return std::exp(interpolate(std::log(rho)));
  }

  /// p_t(r).
  double operator()(double t, double r) const {
    if (params_.is_gaussian()) return kernel_detail::gaussian_density(t, r, params_.d);
    const double scale = std::pow(t, -1.0 / params_.alpha);
    return std::pow(scale, params_.d) * standard(r * scale);
  }

  double c1() const noexcept { return c1_; }
  double series_inner_radius() const noexcept { return rho_lo_; }
  double series_outer_radius() const noexcept { return rho_hi_; }

 private:
  void build_series() {
    using namespace kernel_detail;
    constexpr double tol = 1e-12;
    // inner region: largest rho on a log grid where the power series is accurate
    rho_lo_ = 0.0;
    int m_terms = 1;
    for (double rho = 1e-4; rho < 1e3; rho *= 1.02) {
      const Evaluation ev = small_series(rho, params_, 200);
      if (!(ev.error <= tol * std::abs(ev.value)) || ev.terms >= 200) break;
      rho_lo_ = rho;
      m_terms = std::max(m_terms, ev.terms);
    }
    for (int m = 0; m < m_terms; ++m) {
      const double c = std::exp(small_log_coeff(m, params_));
      if (!std::isfinite(c)) break;
      small_.push_back((m % 2 == 0) ? c : -c);
    }
    // outer region: smallest rho (scanning inward) where the tail expansion is accurate
    rho_hi_ = std::numeric_limits<double>::infinity();
    int k_terms = 1;
    for (double rho = 1e4; rho > 1e-4; rho /= 1.02) {
      const Evaluation ev = large_series(rho, params_, 200);
      if (!(ev.error <= tol * std::abs(ev.value)) || ev.terms >= 200) break;
      rho_hi_ = rho;
      k_terms = std::max(k_terms, ev.terms);
    }
    for (int k = 1; k <= k_terms; ++k) {
      const double c = std::exp(large_log_envelope(k, params_)) * large_sign_sine(k, params_);
      if (!std::isfinite(c)) break;
      large_.push_back(c);
    }
    if (!std::isfinite(rho_hi_)) throw ConvergenceError("TransitionKernel: tail expansion never converges", 1.0);
  }

  void build_table(double spacing) {
    if (rho_lo_ >= rho_hi_) return;
    log_lo_ = std::log(rho_lo_) - 2.0 * spacing;
    const double log_hi = std::log(rho_hi_) + 2.0 * spacing;
    const int n = static_cast<int>(std::ceil((log_hi - log_lo_) / spacing)) + 1;
    step_ = (log_hi - log_lo_) / (n - 1);
    table_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto ev = kernel_detail::standard_density(std::exp(log_lo_ + i * step_), params_);
      table_[static_cast<std::size_t>(i)] = std::log(ev.value);
    }
  }

  double interpolate(double u) const {
    const double pos = (u - log_lo_) / step_;
    int i = static_cast<int>(std::floor(pos)) - 1;
    i = std::clamp(i, 0, static_cast<int>(table_.size()) - 4);
    const double x = pos - i;
    const double* f = &table_[static_cast<std::size_t>(i)];
    // cubic Lagrange through nodes 0..3
    return f[0] * (-(x - 1) * (x - 2) * (x - 3) / 6.0) + f[1] * (x * (x - 2) * (x - 3) / 2.0) +
           f[2] * (-x * (x - 1) * (x - 3) / 2.0) + f[3] * (x * (x - 1) * (x - 2) / 6.0);
  }

  StableParams params_{};
  double c1_ = 0.0;
  double rho_lo_ = 0.0;
  double rho_hi_ = 0.0;
  std::vector<double> small_;
  std::vector<double> large_;
  double log_lo_ = 0.0;
  double step_ = 1.0;
  std::vector<double> table_;
};

}  // namespace stabletrace
