#pragma once

// Exact samplers for the subordinator, isotropic stable increments and the
// ball exit position, plus the subordinator bridge used for path refinement.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "stabletrace/core.hpp"
#include "stabletrace/quadrature.hpp"
#include "stabletrace/rng.hpp"
#include "stabletrace/stable_kernel.hpp"

namespace stabletrace {

namespace stable_detail {

// Zolotarev's function for the positive beta-stable law:
//   A(u) = sin(beta pi u)^{beta/(1-beta)} sin((1-beta) pi u) / sin(pi u)^{1/(1-beta)},  u in (0,1).
inline double log_zolotarev(double u, double beta) {
  const double pi = std::numbers::pi;
  return beta / (1.0 - beta) * std::log(std::sin(beta * pi * u)) + std::log(std::sin((1.0 - beta) * pi * u)) -
         std::log(std::sin(pi * u)) / (1.0 - beta);
}

}  // namespace stable_detail

/// Positive beta-stable variable with E exp(-lambda S) = exp(-lambda^beta), 0 < beta < 1
/// (Kanter's representation S = (A(U)/E)^{(1-beta)/beta}).
inline double sample_positive_stable(double beta, RngStream& rng) {
  const double u = rng.uniform();
  const double e = rng.exponential();
  return std::exp((1.0 - beta) / beta * (stable_detail::log_zolotarev(u, beta) - std::log(e)));
}

/// A_dt of the alpha/2-stable subordinator with E exp(-lambda A_t) = exp(-t (2 lambda)^{alpha/2}).
/// Scaling gives A_dt = 2 dt^{2/alpha} S with S standard positive (alpha/2)-stable; alpha = 2 is
/// the deterministic clock A_dt = 2 dt.
inline double sample_subordinator_increment(double dt, double alpha, RngStream& rng) {
  if (!(dt > 0.0)) throw std::domain_error("sample_subordinator_increment: dt must be positive");
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::domain_error("sample_subordinator_increment: alpha outside (0,2]");
  if (alpha == 2.0) return 2.0 * dt;
  return 2.0 * std::pow(dt, 2.0 / alpha) * sample_positive_stable(0.5 * alpha, rng);
}

struct IncrementSample {
  double dt = 0.0;
  Vec jump;
  double subordinated_time = 0.0;  ///< A_dt; the jump is a Brownian displacement over this clock
};

/// X_{t+dt} - X_t = B(A_dt) with B standard Brownian motion (E exp(i xi B_s) = exp(-s|xi|^2/2)).
inline IncrementSample sample_stable_increment(double dt, const StableParams& p, RngStream& rng) {
  IncrementSample s;
  s.dt = dt;
  s.subordinated_time = sample_subordinator_increment(dt, p.alpha, rng);
  s.jump = Vec(p.d);
  const double sd = std::sqrt(s.subordinated_time);
  for (int i = 0; i < p.d; ++i) s.jump[i] = sd * rng.normal();
  return s;
}

/// Exit position from B(center, r) started at x, drawn exactly from the ball harmonic measure.
/// Proposal: direction uniform, distance s = s0/u along the ray with u ~ Beta(alpha, 1 - alpha/2),
/// which matches the (s - s0)^{-alpha/2} singularity at the sphere and the s^{-1-alpha} tail.
inline Vec sample_ball_exit_position(const Vec& x, const Vec& center, double r, const StableParams& p, RngStream& rng,
                                     int max_iterations = 10000) {
  p.require_jumps("sample_ball_exit_position");
  const Vec w = x - center;
  const double w2 = w.norm2();
  if (!(w2 < r * r)) throw std::domain_error("sample_ball_exit_position: x must lie inside the ball");
  const double a = r - std::sqrt(w2);
  for (int it = 0; it < max_iterations; ++it) {
    const Vec theta = sample_unit_vector(p.d, rng);
    const double tw = dot(theta, w);
    const double disc = std::sqrt(tw * tw + r * r - w2);
    const double s0 = disc - tw;
    const double s1 = disc + tw;
    const double u = rng.beta(p.alpha, 1.0 - 0.5 * p.alpha);
    const double s = s0 / u;
    const double accept = std::pow(a / s0, p.alpha) * std::pow(s / (s + s1), 0.5 * p.alpha);
    if (rng.uniform() < accept) {
      Vec y = x + theta * s;
      if ((y - center).norm2() > r * r) return y;
    }
  }
  throw SamplingError("sample_ball_exit_position: rejection loop exceeded " + std::to_string(max_iterations) +
                      " iterations (distance to sphere " + std::to_string(a) + ")");
}

/// P(|Y - center| <= s) for the exit position Y from B(center, r) started at the center:
/// 1 - I_{r^2/s^2}(alpha/2, 1 - alpha/2), the regularized incomplete beta function.
inline double ball_exit_radius_cdf(double s, double r, double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::domain_error("ball_exit_radius_cdf: alpha outside (0,2)");
  if (!(s > r)) return 0.0;
  return 1.0 - boost::math::ibeta(0.5 * alpha, 1.0 - 0.5 * alpha, (r * r) / (s * s));
}

/// Inverse of ball_exit_radius_cdf in s.
inline double ball_exit_radius_quantile(double u, double r, double alpha) {
  if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("ball_exit_radius_quantile: u outside [0,1)");
  if (u == 0.0) return r;
  return r / std::sqrt(boost::math::ibeta_inv(0.5 * alpha, 1.0 - 0.5 * alpha, 1.0 - u));
}

/// Density of the standard positive beta-stable law, tabulated in log-log coordinates.
class PositiveStableDensity {
 public:
  explicit PositiveStableDensity(double beta, double spacing = 0.01) : beta_(beta), rule_(quad::gauss_legendre(24)) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("PositiveStableDensity: beta outside (0,1)");
    gamma_ = beta / (1.0 - beta);
    log_a0_ = beta / (1.0 - beta) * std::log(beta) + std::log(1.0 - beta);
    // left edge where log f < -600
    log_lo_ = -std::log(600.0 / std::exp(log_a0_)) / gamma_;
    const double log_hi = std::log(1e8);
    const int n = static_cast<int>(std::ceil((log_hi - log_lo_) / spacing)) + 1;
    step_ = (log_hi - log_lo_) / (n - 1);
    table_.resize(static_cast<std::size_t>(n));
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double ls = log_lo_ + i * step_;
      const double lf = log_density_direct(std::exp(ls));
      table_[static_cast<std::size_t>(i)] = lf + singular_part(ls);
      if (lf > best) {
        best = lf;
        mode_ = std::exp(ls);
      }
    }
  }

  double beta() const noexcept { return beta_; }
  double mode() const noexcept { return mode_; }
  double support_floor() const noexcept { return std::exp(log_lo_); }

  /// log f(s) from the table (cubic in log s, after removing the A(0) s^{-gamma} essential
  /// singularity at 0); the power series beyond the table.
  double log_density(double s) const {
    if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
    const double ls = std::log(s);
    if (ls <= log_lo_) return table_.front() - singular_part(ls);
    const double pos = (ls - log_lo_) / step_;
    if (pos >= static_cast<double>(table_.size() - 2)) return log_density_direct(s);
    int i = std::clamp(static_cast<int>(std::floor(pos)) - 1, 0, static_cast<int>(table_.size()) - 4);
    const double x = pos - i;
    const double* f = &table_[static_cast<std::size_t>(i)];
    return f[0] * (-(x - 1) * (x - 2) * (x - 3) / 6.0) + f[1] * (x * (x - 2) * (x - 3) / 2.0) +
           f[2] * (-x * (x - 1) * (x - 3) / 2.0) + f[3] * (x * (x - 1) * (x - 2) / 6.0) - singular_part(ls);
  }

  /// log f(s) without the table: Zolotarev integral, or the convergent power series in s^{-beta}
  /// for large s,  f(s) = (1/pi) sum_k (-1)^{k+1}/k! Gamma(k beta + 1) sin(k pi beta) s^{-k beta - 1}.
  double log_density_direct(double s) const {
    const double x = std::pow(s, -beta_);
    if (x < 0.3) {
      double sum = 0.0;
      double xk = 1.0;
      for (int k = 1; k < 60; ++k) {
        xk *= x;
        const double env = std::exp(std::lgamma(k * beta_ + 1.0) - std::lgamma(k + 1.0)) * xk;
        const double term = env * std::sin(k * std::numbers::pi * beta_);
        sum += (k % 2 == 1) ? term : -term;
        if (env < 1e-17 * std::abs(sum)) break;
      }
      return std::log(sum / (std::numbers::pi * s));
    }
    // f(s) = int_0^1 gamma A(u) s^{-gamma-1} exp(-A(u) s^{-gamma}) du, with exp(-A(0) s^{-gamma}) factored out
    const double z = std::pow(s, -gamma_);
    const double a0 = std::exp(log_a0_);
    auto integrand = [&](double u) {
      if (u <= 0.0 || u >= 1.0) return 0.0;
      const double la = stable_detail::log_zolotarev(u, beta_);
      return std::exp(la - (std::exp(la) - a0) * z);
    };
    // geometric panels towards both endpoints: mass piles up near u = 0 for small s and near u = 1
    // for large s
    CompensatedSum sum;
    double w = 0.5;
    for (int k = 0; k < 48; ++k) {
      const double next = (k == 47) ? 0.0 : 0.7 * w;
      sum.add(rule_.integrate(integrand, next, w));
      sum.add(rule_.integrate(integrand, 1.0 - w, 1.0 - next));
      w = next;
    }
    const auto q = quad::QuadResult{sum.value(), 0.0, 0.0};
    return std::log(gamma_) - (gamma_ + 1.0) * std::log(s) - a0 * z + std::log(q.value);
  }

 private:
  double singular_part(double log_s) const { return std::exp(log_a0_ - gamma_ * log_s); }

  double beta_;
  double gamma_ = 0.0;
  double log_a0_ = 0.0;
  double log_lo_ = 0.0;
  double step_ = 0.0;
  double mode_ = 0.0;
  quad::GaussRule rule_;
  std::vector<double> table_;
};

/// Splits a subordinator increment: given A over a time interval of length dt equal to a, draws the
/// increment over the first half. With b = a / (2 (dt/2)^{1/beta}) the ratio u = A_1 / a is
/// distributed as S_1 / b given S_1 + S_2 = b for iid standard positive stables. Large b uses exact
/// rejection from the unconditional law; moderate b uses a tabulated inverse conditional CDF.
class SubordinatorBridge {
 public:
  explicit SubordinatorBridge(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::domain_error("SubordinatorBridge: alpha outside (0,2)");
    beta_ = 0.5 * alpha;
    density_ = std::make_shared<const PositiveStableDensity>(beta_);
    build_table();
  }

  double alpha() const noexcept { return alpha_; }
  const PositiveStableDensity& density() const noexcept { return *density_; }
  double table_upper() const noexcept { return std::exp(log_b_hi_); }

  /// Fraction u in (0,1) of the total subordinated time a (over real time dt) falling in the first half.
  double split_fraction(double a, double dt, RngStream& rng) const {
    const double b = a / (2.0 * std::pow(0.5 * dt, 1.0 / beta_));
    double u = (b > std::exp(log_b_hi_)) ? rejection_half(b, rng) : table_half(b, rng);
    if (rng.uniform() < 0.5) u = 1.0 - u;
    return u;
  }

 private:
  static constexpr int kLevels = 513;
  static constexpr int kGrid = 4096;

  // exact: s ~ f on (0, b/2), accept with f(b - s) / f(b/2); valid when f decreases on [b/2, b]
  double rejection_half(double b, RngStream& rng) const {
    const double lf_half = density_->log_density(0.5 * b);
    for (int it = 0; it < 100000; ++it) {
      const double s = sample_positive_stable(beta_, rng);
      if (s >= 0.5 * b) continue;
      if (std::log(rng.uniform()) < density_->log_density(b - s) - lf_half) return s / b;
    }
    throw SamplingError("SubordinatorBridge: rejection sampler exceeded its iteration cap");
  }

  double table_half(double b, RngStream& rng) const {
    const double lb = std::clamp(std::log(b), log_b_lo_, log_b_hi_);
    const double pos = (lb - log_b_lo_) / b_step_;
    const int j = std::clamp(static_cast<int>(pos), 0, n_b_ - 2);
    const double wb = pos - j;
    const double p = rng.uniform() * (kLevels - 1);
    const int i = std::clamp(static_cast<int>(p), 0, kLevels - 2);
    const double wp = p - i;
    auto q = [&](int row) {
      const double* r = &quantiles_[static_cast<std::size_t>(row) * kLevels];
      return (1.0 - wp) * r[i] + wp * r[i + 1];
    };
    return (1.0 - wb) * q(j) + wb * q(j + 1);
  }

  void build_table() {
    const double mode = density_->mode();
    const double floor = density_->support_floor();
    log_b_hi_ = std::log(std::max(4.0 * mode, 4.0 * floor));
    // S_1 + S_2 below b_lo has probability below e^{-40}
    const double gam = beta_ / (1.0 - beta_);
    const double a0 = std::exp(gam * std::log(beta_) + std::log(1.0 - beta_));
    log_b_lo_ = std::min(log_b_hi_ - 1.0, std::log(std::pow(2.0, 1.0 / beta_) * std::pow(a0 / 40.0, 1.0 / gam)));
    n_b_ = 200;
    b_step_ = (log_b_hi_ - log_b_lo_) / (n_b_ - 1);
    quantiles_.assign(static_cast<std::size_t>(n_b_) * kLevels, 0.0);

    std::vector<double> u(kGrid + 1), lw(kGrid + 1), cdf(kGrid + 1);
    for (int k = 0; k <= kGrid; ++k) {
      const double w = static_cast<double>(k) / kGrid;
      u[static_cast<std::size_t>(k)] = 0.5 * w * w * w * w;
    }
    for (int j = 0; j < n_b_; ++j) {
      const double b = std::exp(log_b_lo_ + j * b_step_);
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 1; k <= kGrid; ++k) {
        const double uk = u[static_cast<std::size_t>(k)];
        lw[static_cast<std::size_t>(k)] = density_->log_density(b * uk) + density_->log_density(b * (1.0 - uk));
        mx = std::max(mx, lw[static_cast<std::size_t>(k)]);
      }
      cdf[0] = 0.0;
      double prev = 0.0;
      for (int k = 1; k <= kGrid; ++k) {
        const double h = std::exp(lw[static_cast<std::size_t>(k)] - mx);
        cdf[static_cast<std::size_t>(k)] =
            cdf[static_cast<std::size_t>(k - 1)] + 0.5 * (h + prev) * (u[static_cast<std::size_t>(k)] - u[static_cast<std::size_t>(k - 1)]);
        prev = h;
      }
      const double total = cdf[kGrid];
      double* row = &quantiles_[static_cast<std::size_t>(j) * kLevels];
      int k = 0;
      for (int i = 0; i < kLevels; ++i) {
        const double target = total * i / (kLevels - 1);
        while (k < kGrid - 1 && cdf[static_cast<std::size_t>(k + 1)] < target) ++k;
        const double c0 = cdf[static_cast<std::size_t>(k)], c1 = cdf[static_cast<std::size_t>(k + 1)];
        const double w = (c1 > c0) ? std::clamp((target - c0) / (c1 - c0), 0.0, 1.0) : 0.0;
        row[i] = u[static_cast<std::size_t>(k)] + w * (u[static_cast<std::size_t>(k + 1)] - u[static_cast<std::size_t>(k)]);
      }
      row[0] = std::max(row[0], 1e-300);
      row[kLevels - 1] = 0.5;
    }
  }

  double alpha_;
  double beta_ = 0.0;
  std::shared_ptr<const PositiveStableDensity> density_;
  double log_b_lo_ = 0.0;
  double log_b_hi_ = 0.0;
  double b_step_ = 1.0;
  int n_b_ = 0;
  std::vector<double> quantiles_;
};

}  // namespace stabletrace
