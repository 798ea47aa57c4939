#pragma once

// Ikeda-Watanabe check on a disk: P^x(X(tau_D) in A, t1 < tau_D < t2) against
// int_D int_{t1}^{t2} p_D(s,x,y) ds kappa_A(y) dy with kappa_A(y) = int_A nu(y - z) dz.
// The right side is int_D G_{t}(|x-y|) kappa_A(y) dy minus E^x[tau < t; int_D G_{t-tau}(|X_tau - y|)
// kappa_A(y) dy] at t = t2 and t1, where G_s(r) = int_0^s p(u, r) du.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "stabletrace/exit_sim.hpp"
#include "stabletrace/geometry.hpp"
#include "stabletrace/quadrature.hpp"
#include "stabletrace/stats.hpp"

namespace stabletrace {

/// G_s(r) = int_0^s p(u, r) du = alpha r^{alpha-d} H(r s^{-1/alpha}),
/// H(v) = int_v^inf u^{d-alpha-1} p_1(u) du, tabulated in log v. Needs d > alpha.
class TimeIntegratedKernel {
 public:
  explicit TimeIntegratedKernel(const ExitSimulator& sim) : p_(sim.params()) {
    p_.require_jumps("TimeIntegratedKernel");
    if (!(p_.d > p_.alpha)) throw std::domain_error("TimeIntegratedKernel: needs d > alpha");
    const double e = p_.d - p_.alpha - 1.0;
    const int n = static_cast<int>((lmax_ - lmin_) / dl_) + 1;
    logH_.resize(static_cast<std::size_t>(n));
    const quad::GaussRule g = quad::gauss_legendre(16);
    // tail beyond v_max from p_1(u) ~ A u^{-d-alpha}
    double H = levy_density(1.0, p_) * std::pow(std::exp(lmax_), -2.0 * p_.alpha) / (2.0 * p_.alpha);
    logH_[static_cast<std::size_t>(n - 1)] = std::log(H);
    for (int i = n - 2; i >= 0; --i) {
      const double a = lmin_ + i * dl_, b = a + dl_;
      double s = 0.0;
      for (std::size_t k = 0; k < g.nodes.size(); ++k) {
        const double l = 0.5 * (a + b) + 0.5 * (b - a) * g.nodes[k];
        const double u = std::exp(l);
        s += 0.5 * (b - a) * g.weights[k] * std::pow(u, e + 1.0) * sim.density(1.0, u);
      }
      H += s;
      logH_[static_cast<std::size_t>(i)] = std::log(H);
    }
    p1_zero_ = sim.density(1.0, 0.0);
    H0_ = H + p1_zero_ * std::pow(std::exp(lmin_), e + 1.0) / (e + 1.0);
  }

  double H(double v) const {
    const double l = std::log(std::max(v, 1e-300));
    if (l <= lmin_) return H0_ - p1_zero_ * std::pow(v, p_.d - p_.alpha) / (p_.d - p_.alpha);
    if (l >= lmax_) return levy_density(1.0, p_) * std::pow(v, -2.0 * p_.alpha) / (2.0 * p_.alpha);
    const double f = (l - lmin_) / dl_;
    const auto i = std::min(static_cast<std::size_t>(f), logH_.size() - 2);
    const double w = f - static_cast<double>(i);
    return std::exp((1.0 - w) * logH_[i] + w * logH_[i + 1]);
  }

  /// r^{d-1} G_s(r) up to the factor alpha: r^{alpha-1} H(r s^{-1/alpha}) in d = 2.
  double G(double s, double r) const {
    if (!(s > 0.0)) return 0.0;
    return p_.alpha * std::pow(r, p_.alpha - p_.d) * H(r * std::pow(s, -1.0 / p_.alpha));
  }

  double H_at_zero() const { return H0_; }

 private:
  StableParams p_;
  double lmin_ = std::log(1e-4), lmax_ = std::log(1e4), dl_ = 0.002;
  std::vector<double> logH_;
  double H0_ = 0.0, p1_zero_ = 0.0;
};

namespace iw_detail {

// kappa_A(y) for A = {r_in < |z - c| < r_out}, tabulated in rho = |y - c| on [0, R]
class AnnulusLevyMass {
 public:
  AnnulusLevyMass(const StableParams& p, double R, double r_in, double r_out) : R_(R) {
    const double A = levy_density(1.0, p);
    const quad::GaussRule g = quad::gauss_legendre(32);
    const int nphi = 256;
    const int n = 801;
    table_.resize(n);
    for (int i = 0; i < n; ++i) {
      const double rho = R * i / (n - 1);
      double s = 0.0;
      for (std::size_t k = 0; k < g.nodes.size(); ++k) {
        const double r = 0.5 * (r_in + r_out) + 0.5 * (r_out - r_in) * g.nodes[k];
        double ang = 0.0;
        for (int j = 0; j < nphi; ++j) {
          const double phi = 2.0 * std::numbers::pi * (j + 0.5) / nphi;
          ang += std::pow(rho * rho + r * r - 2.0 * rho * r * std::cos(phi), -0.5 * (p.d + p.alpha));
        }
        s += 0.5 * (r_out - r_in) * g.weights[k] * r * ang * 2.0 * std::numbers::pi / nphi;
      }
      table_[static_cast<std::size_t>(i)] = A * s;
    }
  }

  double operator()(double rho) const {
    const double f = std::clamp(rho / R_, 0.0, 1.0) * static_cast<double>(table_.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(f), table_.size() - 2);
    const double w = f - static_cast<double>(i);
    return (1.0 - w) * table_[i] + w * table_[i + 1];
  }

 private:
  double R_;
  std::vector<double> table_;
};

// int over the disk D = B(c, R) of G_s(|y - P|) kappa(|y - c|) dy, in polar coordinates about P
template <class Kappa>
double disk_integral(const TimeIntegratedKernel& G, double alpha, double s, const Vec& P, const Vec& c, double R,
                     const Kappa& kappa) {
  static const quad::GaussRule g = quad::gauss_legendre(16);
  static const quad::GaussRule ga = quad::gauss_legendre(64);
  const Vec w = P - c;
  const double D = w.norm();
  const double scale = std::pow(s, 1.0 / alpha);
  // radial integral of rho G(rho) kappa along the ray theta between rho1 and rho2
  auto ray = [&](double th, double rho1, double rho2) {
    if (!(rho2 > rho1)) return 0.0;
    const double ct = std::cos(th), st = std::sin(th);
    auto f = [&](double rho) {
      const double yx = w[0] + rho * ct, yy = w[1] + rho * st;
      return G.G(s, rho) * rho * kappa(std::sqrt(yx * yx + yy * yy));
    };
    double total = 0.0;
    double a = rho1;
    if (rho1 == 0.0) {
      // rho^{alpha-1} behaviour at 0: substitute rho = u^{1/alpha} on the first panel
      const double b = std::min(rho2, 0.25 * scale);
      const double ub = std::pow(b, alpha);
      for (std::size_t k = 0; k < g.nodes.size(); ++k) {
        const double u = 0.5 * ub * (1.0 + g.nodes[k]);
        const double rho = std::pow(u, 1.0 / alpha);
        total += 0.5 * ub * g.weights[k] * f(rho) * std::pow(rho, 1.0 - alpha) / alpha;
      }
      a = b;
    }
    // panels graded geometrically on the scale s^{1/alpha} away from rho1
    double width = 0.25 * scale;
    while (a < rho2) {
      const double b = std::min(rho2, a + width);
      for (std::size_t k = 0; k < g.nodes.size(); ++k) {
        const double rho = 0.5 * (a + b) + 0.5 * (b - a) * g.nodes[k];
        total += 0.5 * (b - a) * g.weights[k] * f(rho);
      }
      a = b;
      width *= 2.0;
    }
    return total;
  };
  double total = 0.0;
  if (D < R) {
    const int n = 128;
    for (int j = 0; j < n; ++j) {
      const double th = 2.0 * std::numbers::pi * (j + 0.5) / n;
      const double b = w[0] * std::cos(th) + w[1] * std::sin(th);
      const double rho2 = -b + std::sqrt(b * b - (D * D - R * R));
      total += 2.0 * std::numbers::pi / n * ray(th, 0.0, rho2);
    }
  } else {
    const double beta = std::asin(std::min(1.0, R / D));
    const double th0 = std::atan2(-w[1], -w[0]);
    for (std::size_t j = 0; j < ga.nodes.size(); ++j) {
      const double psi = 0.5 * std::numbers::pi * ga.nodes[j];
      const double phi = beta * std::sin(psi);
      const double jac = 0.5 * std::numbers::pi * ga.weights[j] * beta * std::cos(psi);
      const double disc = std::max(0.0, R * R - D * D * std::sin(phi) * std::sin(phi));
      const double mid = D * std::cos(phi);
      total += jac * ray(th0 + phi, mid - std::sqrt(disc), mid + std::sqrt(disc));
    }
  }
  return total;
}

}  // namespace iw_detail

struct IkedaWatanabeResult {
  MCEstimate lhs;
  MCEstimate rhs;
  double rhs_free_part = 0.0;  ///< int_D (G_{t2} - G_{t1})(|x - y|) kappa_A(y) dy
};

/// Disk D in d = 2, annulus A concentric with D and outside it, 0 <= t1 < t2, alpha < 2.
/// lhs and rhs use independent path streams.
inline IkedaWatanabeResult validate_ikeda_watanabe(const ExitSimulator& sim, const Domain& D, const Vec& x,
                                                   const Domain& A, double t1, double t2, long n_paths, double step,
                                                   const RngStream& stream) {
  const StableParams& p = sim.params();
  p.require_jumps("validate_ikeda_watanabe");
  const auto* ball = std::get_if<Ball>(&D.shape());
  const auto* ann = std::get_if<Annulus>(&A.shape());
  if (p.d != 2 || ball == nullptr || ann == nullptr)
    throw std::domain_error("validate_ikeda_watanabe: supports a disk D and an annulus A in d = 2");
  if ((ann->center - ball->center).norm() > 1e-12)
    throw std::domain_error("validate_ikeda_watanabe: A must be concentric with D");
  if (!(ann->r_inner > ball->radius)) throw std::domain_error("validate_ikeda_watanabe: A must lie at positive distance from D");
  if (!(0.0 <= t1 && t1 < t2)) throw std::domain_error("validate_ikeda_watanabe: need 0 <= t1 < t2");
  if (!D.contains(x)) throw std::domain_error("validate_ikeda_watanabe: x must lie in D");

  const TimeIntegratedKernel G(sim);
  const iw_detail::AnnulusLevyMass kappa(p, ball->radius, ann->r_inner, ann->r_outer);
  auto integral = [&](double s, const Vec& P) {
    return s > 0.0 ? iw_detail::disk_integral(G, p.alpha, s, P, ball->center, ball->radius, kappa) : 0.0;
  };

  IkedaWatanabeResult out;
  out.rhs_free_part = integral(t2, x) - integral(t1, x);

  exit_detail::PairedSamples l{std::vector<double>(static_cast<std::size_t>(n_paths)),
                               std::vector<double>(static_cast<std::size_t>(n_paths))};
  exit_detail::PairedSamples r = l;
  const RngStream ls = stream.substream(0x1E5), rs = stream.substream(0x2E5);
  parallel_for(static_cast<std::size_t>(n_paths), sim.config().threads, [&](std::size_t i) {
    StablePath pl = sim.path(x, step, ls.substream(i));
    for (int level = 1; level >= 0; --level) {
      const ExitRecord e = sim.first_exit(pl, D, t2, level);
      const double v = (!e.censored && e.tau > t1 && A.contains(e.exit_position)) ? 1.0 : 0.0;
      (level == 1 ? l.fine : l.coarse)[i] = v;
    }
    StablePath pr = sim.path(x, step, rs.substream(i));
    for (int level = 1; level >= 0; --level) {
      const ExitRecord e = sim.first_exit(pr, D, t2, level);
      double v = 0.0;
      if (!e.censored) v = integral(t2 - e.tau, e.exit_position) - (e.tau < t1 ? integral(t1 - e.tau, e.exit_position) : 0.0);
      (level == 1 ? r.fine : r.coarse)[i] = out.rhs_free_part - v;
    }
  });
  out.lhs = exit_detail::summarize("ikeda_watanabe_lhs", l, stream.seed(), step);
  out.rhs = exit_detail::summarize("ikeda_watanabe_rhs", r, stream.seed(), step);
  return out;
}

}  // namespace stabletrace
