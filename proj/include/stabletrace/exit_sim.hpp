#pragma once

// First-exit simulation on a lazily refined path and the Monte Carlo estimators
// built on it.
//
// A path is the subordinated Brownian motion X(t) = B(A(t)). Skeleton nodes sit on
// the dyadic refinements of a base grid of spacing `step`; the node at (level,
// index) is generated from a random stream keyed by that pair, so every
// refinement of a given path is the same path. This gives paired coarse/fine
// estimates (step and step/2) on identical randomness, and common random numbers
// across domains.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabletrace/core.hpp"
#include "stabletrace/geometry.hpp"
#include "stabletrace/parallel.hpp"
#include "stabletrace/rng.hpp"
#include "stabletrace/sampling.hpp"
#include "stabletrace/stable_kernel.hpp"
#include "stabletrace/stats.hpp"

namespace stabletrace {

struct ExitSimConfig {
  double time_tolerance_rel = 1e-4;   ///< refinement stops at min(rel * horizon, step / steps_per_tolerance)
  double steps_per_tolerance = 256.0;
  double refine_probability = 1e-3;   ///< refine an interval whose excursion bound exceeds this
  double curvature_fraction = 0.05;   ///< alpha = 2: crossing tests need sqrt(var) below this * curvature radius
  int max_level = 30;
  int threads = 1;
};

struct ExitRecord {
  double tau = std::numeric_limits<double>::infinity();
  Vec exit_position;
  bool censored = true;
  long steps_used = 0;
  double final_step_size = 0.0;
  bool boundary_hit = false;  ///< exit point within 1e-12 of the boundary
};

struct MCEstimate {
  std::string quantity;
  double mean = 0.0;
  double std_error = 0.0;
  long long n_samples = 0;
  std::uint64_t seed = 0;
  double step = 0.0;
  double bias_diagnostic = 0.0;  ///< estimate(step/2) - estimate(step), same paths
  double bias_std_error = 0.0;   ///< standard error of the paired difference
};

struct PathNode {
  double t = 0.0;
  double a = 0.0;  ///< subordinated clock A(t)
  Vec x;
};

namespace exit_detail {
inline constexpr std::uint64_t kCrossTag = 0xC2055;
inline constexpr std::uint64_t kLocalizeTag = 0x10CA1;
inline constexpr std::uint64_t kPointTag = 0x9017;
inline constexpr std::uint64_t kPathTag = 0xBA7B;
}  // namespace exit_detail

class StablePath {
 public:
  StablePath(const StableParams& p, const Vec& x0, double step, RngStream rng, const SubordinatorBridge* bridge)
      : params_(p), step_(step), rng_(rng), bridge_(bridge) {
    if (!(step > 0.0)) throw std::domain_error("StablePath: step must be positive");
    if (x0.dim() != p.d) throw std::domain_error("StablePath: start point has the wrong dimension");
    if (!p.is_gaussian() && bridge_ == nullptr) throw std::invalid_argument("StablePath: jump paths need a bridge");
    base_.push_back({0.0, 0.0, x0});
  }

  const StableParams& params() const noexcept { return params_; }
  double step() const noexcept { return step_; }
  long nodes_generated() const noexcept { return generated_; }

  const PathNode& base(long k) {
    while (static_cast<long>(base_.size()) <= k) {
      const long i = static_cast<long>(base_.size()) - 1;
      RngStream r = rng_.substream(0, static_cast<std::uint64_t>(i + 1));
      const auto inc = sample_stable_increment(step_, params_, r);
      const PathNode& prev = base_.back();
      base_.push_back({(i + 1) * step_, prev.a + inc.subordinated_time, prev.x + inc.jump});
      ++generated_;
    }
    return base_[static_cast<std::size_t>(k)];
  }

  /// Node halfway in time between L and R; (level, index) addresses the new node.
  PathNode midpoint(const PathNode& L, const PathNode& R, int level, std::uint64_t index) {
    RngStream r = node_stream(level, index, 0);
    ++generated_;
    const double da = R.a - L.a;
    double a1 = 0.5 * da;
    if (!params_.is_gaussian()) a1 = da * bridge_->split_fraction(da, R.t - L.t, r);
    PathNode m;
    m.t = 0.5 * (L.t + R.t);
    m.a = L.a + a1;
    const double w = (da > 0.0) ? a1 / da : 0.5;
    const double sd = (da > 0.0) ? std::sqrt(std::max(0.0, a1 * (da - a1) / da)) : 0.0;
    m.x = L.x + (R.x - L.x) * w;
    for (int i = 0; i < params_.d; ++i) m.x[i] += sd * r.normal();
    return m;
  }

  RngStream node_stream(int level, std::uint64_t index, std::uint64_t tag) const {
    return rng_.substream(static_cast<std::uint64_t>(level), index, tag);
  }

 private:
  StableParams params_;
  double step_;
  RngStream rng_;
  const SubordinatorBridge* bridge_;
  std::vector<PathNode> base_;
  long generated_ = 0;
};

/// Holds the per-(d, alpha) tables (transition kernel, subordinator bridge) shared by all paths.
class ExitSimulator {
 public:
  explicit ExitSimulator(const StableParams& p, ExitSimConfig cfg = {}) : params_(p), cfg_(cfg) {
    p.validate();
    if (!p.is_gaussian()) {
      kernel_ = std::make_shared<const TransitionKernel>(p);
      bridge_ = std::make_shared<const SubordinatorBridge>(p.alpha);
    }
  }

  const StableParams& params() const noexcept { return params_; }
  const ExitSimConfig& config() const noexcept { return cfg_; }
  ExitSimConfig& config() noexcept { return cfg_; }

  /// p_t(r) of the free process.
  double density(double t, double r) const {
    if (params_.is_gaussian()) return kernel_detail::gaussian_density(t, r, params_.d);
    return (*kernel_)(t, r);
  }

  StablePath path(const Vec& x0, double step, RngStream rng) const {
    return StablePath(params_, x0, step, rng, bridge_.get());
  }

  /// Finest refinement interval; halving the step halves it, so paired coarse/fine runs expose the
  /// bias from excursions shorter than the tolerance.
  double time_tolerance(double horizon, double step) const {
    return std::min(cfg_.time_tolerance_rel * horizon, step / cfg_.steps_per_tolerance);
  }

  /// First exit of `path` from D before `horizon`, scanning the skeleton refined to
  /// `start_level` (0: spacing step, 1: step/2, ...).
  ExitRecord first_exit(StablePath& path, const Domain& D, double horizon, int start_level = 0) const {
    const Vec& x0 = path.base(0).x;
    if (!D.contains(x0)) throw std::domain_error("first_exit: start point is not inside the domain");
    Scan s{path, D, start_level, std::ldexp(time_tolerance(horizon, path.step()), -start_level), 0.0};
    ExitRecord rec;
    rec.exit_position = x0;
    const long start_nodes = path.nodes_generated();
    for (long k = 0;; ++k) {
      const PathNode L = path.base(k);
      if (L.t >= horizon) break;
      const PathNode R = path.base(k + 1);
      const auto e = params_.is_gaussian() ? scan_continuous(s, L, R, 0, static_cast<std::uint64_t>(k))
                                           : scan_jump(s, L, R, 0, static_cast<std::uint64_t>(k));
      if (e) {
        if (e->t <= horizon) {
          rec.tau = e->t;
          rec.exit_position = e->x;
          rec.censored = false;
          rec.boundary_hit = std::abs(D.signed_distance(e->x)) < 1e-12;
        }
        break;
      }
    }
    rec.steps_used = path.nodes_generated() - start_nodes + static_cast<long>(horizon / path.step());
    rec.final_step_size = s.final_len;
    return rec;
  }

  ExitRecord simulate_first_exit(const Domain& D, const Vec& x, double horizon, double step, RngStream stream,
                                 int start_level = 0) const {
    if (!(horizon > 0.0)) throw std::domain_error("simulate_first_exit: horizon must be positive");
    StablePath p = path(x, step, stream);
    return first_exit(p, D, horizon, start_level);
  }

 private:
  struct Event {
    double t;
    Vec x;
  };
  struct Scan {
    StablePath& path;
    const Domain& D;
    int start_level;
    double tol;
    double final_len;
  };

  // Jump paths: the exit is the first skeleton node outside D. An interval with both ends inside
  // is refined while the Brownian-bridge excursion bound (in subordinated time) exceeds the
  // refinement threshold; the bound is conservative because X only visits B on the range of A.
  std::optional<Event> scan_jump(Scan& s, const PathNode& L, const PathNode& R, int level, std::uint64_t k) const {
    const double len = R.t - L.t;
    bool split = level < s.start_level;
    if (!split) {
      const bool out = !s.D.contains(R.x);
      if (out) {
        if (len <= s.tol || level >= cfg_.max_level) {
          s.final_len = len;
          return Event{R.t, R.x};
        }
        split = true;
      } else {
        if (len <= s.tol || level >= cfg_.max_level) return std::nullopt;
        const double c = 0.5 * (s.D.distance_to_boundary(L.x) + s.D.distance_to_boundary(R.x) - (R.x - L.x).norm());
        const double v = R.a - L.a;
        const int d = params_.d;
        const double bound = (c <= 0.0) ? 1.0 : 2.0 * d * std::exp(-2.0 * c * c / (d * v));
        if (bound <= cfg_.refine_probability) return std::nullopt;
        split = true;
      }
    }
    const PathNode M = s.path.midpoint(L, R, level + 1, 2 * k + 1);
    if (auto e = scan_jump(s, L, M, level + 1, 2 * k)) return e;
    return scan_jump(s, M, R, level + 1, 2 * k + 1);
  }

  // Continuous paths: a Bernoulli draw with the bridge crossing probability decides whether the
  // path leaves D inside the interval; a crossing is then localized by conditioned bisection.
  std::optional<Event> scan_continuous(Scan& s, const PathNode& L, const PathNode& R, int level,
                                       std::uint64_t k) const {
    const double len = R.t - L.t;
    const double v = R.a - L.a;
    bool split = level < s.start_level;
    double p = 0.0;
    if (!split) {
      const bool out = !s.D.contains(R.x);
      p = out ? 1.0 : s.D.bridge_exit_probability(L.x, R.x, v);
      if (p < 1e-15) return std::nullopt;
      split = !out && len > s.tol && level < cfg_.max_level &&
              std::sqrt(v) > cfg_.curvature_fraction * s.D.curvature_radius();
    }
    if (split) {
      const PathNode M = s.path.midpoint(L, R, level + 1, 2 * k + 1);
      if (auto e = scan_continuous(s, L, M, level + 1, 2 * k)) return e;
      return scan_continuous(s, M, R, level + 1, 2 * k + 1);
    }
    RngStream u = s.path.node_stream(level, k, exit_detail::kCrossTag);
    if (u.uniform() >= p) return std::nullopt;
    return localize(s, L, R, level, k);
  }

  Event localize(Scan& s, PathNode L, PathNode R, int level, std::uint64_t k) const {
    const int d = params_.d;
    while (R.t - L.t > s.tol && level < cfg_.max_level) {
      RngStream r = s.path.node_stream(level, k, exit_detail::kLocalizeTag);
      const double v = R.a - L.a;
      if (s.D.contains(R.x)) R.x = s.D.reflect_for_crossing(L.x, R.x, v, r.uniform());
      PathNode M;
      M.t = 0.5 * (L.t + R.t);
      M.a = L.a + 0.5 * v;
      M.x = (L.x + R.x) * 0.5;
      for (int i = 0; i < d; ++i) M.x[i] += std::sqrt(0.25 * v) * r.normal();
      const double p1 = s.D.contains(M.x) ? s.D.bridge_exit_probability(L.x, M.x, 0.5 * v) : 1.0;
      if (r.uniform() < p1) {
        R = M;
        k = 2 * k;
      } else {
        L = M;
        k = 2 * k + 1;
      }
      ++level;
    }
    s.final_len = R.t - L.t;
    return Event{0.5 * (L.t + R.t), s.D.project_to_boundary((L.x + R.x) * 0.5)};
  }

  StableParams params_;
  ExitSimConfig cfg_;
  std::shared_ptr<const TransitionKernel> kernel_;
  std::shared_ptr<const SubordinatorBridge> bridge_;
};

namespace exit_detail {

struct PairedSamples {
  std::vector<double> fine;
  std::vector<double> coarse;
};

inline MCEstimate summarize(const std::string& quantity, const PairedSamples& s, std::uint64_t seed, double step) {
  MCEstimate e;
  e.quantity = quantity;
  const auto f = stats::mean_std(s.fine);
  e.mean = f.mean;
  e.std_error = f.std_error;
  e.n_samples = f.n;
  e.seed = seed;
  e.step = step;
  std::vector<double> diff(s.fine.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = s.fine[i] - s.coarse[i];
  const auto dd = stats::mean_std(diff);
  e.bias_diagnostic = dd.mean;
  e.bias_std_error = dd.std_error;
  return e;
}

}  // namespace exit_detail

/// Mean of min(tau_D, horizon) started at x; reported with the step-halving difference.
inline MCEstimate estimate_mean_exit_time(const ExitSimulator& sim, const Domain& D, const Vec& x, double horizon,
                                          long n_paths, double step, const RngStream& stream) {
  exit_detail::PairedSamples s{std::vector<double>(static_cast<std::size_t>(n_paths)),
                               std::vector<double>(static_cast<std::size_t>(n_paths))};
  parallel_for(static_cast<std::size_t>(n_paths), sim.config().threads, [&](std::size_t i) {
    StablePath path = sim.path(x, step, stream.substream(i));
    const auto fine = sim.first_exit(path, D, horizon, 1);
    const auto coarse = sim.first_exit(path, D, horizon, 0);
    s.fine[i] = fine.censored ? horizon : fine.tau;
    s.coarse[i] = coarse.censored ? horizon : coarse.tau;
  });
  return exit_detail::summarize("mean_exit_time", s, stream.seed(), step);
}

/// Contribution of one path to r_D(t, x, x): p(t - tau, X(tau) - x) on {tau < t}.
inline double remainder_contribution(const ExitSimulator& sim, const ExitRecord& e, const Vec& y, double t) {
  if (e.censored || !(e.tau < t)) return 0.0;
  return sim.density(t - e.tau, (e.exit_position - y).norm());
}

/// r_D(t, x, x) = E^x[tau_D < t; p(t - tau_D, X(tau_D), x)].
inline MCEstimate estimate_rD(const ExitSimulator& sim, double t, const Vec& x, const Domain& D, long n_paths,
                              double step, const RngStream& stream) {
  if (!(t > 0.0)) throw std::domain_error("estimate_rD: t must be positive");
  if (!D.contains(x)) throw std::domain_error("estimate_rD: x must lie inside the domain");
  exit_detail::PairedSamples s{std::vector<double>(static_cast<std::size_t>(n_paths)),
                               std::vector<double>(static_cast<std::size_t>(n_paths))};
  parallel_for(static_cast<std::size_t>(n_paths), sim.config().threads, [&](std::size_t i) {
    StablePath path = sim.path(x, step, stream.substream(i));
    s.fine[i] = remainder_contribution(sim, sim.first_exit(path, D, t, 1), x, t);
    s.coarse[i] = remainder_contribution(sim, sim.first_exit(path, D, t, 0), x, t);
  });
  return exit_detail::summarize("r_D", s, stream.seed(), step);
}

struct ZEstimate {
  MCEstimate z;               ///< Z_D(t) estimate
  MCEstimate integral;        ///< integral of r_D(t, x, x) over D
  double first_term = 0.0;    ///< C1 |D| t^{-d/alpha}
  double truncation_bound = 0.0;
  double q_min = 0.0;
  bool r_smooth = false;
  int strata = 0;
};

struct ZOptions {
  int strata = 24;
  double q_min_factor = 1e-3;  ///< q_min = factor * t^{1/alpha}
};

/// Z_D(t) = C1|D| t^{-d/alpha} - int_D r_D(t,x,x) dx, the integral estimated over strata of the
/// distance to the boundary (coarea), points allocated in proportion to stratum volume times the
/// envelope min(t delta^{-d-alpha}, t^{-d/alpha}). The layer delta < q_min is assigned the
/// value C1 t^{-d/alpha} and its full size is reported as truncation_bound.
inline ZEstimate estimate_Z(const ExitSimulator& sim, double t, const Domain& D, long n_points, long n_paths,
                            double step, const RngStream& stream, ZOptions opt = {}) {
  if (!D.bounded()) throw std::domain_error("estimate_Z: domain must be bounded");
  if (!(t > 0.0)) throw std::domain_error("estimate_Z: t must be positive");
  const StableParams& p = sim.params();
  const int d = p.d;
  const Measures m = D.measures();
  const double c1 = c1_constant(p);
  const double peak = c1 * std::pow(t, -d / p.alpha);
  const double scale = std::pow(t, 1.0 / p.alpha);
  const double q_top = D.inradius();
  const double q_min = std::min(opt.q_min_factor * scale, 0.5 * q_top);
  const int J = opt.strata;

  auto cum_volume = [&](double q) { return m.volume - (q >= q_top ? 0.0 : D.parallel_set(q).volume_q); };
  std::vector<double> edges(static_cast<std::size_t>(J + 1));
  for (int j = 0; j <= J; ++j) edges[static_cast<std::size_t>(j)] = q_min * std::pow(q_top / q_min, static_cast<double>(j) / J);
  edges.back() = q_top;

  auto envelope = [&](double q) {
    if (p.is_gaussian()) return peak * std::exp(-q * q / (4.0 * t));
    return std::min(t * std::pow(q, -d - p.alpha), peak);
  };
  std::vector<double> vol(static_cast<std::size_t>(J)), weight(static_cast<std::size_t>(J));
  double wsum = 0.0;
  for (int j = 0; j < J; ++j) {
    vol[static_cast<std::size_t>(j)] = cum_volume(edges[static_cast<std::size_t>(j + 1)]) - cum_volume(edges[static_cast<std::size_t>(j)]);
    weight[static_cast<std::size_t>(j)] = vol[static_cast<std::size_t>(j)] * envelope(edges[static_cast<std::size_t>(j)]);
    wsum += weight[static_cast<std::size_t>(j)];
  }
  std::vector<long> count(static_cast<std::size_t>(J));
  std::vector<long> offset(static_cast<std::size_t>(J) + 1, 0);
  for (int j = 0; j < J; ++j) {
    count[static_cast<std::size_t>(j)] = std::max<long>(8, std::lround(n_points * weight[static_cast<std::size_t>(j)] / wsum));
    offset[static_cast<std::size_t>(j) + 1] = offset[static_cast<std::size_t>(j)] + count[static_cast<std::size_t>(j)];
  }
  const long total_points = offset.back();

  // per point: mean over its paths of the fine and coarse contributions
  std::vector<double> fine(static_cast<std::size_t>(total_points)), coarse(static_cast<std::size_t>(total_points));
  std::vector<int> stratum_of(static_cast<std::size_t>(total_points));
  for (int j = 0; j < J; ++j)
    for (long i = offset[static_cast<std::size_t>(j)]; i < offset[static_cast<std::size_t>(j) + 1]; ++i)
      stratum_of[static_cast<std::size_t>(i)] = j;

  parallel_for(static_cast<std::size_t>(total_points), sim.config().threads, [&](std::size_t i) {
    const int j = stratum_of[i];
    RngStream pr = stream.substream(exit_detail::kPointTag, i);
    // q from the coarea density within the stratum, then a uniform point on {delta = q}
    const double v0 = cum_volume(edges[static_cast<std::size_t>(j)]);
    const double v1 = cum_volume(edges[static_cast<std::size_t>(j) + 1]);
    const double target = v0 + pr.uniform() * (v1 - v0);
    double lo = edges[static_cast<std::size_t>(j)], hi = edges[static_cast<std::size_t>(j) + 1];
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cum_volume(mid) < target ? lo : hi) = mid;
    }
    const Vec x = D.sample_level_set(0.5 * (lo + hi), pr);
    double sf = 0.0, sc = 0.0;
    for (long k = 0; k < n_paths; ++k) {
      StablePath path = sim.path(x, step, stream.substream(exit_detail::kPathTag, i, static_cast<std::uint64_t>(k)));
      sf += remainder_contribution(sim, sim.first_exit(path, D, t, 1), x, t);
      sc += remainder_contribution(sim, sim.first_exit(path, D, t, 0), x, t);
    }
    fine[i] = sf / n_paths;
    coarse[i] = sc / n_paths;
  });

  double integral = 0.0, var = 0.0, diff = 0.0, diff_var = 0.0;
  for (int j = 0; j < J; ++j) {
    const auto b = static_cast<std::size_t>(offset[static_cast<std::size_t>(j)]);
    const auto n = static_cast<std::size_t>(count[static_cast<std::size_t>(j)]);
    const auto f = stats::mean_std(std::span<const double>(fine).subspan(b, n));
    std::vector<double> dlt(n);
    for (std::size_t i = 0; i < n; ++i) dlt[i] = fine[b + i] - coarse[b + i];
    const auto dd = stats::mean_std(dlt);
    const double V = vol[static_cast<std::size_t>(j)];
    integral += V * f.mean;
    var += V * V * f.std_error * f.std_error;
    diff += V * dd.mean;
    diff_var += V * V * dd.std_error * dd.std_error;
  }
  const double trunc_volume = cum_volume(q_min);
  integral += peak * trunc_volume;

  ZEstimate out;
  out.first_term = peak * m.volume;
  out.truncation_bound = peak * trunc_volume;
  out.q_min = q_min;
  out.r_smooth = m.r_smooth;
  out.strata = J;
  out.integral = {"integral_r_D", integral, std::sqrt(var), total_points * n_paths, stream.seed(), step, diff,
                  std::sqrt(diff_var)};
  out.z = {"Z", out.first_term - integral, std::sqrt(var), total_points * n_paths, stream.seed(), step, -diff,
           std::sqrt(diff_var)};
  return out;
}

}  // namespace stabletrace
