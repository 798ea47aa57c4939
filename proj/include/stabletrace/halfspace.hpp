#pragma once

// f_H(q) = r_H(1, q e_1, q e_1) for the half-space H = {x_1 > 0} and the constant
// C2(d, alpha) = int_0^inf f_H(q) dq.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "stabletrace/exit_sim.hpp"
#include "stabletrace/geometry.hpp"
#include "stabletrace/stable_kernel.hpp"
#include "stabletrace/stats.hpp"

namespace stabletrace {

/// Closed form at alpha = 2 (reflection principle): f_H(q) = (4 pi)^{-d/2} exp(-q^2).
inline double f_H_gaussian(double q, int d) { return std::pow(4.0 * std::numbers::pi, -0.5 * d) * std::exp(-q * q); }

/// C2(d, 2) = (4 pi)^{-d/2} sqrt(pi) / 2.
inline double c2_gaussian(int d) { return std::pow(4.0 * std::numbers::pi, -0.5 * d) * 0.5 * std::sqrt(std::numbers::pi); }

namespace halfspace_detail {

// Paths start at the origin; the half-space started at distance q is {x_1 > -q}.
// One path therefore serves every q (common random numbers).
struct PathValues {
  std::vector<double> fine;
  std::vector<double> coarse;
};

inline PathValues path_values(const ExitSimulator& sim, const std::vector<double>& q, double step, RngStream rng) {
  const int d = sim.params().d;
  StablePath path = sim.path(Vec(d), step, rng);
  PathValues v{std::vector<double>(q.size()), std::vector<double>(q.size())};
  const Vec origin(d);
  for (std::size_t j = 0; j < q.size(); ++j) {
    const Domain H = Domain::half_space(d, 0, -q[j]);
    v.fine[j] = remainder_contribution(sim, sim.first_exit(path, H, 1.0, 1), origin, 1.0);
    v.coarse[j] = remainder_contribution(sim, sim.first_exit(path, H, 1.0, 0), origin, 1.0);
  }
  return v;
}

}  // namespace halfspace_detail

/// Monte Carlo estimate of f_H(q) at time 1.
inline MCEstimate f_H(const ExitSimulator& sim, double q, long n_paths, double step, const RngStream& stream) {
  if (!(q > 0.0)) throw std::domain_error("f_H: q must be positive");
  exit_detail::PairedSamples s{std::vector<double>(static_cast<std::size_t>(n_paths)),
                               std::vector<double>(static_cast<std::size_t>(n_paths))};
  const std::vector<double> qs{q};
  parallel_for(static_cast<std::size_t>(n_paths), sim.config().threads, [&](std::size_t i) {
    const auto v = halfspace_detail::path_values(sim, qs, step, stream.substream(i));
    s.fine[i] = v.fine[0];
    s.coarse[i] = v.coarse[0];
  });
  return exit_detail::summarize("f_H", s, stream.seed(), step);
}

/// Geometric grid of n nodes from q_min to q_max.
inline std::vector<double> geometric_grid(double q_min, double q_max, int n) {
  if (!(q_min > 0.0 && q_max > q_min && n >= 2)) throw std::domain_error("geometric_grid: need 0 < q_min < q_max, n >= 2");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = q_min * std::pow(q_max / q_min, static_cast<double>(i) / (n - 1));
  return g;
}

struct C2Node {
  double q = 0.0;
  double f = 0.0;
  double std_error = 0.0;
};

struct C2Result {
  double value = 0.0;
  double std_error = 0.0;
  double quadrature_error = 0.0;
  double tail_bound = 0.0;
  double near_origin_bound = 0.0;
  double total_error = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double tail_constant = 0.0;  ///< fitted c in f_H(q) <= c q^{-d-alpha}
  bool tail_fit_unstable = false;
  double bias_diagnostic = 0.0;
  double bias_std_error = 0.0;
  int d = 0;
  double alpha = 0.0;
  long long n_paths = 0;
  std::uint64_t seed = 0;
  double step = 0.0;
  std::vector<C2Node> nodes;
};

namespace halfspace_detail {

inline std::vector<double> trapezoid_weights(const std::vector<double>& q) {
  std::vector<double> w(q.size(), 0.0);
  for (std::size_t j = 0; j + 1 < q.size(); ++j) {
    const double h = q[j + 1] - q[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

}  // namespace halfspace_detail

/// C2 by the trapezoid rule over q_grid of the Monte Carlo f_H, plus the near-origin piece
/// (0, q_min] (f_H increases to C1 at 0) and the tail beyond q_max from the fitted power law.
inline C2Result compute_C2(const ExitSimulator& sim, const std::vector<double>& q_grid, long n_paths, double step,
                           const RngStream& stream) {
  const StableParams& p = sim.params();
  const std::size_t J = q_grid.size();
  if (J < 3) throw std::domain_error("compute_C2: need at least three grid nodes");
  for (std::size_t j = 1; j < J; ++j)
    if (!(q_grid[j] > q_grid[j - 1] && q_grid[0] > 0.0)) throw std::domain_error("compute_C2: grid must be increasing and positive");

  std::vector<double> fine(static_cast<std::size_t>(n_paths) * J), coarse(static_cast<std::size_t>(n_paths) * J);
  parallel_for(static_cast<std::size_t>(n_paths), sim.config().threads, [&](std::size_t i) {
    const auto v = halfspace_detail::path_values(sim, q_grid, step, stream.substream(i));
    std::copy(v.fine.begin(), v.fine.end(), fine.begin() + static_cast<std::ptrdiff_t>(i * J));
    std::copy(v.coarse.begin(), v.coarse.end(), coarse.begin() + static_cast<std::ptrdiff_t>(i * J));
  });

  C2Result r;
  r.d = p.d;
  r.alpha = p.alpha;
  r.n_paths = n_paths;
  r.seed = stream.seed();
  r.step = step;
  r.q_min = q_grid.front();
  r.q_max = q_grid.back();
  const double c1 = c1_constant(p);

  std::vector<double> col(static_cast<std::size_t>(n_paths));
  for (std::size_t j = 0; j < J; ++j) {
    for (long i = 0; i < n_paths; ++i) col[static_cast<std::size_t>(i)] = fine[static_cast<std::size_t>(i) * J + j];
    const auto ms = stats::mean_std(col);
    r.nodes.push_back({q_grid[j], ms.mean, ms.std_error});
  }

  // per-path integrals give the Monte Carlo error with the q-correlation included
  const auto w = halfspace_detail::trapezoid_weights(q_grid);
  std::vector<double> coarse_grid;
  for (std::size_t j = 0; j < J; j += 2) coarse_grid.push_back(q_grid[j]);
  const bool odd = (J % 2 == 1);
  const auto w2 = halfspace_detail::trapezoid_weights(coarse_grid);
  std::vector<double> per_path(static_cast<std::size_t>(n_paths)), diff(static_cast<std::size_t>(n_paths));
  for (long i = 0; i < n_paths; ++i) {
    double s = 0.0, sc = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      s += w[j] * fine[static_cast<std::size_t>(i) * J + j];
      sc += w[j] * coarse[static_cast<std::size_t>(i) * J + j];
    }
    per_path[static_cast<std::size_t>(i)] = s;
    diff[static_cast<std::size_t>(i)] = s - sc;
  }
  const auto integral = stats::mean_std(per_path);
  const auto bias = stats::mean_std(diff);
  r.bias_diagnostic = bias.mean;
  r.bias_std_error = bias.std_error;

  double half = 0.0;
  for (std::size_t j = 0, k = 0; j < J; j += 2, ++k) half += w2[k] * r.nodes[j].f;
  if (!odd) half += 0.5 * (q_grid[J - 1] - q_grid[J - 2]) * (r.nodes[J - 2].f + r.nodes[J - 1].f);
  r.quadrature_error = std::abs(integral.mean - half) / 3.0;

  // (0, q_min]: f_H lies between f_H(q_min) and C1
  const double near = 0.5 * r.q_min * (c1 + r.nodes.front().f);
  r.near_origin_bound = c1 * r.q_min;

  const double expo = p.d + p.alpha;
  if (p.is_gaussian()) {
    r.tail_constant = c1;
    r.tail_bound = c1 * 0.5 * std::sqrt(std::numbers::pi) * std::erfc(r.q_max);
  } else {
    // envelope c = max f q^{d+alpha} over q >= 2, also over two halves of that range
    auto window = [&](double lo, double hi) {
      double c = 0.0;
      for (const auto& n : r.nodes)
        if (n.q >= lo && n.q <= hi) c = std::max(c, n.f * std::pow(n.q, expo));
      return c;
    };
    const double mid = std::sqrt(2.0 * r.q_max);
    const double c_all = window(2.0, r.q_max);
    const double c_lo = window(2.0, mid);
    const double c_hi = window(mid, r.q_max);
    r.tail_constant = c_all;
    r.tail_fit_unstable = !(c_all > 0.0) || std::abs(c_lo - c_hi) > 0.25 * c_all;
    r.tail_bound = c_all * std::pow(r.q_max, 1.0 - expo) / (expo - 1.0);
  }

  r.value = near + integral.mean + r.tail_bound;
  r.std_error = integral.std_error;
  r.total_error = r.std_error + r.quadrature_error + r.tail_bound + r.near_origin_bound;
  return r;
}

inline C2Result compute_C2(const ExitSimulator& sim, long n_paths, double step, const RngStream& stream,
                           double q_max = 8.0) {
  return compute_C2(sim, geometric_grid(0.01, q_max, 40), n_paths, step, stream);
}

}  // namespace stabletrace
