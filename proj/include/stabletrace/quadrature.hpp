#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "stabletrace/core.hpp"

namespace stabletrace::quad {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Integrates f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(mid + half * nodes[i]);
    return s * half;
  }
};

/// Newton iteration on the Legendre recurrence.
inline GaussRule gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const int m = (n + 1) / 2;
  for (int i = 1; i <= m; ++i) {
    double z = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    rule.nodes[static_cast<std::size_t>(i - 1)] = -z;
    rule.nodes[static_cast<std::size_t>(n - i)] = z;
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[static_cast<std::size_t>(i - 1)] = w;
    rule.weights[static_cast<std::size_t>(n - i)] = w;
  }
  return rule;
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;  ///< integral of |f|, for cancellation diagnostics
};

/// Adaptive Gauss-Kronrod (G10/K21) on a finite interval.
template <class F>
QuadResult adaptive(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 18) {
  QuadResult r;
  r.value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, max_depth, rel_tol, &r.error,
                                                                          &r.l1);
  return r;
}

/// Adaptive integration over consecutive panels [b_0, b_1], [b_1, b_2], ...
template <class F>
QuadResult over_panels(F&& f, const std::vector<double>& breaks, double rel_tol = 1e-12, unsigned max_depth = 8) {
  QuadResult total;
  CompensatedSum sum;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i + 1] > breaks[i])) continue;
    const QuadResult p = adaptive(f, breaks[i], breaks[i + 1], rel_tol, max_depth);
    sum.add(p.value);
    total.error += p.error;
    total.l1 += p.l1;
  }
  total.value = sum.value();
  return total;
}

}  // namespace stabletrace::quad
