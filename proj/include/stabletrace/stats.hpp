#pragma once

// Small statistical toolkit used by estimators and by the statistical tests.

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "stabletrace/core.hpp"

namespace stabletrace::stats {

struct MeanStd {
  double mean = 0.0;
  double std_error = 0.0;
  double std_dev = 0.0;
  long long n = 0;
};

/// Mean and standard error with fixed-order summation.
inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd r;
  r.n = static_cast<long long>(xs.size());
  if (xs.empty()) return r;
  r.mean = pairwise_sum(xs) / r.n;
  std::vector<double> dev(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) dev[i] = (xs[i] - r.mean) * (xs[i] - r.mean);
  const double ss = pairwise_sum(dev);
  r.std_dev = (r.n > 1) ? std::sqrt(ss / (r.n - 1)) : 0.0;
  r.std_error = r.std_dev / std::sqrt(static_cast<double>(r.n));
  return r;
}

/// Asymptotic Kolmogorov tail P(K > lambda).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the Stephens small-sample correction.
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(i / na - j / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  return {dmax, kolmogorov_tail((sq + 0.12 + 0.11 / sq) * dmax)};
}

/// One-sample KS test against a continuous CDF.
template <class Cdf>
TestResult ks_one_sample(std::vector<double> a, Cdf&& cdf) {
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    dmax = std::max({dmax, (i + 1) / n - f, f - i / n});
  }
  const double sq = std::sqrt(n);
  return {dmax, kolmogorov_tail((sq + 0.12 + 0.11 / sq) * dmax)};
}

/// Pearson chi-square goodness of fit; expected counts must be positive.
inline TestResult chi_square(std::span<const double> observed, std::span<const double> expected, int fitted_params = 0) {
  if (observed.size() != expected.size() || observed.size() < 2)
    throw std::invalid_argument("chi_square: mismatched or too few cells");
  double x2 = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw std::invalid_argument("chi_square: expected count must be positive");
    x2 += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  }
  const double dof = static_cast<double>(observed.size()) - 1.0 - fitted_params;
  return {x2, boost::math::gamma_q(0.5 * dof, 0.5 * x2)};
}

/// Rayleigh test for uniformity of angles on the circle (large-sample approximation
/// with the second-order correction).
inline TestResult rayleigh(std::span<const double> angles) {
  const double n = static_cast<double>(angles.size());
  double c = 0.0, s = 0.0;
  for (double a : angles) {
    c += std::cos(a);
    s += std::sin(a);
  }
  const double rbar = std::sqrt(c * c + s * s) / n;
  const double z = n * rbar * rbar;
  const double p = std::exp(-z) * (1.0 + (2.0 * z - z * z) / (4.0 * n) -
                                   (24.0 * z - 132.0 * z * z + 76.0 * z * z * z - 9.0 * z * z * z * z) / (288.0 * n * n));
  return {z, std::clamp(p, 0.0, 1.0)};
}

/// Kendall tau-a between x and y; the p-value is one-sided for an increasing trend,
/// exact by enumeration of permutations for n <= 9 and normal-approximated otherwise.
inline TestResult kendall_increasing(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("kendall_increasing: need at least two paired values");
  auto score = [&](const std::vector<std::size_t>& perm) {
    long s = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = x[i] - x[j];
        const double dy = y[perm[i]] - y[perm[j]];
        s += (dx * dy > 0) - (dx * dy < 0);
      }
    return s;
  };
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const long s_obs = score(perm);
  const double pairs = 0.5 * n * (n - 1);
  TestResult r;
  r.statistic = s_obs / pairs;
  if (n <= 9) {
    long count = 0, total = 0;
    do {
      ++total;
      if (score(perm) >= s_obs) ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    r.p_value = static_cast<double>(count) / total;
  } else {
    const double var = n * (n - 1.0) * (2.0 * n + 5.0) / 18.0;
    r.p_value = 0.5 * std::erfc((s_obs - 1.0) / std::sqrt(2.0 * var));
  }
  return r;
}

}  // namespace stabletrace::stats
