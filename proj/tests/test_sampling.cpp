#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stabletrace/quadrature.hpp"
#include "stabletrace/sampling.hpp"
#include "stabletrace/stats.hpp"

using namespace stabletrace;

TEST(PositiveStable, LaplaceTransform) {
  for (double beta : {0.3, 0.5, 0.75, 0.95}) {
    RngStream r(21, static_cast<std::uint64_t>(beta * 100));
    std::vector<double> s(40000);
    for (auto& v : s) v = sample_positive_stable(beta, r);
    for (double lam : {0.25, 1.0, 3.0}) {
      std::vector<double> e(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) e[i] = std::exp(-lam * s[i]);
      const auto m = stats::mean_std(e);
      EXPECT_NEAR(m.mean, std::exp(-std::pow(lam, beta)), 5.0 * m.std_error) << beta << " " << lam;
    }
  }
}

TEST(PositiveStable, HalfIsLevyDistribution) {
  // beta = 1/2: S = 1 / (2 Z^2), P(S <= s) = erfc(1 / (2 sqrt s))
  RngStream r(22, 0);
  std::vector<double> s(20000);
  for (auto& v : s) v = sample_positive_stable(0.5, r);
  EXPECT_GT(stats::ks_one_sample(s, [](double x) { return std::erfc(0.5 / std::sqrt(x)); }).p_value, 1e-3);

  const PositiveStableDensity f(0.5);
  for (double x : {0.02, 0.1, 0.5, 2.0, 30.0, 1e4}) {
    const double want = -std::log(2.0 * std::sqrt(std::numbers::pi)) - 1.5 * std::log(x) - 0.25 / x;
    EXPECT_NEAR(f.log_density(x), want, 1e-7) << x;
    EXPECT_NEAR(f.log_density_direct(x), want, 1e-9) << x;
  }
}

TEST(PositiveStable, DensityNormalized) {
  for (double beta : {0.35, 0.75}) {
    const PositiveStableDensity f(beta);
    std::vector<double> breaks;
    for (double b = f.support_floor(); b < 1e8; b *= 1.3) breaks.push_back(b);
    const auto q = quad::over_panels([&](double s) { return std::exp(f.log_density(s)); }, breaks, 1e-10);
    // tail beyond the last break: f ~ Gamma(beta+1) sin(pi beta)/pi s^{-beta-1}
    const double tail = std::tgamma(beta + 1.0) * std::sin(std::numbers::pi * beta) / std::numbers::pi *
                        std::pow(breaks.back(), -beta) / beta;
    EXPECT_NEAR(q.value + tail, 1.0, 1e-5) << beta;
  }
}

TEST(StableIncrement, CharacteristicFunction) {
  for (double alpha : {0.7, 1.2, 1.8, 2.0}) {
    const StableParams p{2, alpha};
    RngStream r(23, static_cast<std::uint64_t>(alpha * 10));
    const Vec xi{0.7, -0.3};
    const double dt = 0.6;
    std::vector<double> c(40000);
    for (auto& v : c) v = std::cos(dot(xi, sample_stable_increment(dt, p, r).jump));
    const auto m = stats::mean_std(c);
    EXPECT_NEAR(m.mean, std::exp(-dt * std::pow(xi.norm(), alpha)), 5.0 * m.std_error) << alpha;
  }
}

TEST(StableIncrement, CauchyMarginal) {
  RngStream r(24, 0);
  const StableParams p{1, 1.0};
  const double dt = 2.5;
  std::vector<double> x(20000);
  for (auto& v : x) v = sample_stable_increment(dt, p, r).jump[0];
  EXPECT_GT(stats::ks_one_sample(x, [&](double y) { return 0.5 + std::atan(y / dt) / std::numbers::pi; }).p_value, 1e-3);
}

TEST(StableIncrement, SelfSimilarity) {
  const StableParams p{3, 1.4};
  RngStream r(25, 0);
  std::vector<double> a(10000), b(10000);
  const double t = 0.05;
  for (auto& v : a) v = sample_stable_increment(t, p, r).jump.norm();
  for (auto& v : b) v = std::pow(t, 1.0 / p.alpha) * sample_stable_increment(1.0, p, r).jump.norm();
  EXPECT_GT(stats::ks_two_sample(a, b).p_value, 1e-3);
}

TEST(SubordinatorBridge, HalvesHaveHalfStepLaw) {
  for (double alpha : {0.8, 1.5}) {
    const SubordinatorBridge bridge(alpha);
    RngStream r(26, static_cast<std::uint64_t>(alpha * 10));
    const double dt = 0.3;
    std::vector<double> first(20000), second(20000), direct(20000);
    for (std::size_t i = 0; i < first.size(); ++i) {
      const double a = sample_subordinator_increment(dt, alpha, r);
      const double u = bridge.split_fraction(a, dt, r);
      ASSERT_GT(u, 0.0);
      ASSERT_LT(u, 1.0);
      first[i] = a * u;
      second[i] = a * (1.0 - u);
      direct[i] = sample_subordinator_increment(0.5 * dt, alpha, r);
    }
    EXPECT_GT(stats::ks_two_sample(first, direct).p_value, 1e-3) << alpha;
    EXPECT_GT(stats::ks_two_sample(second, direct).p_value, 1e-3) << alpha;
  }
}

TEST(BallExit, HarmonicMeasureChiSquare) {
  // cells: |y| bands crossed with the sign of y_0; expected mass by polar quadrature of the density
  const StableParams p{2, 1.2};
  const Vec x{0.5, 0.0}, c{0.0, 0.0};
  const std::vector<double> bands{1.0, 1.05, 1.2, 1.5, 2.0, 4.0, 1e7};
  const int nb = static_cast<int>(bands.size()) - 1;
  std::vector<double> expected(2 * nb, 0.0);
  const int nth = 256;
  const double e = 2.0 / (2.0 - p.alpha);
  for (int j = 0; j < nth; ++j) {
    const double th = 2.0 * std::numbers::pi * (j + 0.5) / nth;
    const int side = std::cos(th) > 0 ? 1 : 0;
    auto f = [&](double u) {
      const double s = 1.0 + std::pow(u, e);
      const Vec y{s * std::cos(th), s * std::sin(th)};
      return ball_harmonic_measure_density(x, c, 1.0, y, p) * s * e * std::pow(u, e - 1.0);
    };
    for (int k = 0; k < nb; ++k) {
      double lo = std::pow(bands[k] - 1.0, 1.0 / e), hi = std::pow(bands[k + 1] - 1.0, 1.0 / e);
      double head = 0.0;
      if (k == 0) {
        lo = std::pow(1e-8, 1.0 / e);
        head = lo * f(lo);
      }
      std::vector<double> br{lo};
      for (double b = 2.0 * lo; b < hi; b *= 2.0) br.push_back(b);
      br.push_back(hi);
      expected[side * nb + k] += (head + quad::over_panels(f, br, 1e-9).value) * 2.0 * std::numbers::pi / nth;
    }
  }
  double total = 0.0;
  for (double v : expected) total += v;
  ASSERT_NEAR(total, 1.0, 2e-3);

  RngStream r(27, 0);
  const int n = 40000;
  std::vector<double> obs(2 * nb, 0.0);
  for (int i = 0; i < n; ++i) {
    const Vec y = sample_ball_exit_position(x, c, 1.0, p, r);
    const double rho = y.norm();
    ASSERT_GT(rho, 1.0);
    const int k = static_cast<int>(std::upper_bound(bands.begin(), bands.end(), rho) - bands.begin()) - 1;
    obs[(y[0] > 0 ? 1 : 0) * nb + std::min(k, nb - 1)] += 1.0;
  }
  for (auto& v : expected) v *= n / total;
  EXPECT_GT(stats::chi_square(obs, expected).p_value, 1e-3);
}

TEST(BallExit, RejectsBadInput) {
  RngStream r(28, 0);
  EXPECT_THROW(sample_ball_exit_position(Vec{2.0, 0.0}, Vec{0.0, 0.0}, 1.0, {2, 1.0}, r), std::domain_error);
  EXPECT_THROW(sample_ball_exit_position(Vec{0.0, 0.0}, Vec{0.0, 0.0}, 1.0, {2, 2.0}, r), std::domain_error);
  EXPECT_THROW(sample_subordinator_increment(-1.0, 1.0, r), std::domain_error);
  EXPECT_THROW(PositiveStableDensity(1.0), std::domain_error);
}

TEST(BallExit, RadialLawFromCentre) {
  // closed-form radial CDF against the density integrated along a ray
  const StableParams p{3, 0.9};
  const Vec c(3);
  auto density_ray = [&](double s) {
    return ball_harmonic_measure_density(c, c, 1.0, Vec{s, 0.0, 0.0}, p) * unit_sphere_area(3) * s * s;
  };
  const double e = 2.0 / (2.0 - p.alpha);
  auto f = [&](double u) { return density_ray(1.0 + std::pow(u, e)) * e * std::pow(u, e - 1.0); };
  const double u0 = std::pow(1e-9, 1.0 / e);
  std::vector<double> br{u0};
  for (double b = 2.0 * u0; b < std::pow(2.0, 1.0 / e); b *= 2.0) br.push_back(b);
  br.push_back(std::pow(2.0, 1.0 / e));
  EXPECT_NEAR(u0 * f(u0) + quad::over_panels(f, br, 1e-11).value, ball_exit_radius_cdf(3.0, 1.0, p.alpha), 1e-6);
  EXPECT_NEAR(ball_exit_radius_quantile(ball_exit_radius_cdf(1.7, 1.0, 0.9), 1.0, 0.9), 1.7, 1e-10);

  RngStream r(29, 0);
  std::vector<double> rad(20000);
  for (auto& v : rad) v = sample_ball_exit_position(c, c, 1.0, p, r).norm();
  EXPECT_GT(stats::ks_one_sample(rad, [&](double s) { return ball_exit_radius_cdf(s, 1.0, p.alpha); }).p_value, 1e-3);
}
