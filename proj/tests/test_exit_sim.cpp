#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stabletrace/exit_sim.hpp"
#include "stabletrace/ikeda_watanabe.hpp"

using namespace stabletrace;

namespace {

constexpr double kPi = std::numbers::pi;

// mean exit time of the unit ball from x
double getoor_mean(const StableParams& p, const Vec& x) {
  return std::tgamma(0.5 * p.d) / (std::pow(2.0, p.alpha) * std::tgamma(1.0 + 0.5 * p.alpha) *
                                   std::tgamma(0.5 * (p.d + p.alpha))) *
         std::pow(1.0 - x.norm2(), 0.5 * p.alpha);
}

// Dirichlet heat kernel on (0,1) at (x,x) for the generator d^2/dx^2
double interval_kernel(double t, double x) {
  double s = 0.0;
  for (int n = 1; n < 400; ++n) s += 2.0 * std::pow(std::sin(kPi * n * x), 2) * std::exp(-kPi * kPi * n * n * t);
  return s;
}

}  // namespace

TEST(FirstExit, HalfLineCrossingProbability) {
  // alpha = 2, d = 1: P^x(tau < t) = erfc(x / (2 sqrt t))
  const ExitSimulator sim({1, 2.0});
  const auto H = Domain::half_space(1, 0, 0.0);
  const double x0 = 0.3, t = 0.2;
  const RngStream root(41, 0);
  const int n = 20000;
  int hit = 0;
  for (int i = 0; i < n; ++i) hit += !sim.simulate_first_exit(H, Vec{x0}, t, 0.02, root.substream(i), 1).censored;
  const double p = std::erfc(x0 / (2.0 * std::sqrt(t)));
  EXPECT_NEAR(hit / static_cast<double>(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(FirstExit, GaussianDiskMeanExitTime) {
  const ExitSimulator sim({2, 2.0});
  const auto D = Domain::ball(Vec{0.0, 0.0}, 1.0);
  const auto e = estimate_mean_exit_time(sim, D, Vec{0.0, 0.0}, 50.0, 8000, 0.01, RngStream(42, 0));
  EXPECT_NEAR(e.mean, 0.25, 4.0 * e.std_error);
  EXPECT_LE(std::abs(e.bias_diagnostic), e.std_error);
}

TEST(FirstExit, StableBallMeanExitTime) {
  for (double alpha : {1.0, 1.5}) {
    const StableParams p{2, alpha};
    const ExitSimulator sim(p);
    const auto D = Domain::ball(Vec{0.0, 0.0}, 1.0);
    for (const Vec& x : {Vec{0.0, 0.0}, Vec{0.6, 0.0}}) {
      const auto e = estimate_mean_exit_time(sim, D, x, 50.0, 4000, 0.01, RngStream(43, 0));
      EXPECT_NEAR(e.mean, getoor_mean(p, x), 4.0 * e.std_error) << alpha << " " << x[0];
    }
  }
  // d = 1, alpha = 1.5 on (-1, 1)
  const StableParams p{1, 1.5};
  const auto e = estimate_mean_exit_time(ExitSimulator(p), Domain::interval(-1.0, 1.0), Vec{0.2}, 50.0, 4000, 0.01,
                                         RngStream(44, 0));
  EXPECT_NEAR(e.mean, getoor_mean(p, Vec{0.2}), 4.0 * e.std_error);
}

TEST(FirstExit, WholeSpaceNeverExits) {
  const ExitSimulator sim({2, 1.3});
  const auto W = Domain::whole_space(2);
  const auto r = sim.simulate_first_exit(W, Vec{0.0, 0.0}, 3.0, 0.1, RngStream(45, 0));
  EXPECT_TRUE(r.censored);
  const auto rd = estimate_rD(sim, 0.5, Vec{0.0, 0.0}, W, 200, 0.1, RngStream(45, 1));
  EXPECT_EQ(rd.mean, 0.0);
}

TEST(FirstExit, JumpExitsLeaveTheClosure) {
  const ExitSimulator sim({2, 1.2});
  const auto D = Domain::ball(Vec{0.0, 0.0}, 1.0);
  const RngStream root(46, 0);
  for (int i = 0; i < 500; ++i) {
    const auto r = sim.simulate_first_exit(D, Vec{0.5, 0.0}, 10.0, 0.01, root.substream(i));
    ASSERT_FALSE(r.censored);
    EXPECT_FALSE(r.boundary_hit);
    EXPECT_GT(r.exit_position.norm(), 1.0);
  }
}

TEST(FirstExit, RejectsStartOutside) {
  const ExitSimulator sim({2, 1.2});
  EXPECT_THROW(sim.simulate_first_exit(Domain::ball(Vec{0.0, 0.0}, 1.0), Vec{2.0, 0.0}, 1.0, 0.01, RngStream(1, 0)),
               std::domain_error);
  EXPECT_THROW(estimate_rD(sim, -1.0, Vec{0.0, 0.0}, Domain::ball(Vec{0.0, 0.0}, 1.0), 10, 0.01, RngStream(1, 0)),
               std::domain_error);
}

TEST(Determinism, SeedAndThreadCount) {
  ExitSimConfig one, three;
  three.threads = 3;
  const ExitSimulator a({2, 1.5}, one), b({2, 1.5}, three);
  const auto D = Domain::ball(Vec{0.0, 0.0}, 1.0);
  const auto ea = estimate_rD(a, 0.1, Vec{0.7, 0.0}, D, 300, 0.01, RngStream(47, 0));
  const auto eb = estimate_rD(b, 0.1, Vec{0.7, 0.0}, D, 300, 0.01, RngStream(47, 0));
  const auto ec = estimate_rD(a, 0.1, Vec{0.7, 0.0}, D, 300, 0.01, RngStream(47, 0));
  EXPECT_EQ(ea.mean, eb.mean);
  EXPECT_EQ(ea.std_error, eb.std_error);
  EXPECT_EQ(ea.bias_diagnostic, ec.bias_diagnostic);
  const auto ed = estimate_rD(a, 0.1, Vec{0.7, 0.0}, D, 300, 0.01, RngStream(48, 0));
  EXPECT_NE(ea.mean, ed.mean);
}

TEST(Remainder, GaussianBoxMatchesProductSeries) {
  // Dirichlet kernel of the square is the product of interval kernels
  const ExitSimulator sim({2, 2.0});
  const auto D = Domain::box(Vec{0.0, 0.0}, Vec{1.0, 1.0});
  const double t = 0.05;
  for (const Vec& x : {Vec{0.05, 0.5}, Vec{0.2, 0.3}, Vec{0.05, 0.05}}) {
    const auto r = estimate_rD(sim, t, x, D, 6000, 0.01, RngStream(49, 0));
    const double exact = 1.0 / (4.0 * kPi * t) - interval_kernel(t, x[0]) * interval_kernel(t, x[1]);
    EXPECT_NEAR(r.mean, exact, 4.0 * r.std_error + 1e-3 * exact) << x[0] << " " << x[1];
  }
}

TEST(Remainder, BoundedByFreeKernelAndDecaysInward) {
  const StableParams p{2, 1.5};
  const ExitSimulator sim(p);
  const auto D = Domain::ball(Vec{0.0, 0.0}, 1.0);
  const double t = 0.05;
  std::vector<double> delta, val;
  for (double q : {0.02, 0.05, 0.1, 0.2, 0.4, 0.8}) {
    const auto r = estimate_rD(sim, t, Vec{1.0 - q, 0.0}, D, 3000, 0.01, RngStream(50, 0));
    EXPECT_LE(r.mean, c1_constant(p) * std::pow(t, -2.0 / p.alpha));
    EXPECT_GE(r.mean, 0.0);
    delta.push_back(q);
    val.push_back(r.mean);
    // envelope min(t delta^{-d-alpha}, t^{-d/alpha}) up to a constant of order one
    EXPECT_LE(r.mean, 2.0 * std::min(t * std::pow(q, -2.0 - p.alpha), std::pow(t, -2.0 / p.alpha)));
  }
  std::vector<double> neg(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) neg[i] = -val[i];
  EXPECT_LT(stats::kendall_increasing(delta, neg).p_value, 0.05);
}

TEST(Remainder, DomainMonotonicityCoupled) {
  // D1 inside D2: r_{D1}(t,x,x) >= r_{D2}(t,x,x), compared path by path
  const ExitSimulator sim({2, 1.5});
  const auto D1 = Domain::ball(Vec{0.0, 0.0}, 1.0);
  const auto D2 = Domain::ball(Vec{0.2, 0.0}, 1.3);
  const Vec x{0.5, 0.1};
  const double t = 0.1;
  const RngStream root(51, 0);
  std::vector<double> diff(4000);
  for (std::size_t i = 0; i < diff.size(); ++i) {
    StablePath path = sim.path(x, 0.01, root.substream(i));
    const double a = remainder_contribution(sim, sim.first_exit(path, D1, t, 1), x, t);
    const double b = remainder_contribution(sim, sim.first_exit(path, D2, t, 1), x, t);
    diff[i] = a - b;
  }
  const auto m = stats::mean_std(diff);
  EXPECT_GE(m.mean, -3.0 * m.std_error);
}

TEST(Remainder, ScalingIdentity) {
  // r_{sD}(s^alpha t, s x, s x) = s^{-d} r_D(t, x, x)
  const StableParams p{2, 1.5};
  const ExitSimulator sim(p);
  const auto D = Domain::ball(Vec{0.0, 0.0}, 1.0);
  const double s = 2.0, t = 0.05;
  const Vec x{0.8, 0.0};
  const auto a = estimate_rD(sim, t, x, D, 4000, 0.01, RngStream(52, 0));
  const auto b = estimate_rD(sim, std::pow(s, p.alpha) * t, x * s, D.scaled(s), 4000, 0.01 * std::pow(s, p.alpha),
                             RngStream(52, 1));
  EXPECT_NEAR(std::pow(s, p.d) * b.mean, a.mean, 3.0 * std::hypot(std::pow(s, p.d) * b.std_error, a.std_error));
}

TEST(PartitionFunction, GaussianBoxAgainstProductSeries) {
  const ExitSimulator sim({2, 2.0});
  const auto D = Domain::box(Vec{0.0, 0.0}, Vec{1.0, 1.0});
  const double t = 0.1;
  const auto z = estimate_Z(sim, t, D, 1500, 2, 0.01, RngStream(53, 0));
  double a = 0.0;
  for (int n = 1; n < 100; ++n) a += std::exp(-kPi * kPi * n * n * t);
  EXPECT_NEAR(z.z.mean, a * a, 4.0 * z.z.std_error + z.truncation_bound);
  EXPECT_LT(z.z.mean, z.first_term);
  EXPECT_THROW(estimate_Z(sim, t, Domain::half_space(2), 10, 1, 0.01, RngStream(1, 0)), std::domain_error);
}

TEST(PartitionFunction, StableDiskBelowFirstTerm) {
  const StableParams p{2, 1.5};
  const ExitSimulator sim(p);
  const auto D = Domain::ball(Vec{0.0, 0.0}, 1.0);
  const auto z = estimate_Z(sim, 0.1, D, 800, 2, 0.0125, RngStream(54, 0));
  EXPECT_NEAR(z.first_term, c1_constant(p) * kPi * std::pow(0.1, -2.0 / 1.5), 1e-12);
  EXPECT_LT(z.z.mean + 3.0 * z.z.std_error, z.first_term);
  EXPECT_GT(z.z.mean, 0.0);
}

TEST(IkedaWatanabe, DiskToAnnulusSmallRun) {
  const ExitSimulator sim({2, 1.0});
  const auto r = validate_ikeda_watanabe(sim, Domain::ball(Vec{0.0, 0.0}, 1.0), Vec{0.0, 0.0},
                                         Domain::annulus(Vec{0.0, 0.0}, 2.0, 3.0), 0.0, 0.5, 3000, 0.01,
                                         RngStream(55, 0));
  EXPECT_NEAR(r.lhs.mean, r.rhs.mean, 4.0 * std::hypot(r.lhs.std_error, r.rhs.std_error));
  EXPECT_THROW(validate_ikeda_watanabe(ExitSimulator({2, 2.0}), Domain::ball(Vec{0.0, 0.0}, 1.0), Vec{0.0, 0.0},
                                       Domain::annulus(Vec{0.0, 0.0}, 2.0, 3.0), 0.0, 0.5, 10, 0.01, RngStream(1, 0)),
               std::domain_error);
}
