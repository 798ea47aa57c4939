#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stabletrace/spectral.hpp"

using namespace stabletrace;

namespace {

constexpr double kPi = std::numbers::pi;
const Domain kUnit = Domain::interval(0.0, 1.0);
const Domain kSquare = Domain::box(Vec{0.0, 0.0}, Vec{1.0, 1.0});

double square_trace(double t) {
  double a = 0.0;
  for (int n = 1; n < 200; ++n) a += std::exp(-kPi * kPi * n * n * t);
  return a * a;
}

}  // namespace

TEST(Interval, GaussianEigenvalues) {
  const double h = 1.0 / 2000;
  const auto s = eigen_spectrum(assemble_generator(kUnit, h, 2.0), 10);
  for (int n = 1; n <= 5; ++n) {
    // discrete oracle 4/h^2 sin^2(n pi h / 2), continuum pi^2 n^2
    const double discrete = 4.0 / (h * h) * std::pow(std::sin(n * kPi * h / 2.0), 2);
    EXPECT_NEAR(s.eigenvalues[n - 1], discrete, 1e-9 * discrete);
    EXPECT_NEAR(s.eigenvalues[n - 1], kPi * kPi * n * n, 0.01 * kPi * kPi * n * n);
  }
}

TEST(Interval, CauchyGroundState) {
  // lambda_1 of the Cauchy process on (0, 1): twice the (-1, 1) value 1.1577738
  const auto s = eigen_spectrum(assemble_generator(kUnit, 1.0 / 500, 1.0), 4);
  EXPECT_NEAR(s.eigenvalues[0], 2.3155476, 2e-3 * 2.3155476);
}

TEST(Interval, ContinuityAtTwo) {
  const double l2 = eigen_spectrum(assemble_generator(kUnit, 1.0 / 200, 2.0), 1).eigenvalues[0];
  const double l199 = eigen_spectrum(assemble_generator(kUnit, 1.0 / 200, 1.99), 1).eigenvalues[0];
  EXPECT_LT(l199, l2);
  EXPECT_NEAR(l199, l2, 0.02 * l2);
}

TEST(Interval, RowSumMatchesExteriorMass) {
  // at the midpoint, the row sum is -int_{outside} nu = -(A/alpha) 2 (1/2)^{-alpha}
  const double alpha = 1.5;
  const StableParams p{1, alpha};
  const double want = -levy_density(1.0, p) / alpha * 2.0 * std::pow(0.5, -alpha);
  double prev = 1e300;
  for (double h : {1.0 / 50, 1.0 / 200, 1.0 / 800}) {
    const auto G = assemble_generator(kUnit, h, alpha);
    const double err = std::abs(G.row_sum(G.size() / 2) - want);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 0.01 * std::abs(want));
}

TEST(Generator, SymmetricSubMarkovAndPositive) {
  for (const auto& D : {kUnit, kSquare}) {
    const auto G = assemble_generator(D, 1.0 / 20, 1.3);
    const Eigen::MatrixXd M = G.dense();
    EXPECT_LT((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-12 * M.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      EXPECT_LT(M(i, i), 0.0);
      EXPECT_LE(G.row_sum(i), 0.0);
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        if (i != j) EXPECT_GT(M(i, j), 0.0);
    }
    const auto s = eigen_spectrum(G);
    EXPECT_GT(s.eigenvalues.front(), 0.0);
    EXPECT_TRUE(std::is_sorted(s.eigenvalues.begin(), s.eigenvalues.end()));
  }
}

TEST(Generator, RejectsUnsupportedInput) {
  EXPECT_THROW(assemble_generator(Domain::ball(Vec{0.0, 0.0}, 1.0), 0.05, 1.5), std::domain_error);
  EXPECT_THROW(assemble_generator(kUnit, 0.3, 1.5), std::domain_error);
  EXPECT_THROW(assemble_generator(kUnit, 0.25, 1.5), std::domain_error);
  EXPECT_THROW(assemble_generator(kUnit, -0.01, 1.5), std::domain_error);
}

TEST(Box, ParitySectorsMatchFullSolve) {
  const auto G = assemble_generator(kSquare, 1.0 / 20, 1.5);
  const Eigen::VectorXd full = spectral_detail::solve_symmetric(-G.dense());
  const auto s = eigen_spectrum(G);
  ASSERT_EQ(static_cast<Eigen::Index>(s.eigenvalues.size()), full.size());
  for (Eigen::Index i = 0; i < full.size(); ++i) EXPECT_NEAR(s.eigenvalues[i], full(i), 1e-9 * full(i));
}

TEST(Box, KroneckerSumMatchesFullSolve) {
  const auto G = assemble_generator(kSquare, 1.0 / 20, 2.0);
  const Eigen::VectorXd full = spectral_detail::solve_symmetric(-G.dense());
  const auto s = eigen_spectrum(G, 120);
  for (int i = 0; i < 120; ++i) EXPECT_NEAR(s.eigenvalues[i], full(i), 1e-9 * full(i));
}

TEST(Box, GaussianGroundStateAndTrace) {
  const auto s = eigen_spectrum(assemble_generator(kSquare, 1.0 / 64, 2.0), 20);
  EXPECT_NEAR(s.eigenvalues[0], 2.0 * kPi * kPi, 0.01 * 2.0 * kPi * kPi);
  const auto r = refined_trace(kSquare, 1.0 / 200, 2.0, 0.1);
  EXPECT_LE(std::abs(r.value - square_trace(0.1)), r.truncation_bound + r.discretization_error);
  EXPECT_LT(r.truncation_bound, 1e-8);
}

TEST(Trace, RefusesSmallTimes) {
  const auto s = eigen_spectrum(assemble_generator(kSquare, 1.0 / 32, 2.0), 50);
  EXPECT_GT(trace_t_min(s, 1e-8), 0.01);
  try {
    trace_from_spectrum(s, 0.01);
    FAIL() << "expected a refusal";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("t_min"), std::string::npos);
  }
  const double t = trace_t_min(s, 1e-8) * 1.01;
  EXPECT_LE(trace_from_spectrum(s, t).truncation_bound, 1e-8);
}

TEST(Counting, FunctionAndWeylLaw) {
  const auto s = eigen_spectrum(assemble_generator(kSquare, 1.0 / 400, 2.0), 2000);
  EXPECT_EQ(counting_function(s, s.eigenvalues[0]), 1);
  EXPECT_EQ(counting_function(s, 0.5 * s.eigenvalues[0]), 0);
  EXPECT_THROW(counting_function(s, 2.0 * s.eigenvalues.back()), std::domain_error);
  EXPECT_NEAR(counting_slope(s), 1.0, 0.05);
  // Dirichlet boundary term pulls N below the Weyl count: ratio below 1 but approaching it
  const double top = karamata_ratio(s, s.eigenvalues.back());
  EXPECT_LT(top, 1.0);
  EXPECT_GT(top, karamata_ratio(s, s.eigenvalues[200]));
  EXPECT_THROW(counting_slope(eigen_spectrum(assemble_generator(kSquare, 1.0 / 32, 2.0), 3)), std::domain_error);
}

TEST(GridRefinement, GroundStateChange) {
  const auto g = lambda1_convergence(kUnit, 1.0 / 100, 2.0);
  EXPECT_FALSE(g.flagged);
  EXPECT_LT(g.relative_change, 1e-3);
  const auto coarse = lambda1_convergence(kSquare, 1.0 / 20, 1.5);
  EXPECT_GT(coarse.relative_change, 0.0);
  EXPECT_EQ(coarse.flagged, coarse.relative_change >= 0.02);
}
