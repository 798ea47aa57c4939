#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "stabletrace/trace.hpp"

using namespace stabletrace;

namespace {

KeyValueConfig parse(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

// three-term heat trace of the unit disk for the generator Laplacian:
//   Z(t) = |D|/(4 pi t) - |dD|/(8 sqrt(pi t)) + 1/6 + O(sqrt t)
TraceCurve synthetic_disk_curve(double err) {
  TraceCurve c;
  c.domain = Domain::ball(Vec{0.0, 0.0}, 1.0);
  c.params = StableParams{2, 2.0};
  c.c2 = c2_gaussian(2);
  for (double t : {0.02, 0.01, 0.005, 0.0025}) {
    TraceRow r;
    r.t = t;
    r.z_est = std::numbers::pi / (4.0 * std::numbers::pi * t) - 2.0 * std::numbers::pi / (8.0 * std::sqrt(std::numbers::pi * t)) +
              1.0 / 6.0;
    r.z_err = err;
    c.rows.push_back(r);
  }
  complete_rows(c);
  return c;
}

}  // namespace

TEST(Config, ParsesCommentsAndOverrides) {
  const auto c = parse("# experiment\nalpha = 1.5\n\n domain=disk  # unit disk\nalpha=1.25\nt_grid = 0.4, 0.2,0.1\n");
  EXPECT_DOUBLE_EQ(c.get_double("alpha", 0.0), 1.25);
  EXPECT_EQ(c.get("domain", ""), "disk");
  EXPECT_EQ(c.get_list("t_grid", {}), (std::vector<double>{0.4, 0.2, 0.1}));
  EXPECT_EQ(c.get_int("points", 17), 17);
  EXPECT_TRUE(parse("x=yes").get_bool("x", false));
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse("alpha 1.5\n"), ConfigError);
  EXPECT_THROW(parse("=3\n"), ConfigError);
  EXPECT_THROW(parse("alpha=1.5x").get_double("alpha", 0.0), ConfigError);
  EXPECT_THROW(parse("n=2.5").get_int("n", 0), ConfigError);
  EXPECT_THROW(parse("b=maybe").get_bool("b", false), ConfigError);
  EXPECT_THROW(parse("l=1,x").get_list("l", {}), ConfigError);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/config.txt"), ConfigError);
}

TEST(Config, HashIgnoresOrderAndComments) {
  const auto a = parse("alpha=1.5\nseed=3\n");
  const auto b = parse("# c\nseed=3\nalpha=1.5\n");
  const auto c = parse("alpha=1.5\nseed=4\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Config, Domains) {
  EXPECT_EQ(domain_from_config(parse("")).name(), "ball");
  const auto ann = domain_from_config(parse("domain=annulus\nr_inner=1\nr_outer=3\ncenter=1,1"));
  EXPECT_NEAR(ann.measures().volume, 8.0 * std::numbers::pi, 1e-12);
  EXPECT_TRUE(ann.contains(Vec{3.0, 1.0}));
  EXPECT_EQ(domain_from_config(parse("domain=box\nside=2")).measures().volume, 4.0);
  EXPECT_EQ(domain_from_config(parse("domain=interval\nd=1")).dim(), 1);
  EXPECT_THROW(domain_from_config(parse("domain=torus")), ConfigError);
  EXPECT_THROW(domain_from_config(parse("domain=disk\nd=3")), ConfigError);
  EXPECT_THROW(domain_from_config(parse("domain=ball\nradius=-1")), ConfigError);
  EXPECT_THROW(domain_from_config(parse("center=1,2,3")), ConfigError);
}

TEST(Config, ExperimentValidation) {
  const auto e = experiment_from_config(parse("alpha=1.5\nt_grid=0.2,0.1\npoints=100\nseed=9"));
  EXPECT_EQ(e.points, 100);
  EXPECT_EQ(e.seed, 9u);
  EXPECT_EQ(e.t_grid.size(), 2u);
  EXPECT_THROW(experiment_from_config(parse("alpha=2.5")), ConfigError);
  EXPECT_THROW(experiment_from_config(parse("t_grid=0.1,0.2")), ConfigError);
  EXPECT_THROW(experiment_from_config(parse("t_grid=0.1,-0.2")), ConfigError);
  EXPECT_THROW(experiment_from_config(parse("step=0")), ConfigError);
  EXPECT_THROW(experiment_from_config(parse("points=2")), ConfigError);
  EXPECT_THROW(experiment_from_config(parse("threads=0")), ConfigError);
}

TEST(Guard, TwoTermPreconditions) {
  EXPECT_NO_THROW(check_asymptotic_regime(experiment_from_config(parse("alpha=1.5\nt_grid=0.2,0.1"))));
  // t^{1/alpha} <= R/2 fails at t = 0.4 on the unit disk
  EXPECT_THROW(check_asymptotic_regime(experiment_from_config(parse("alpha=1.5\nt_grid=0.4,0.1"))), ConfigError);
  EXPECT_NO_THROW(check_asymptotic_regime(experiment_from_config(parse("alpha=1.5\nt_grid=0.4,0.1\nallow_trivial_regime=true"))));
  EXPECT_THROW(check_asymptotic_regime(experiment_from_config(parse("domain=box\nalpha=1.5\nt_grid=0.01"))), ConfigError);
  EXPECT_NO_THROW(check_asymptotic_regime(experiment_from_config(parse("domain=box\nalpha=1.5\nt_grid=0.01\ncrosscheck=true"))));
  EXPECT_THROW(check_asymptotic_regime(experiment_from_config(parse("alpha=2\nt_grid=0.01"))), ConfigError);
  EXPECT_THROW(check_asymptotic_regime(experiment_from_config(parse("domain=interval\nd=1\nalpha=1.5\nt_grid=0.01"))), ConfigError);
}

TEST(SecondTermFit, RecoversGaussianDiskConstant) {
  const auto c = synthetic_disk_curve(1e-6);
  const auto f = fit_second_term(c, c.domain);
  EXPECT_NEAR(f.c2, c2_gaussian(2), 0.01 * c2_gaussian(2));
  EXPECT_NEAR(f.nuisance, -1.0 / 6.0, 1e-6);
  EXPECT_FALSE(f.wide_interval);
  EXPECT_LT(f.ci_low, f.c2);
  EXPECT_GT(f.ci_high, f.c2);
}

TEST(SecondTermFit, NullAndErrorScaling) {
  auto c = synthetic_disk_curve(1e-3);
  for (auto& r : c.rows) r.z_est = r.first_term;
  const auto f = fit_second_term(c, c.domain);
  EXPECT_NEAR(f.c2, 0.0, 1e-9);
  auto c2 = c;
  for (auto& r : c2.rows) r.z_err *= 2.0;
  EXPECT_NEAR(fit_second_term(c2, c2.domain).std_error, 2.0 * f.std_error, 1e-12 * f.std_error);
  c.rows.resize(2);
  EXPECT_THROW(fit_second_term(c, c.domain), std::domain_error);
}

TEST(SecondTermFit, NoisyCurveCovered) {
  RngStream r(71, 0);
  int covered = 0;
  const int trials = 200;
  for (int k = 0; k < trials; ++k) {
    auto c = synthetic_disk_curve(0.05);
    for (auto& row : c.rows) row.z_est += 0.05 * r.normal();
    const auto f = fit_second_term(c, c.domain);
    covered += (f.ci_low <= c2_gaussian(2) && c2_gaussian(2) <= f.ci_high);
  }
  // nominal 95%: binomial sd about 1.5%
  EXPECT_GT(covered, static_cast<int>(0.89 * trials));
}

TEST(Residual, NormalizationAndTrend) {
  auto c = synthetic_disk_curve(1e-6);
  for (const auto& row : c.rows) {
    EXPECT_NEAR(row.residual, 1.0 / 6.0, 1e-12);
    EXPECT_NEAR(row.residual_normalized, row.residual / std::numbers::pi, 1e-12);
  }
  EXPECT_NEAR(c.c3_estimate, 1.0 / (6.0 * std::numbers::pi), 1e-12);
  for (std::size_t i = 0; i < c.rows.size(); ++i) c.rows[i].residual_normalized = static_cast<double>(i);
  EXPECT_LT(residual_trend(c).p_value, 0.05);
  for (std::size_t i = 0; i < c.rows.size(); ++i) c.rows[i].residual_normalized = -static_cast<double>(i);
  EXPECT_GT(residual_trend(c).p_value, 0.5);
}

TEST(Reports, TraceCsvHeaderAndBytes) {
  auto c = synthetic_disk_curve(1e-3);
  c.seed = 5;
  c.config_hash = 0x1234;
  const std::string csv = trace_csv(c);
  EXPECT_EQ(csv.substr(0, csv.find("t,")),
            "# schema=stabletrace.trace/1\n# config_hash=0000000000001234\n# seed=5\n");
  EXPECT_NE(csv.find("t,Z_est,Z_err,first_term,second_term,residual,residual_normalized\n"), std::string::npos);
  EXPECT_EQ(csv, trace_csv(c));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4 + 4);
  EXPECT_EQ(std::stod(fmt_real(0.1)), 0.1);
}

TEST(Reports, JsonRoundTrip) {
  const auto c = synthetic_disk_curve(1e-3);
  const auto fit = fit_second_term(c, c.domain);
  const auto j = envelope(kTraceSchema, 42, 7, to_json(c, fit));
  const auto back = nlohmann::json::parse(j.dump());
  EXPECT_EQ(back["schema"], "stabletrace.trace/1");
  EXPECT_EQ(back["config_hash"], "000000000000002a");
  EXPECT_EQ(back["seed"], 7);
  EXPECT_EQ(back["rows"].size(), 4u);
  EXPECT_DOUBLE_EQ(back["rows"][1]["Z_est"].get<double>(), c.rows[1].z_est);
  EXPECT_DOUBLE_EQ(back["second_term_fit"]["C2_fit"].get<double>(), fit.c2);
}

TEST(Reports, ExitCsvColumns) {
  MCEstimate e;
  e.quantity = "r_D";
  e.mean = 0.5;
  e.n_samples = 10;
  e.seed = 3;
  const std::string s = exit_csv({{0.1, Vec{0.2, 0.3}}}, {e}, 2, 1);
  EXPECT_NE(s.find("quantity,t,x0,x1,mean,std_error,n,step,bias_diagnostic,seed\nr_D,0.10000000000000001,"),
            std::string::npos);
}

TEST(Reports, SpectrumSummary) {
  const auto s = eigen_spectrum(assemble_generator(Domain::box(Vec{0.0, 0.0}, Vec{1.0, 1.0}), 1.0 / 64, 2.0), 100);
  const auto m = summarize_spectrum(s);
  EXPECT_EQ(m.k, 100);
  EXPECT_DOUBLE_EQ(m.expected_slope, 1.0);
  const auto j = to_json(m);
  EXPECT_EQ(j["domain"], "box");
  EXPECT_FALSE(j.contains("grid_convergence"));
}

TEST(Experiment, ReproducibleCurve) {
  const auto cfg = parse("alpha=1.5\nt_grid=0.2,0.1,0.05\npoints=60\npaths_per_point=1\nc2_value=0.06\nseed=4");
  const auto e = experiment_from_config(cfg);
  const auto a = run_trace_experiment(e);
  const auto b = run_trace_experiment(e);
  EXPECT_FALSE(a.second.has_value());
  EXPECT_EQ(trace_csv(a.first), trace_csv(b.first));
  EXPECT_EQ(a.first.config_hash, cfg.hash());
  ASSERT_EQ(a.first.rows.size(), 3u);
  for (const auto& r : a.first.rows) {
    EXPECT_LT(r.z_est, r.first_term);
    EXPECT_LE(r.step, r.t / 8.0);
  }
}
