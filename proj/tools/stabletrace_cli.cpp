// stabletrace command-line driver.
//
// Every subcommand reads an optional flat key=value file (--config), applies --set KEY=VALUE
// and its own flags on top, and writes deterministic outputs under the --out prefix.
// Exit codes: 0 success, 2 configuration error, 3 convergence or statistical failure.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stabletrace/exit_sim.hpp"
#include "stabletrace/halfspace.hpp"
#include "stabletrace/sampling.hpp"
#include "stabletrace/spectral.hpp"
#include "stabletrace/stable_kernel.hpp"
#include "stabletrace/stats.hpp"
#include "stabletrace/trace.hpp"

using namespace stabletrace;
using json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 2;
constexpr int kStatisticalFailure = 3;

class StatisticalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags that map onto config keys; only flags given on the command line override the file.
struct Overrides {
  std::string config_path;
  std::vector<std::string> sets;
  std::list<std::pair<std::string, std::string>> flags;  // key, value slot (stable addresses for CLI11)
  std::map<std::string, CLI::Option*> options;

  void flag(CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    flags.emplace_back(key, std::string());
    options[key] = sub->add_option("--" + name, flags.back().second, help);
  }

  KeyValueConfig merged() const {
    KeyValueConfig c = config_path.empty() ? KeyValueConfig() : KeyValueConfig::load(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got " + s);
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : flags)
      if (options.at(key)->count() > 0) c.set(key, value);
    return c;
  }
};

struct Command {
  CLI::App* app = nullptr;
  Overrides ov;
};

void common_flags(Command& c) {
  c.app->add_option("--config", c.ov.config_path, "key=value configuration file");
  c.app->add_option("--set", c.ov.sets, "override a configuration key (KEY=VALUE), repeatable");
  c.ov.flag(c.app, "seed", "seed", "random seed");
  c.ov.flag(c.app, "threads", "threads", "worker threads");
  c.ov.flag(c.app, "out", "out", "output path prefix");
}

std::string out_prefix(const KeyValueConfig& c, const std::string& fallback) { return c.get("out", fallback); }

std::uint64_t seed_of(const KeyValueConfig& c) { return static_cast<std::uint64_t>(c.get_int("seed", 1)); }

int threads_of(const KeyValueConfig& c) {
  const auto n = c.get_int("threads", 1);
  if (n < 1) throw ConfigError("threads must be >= 1");
  return static_cast<int>(n);
}

StableParams params_of(const KeyValueConfig& c, int d) {
  try {
    return StableParams{d, c.get_double("alpha", 1.5)};
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
}

long positive(const KeyValueConfig& c, const std::string& key, long fallback) {
  const auto v = c.get_int(key, fallback);
  if (v < 1) throw ConfigError(key + " must be positive");
  return static_cast<long>(v);
}

std::string header(const char* schema, std::uint64_t hash, std::uint64_t seed) {
  return std::string("# schema=") + schema + "\n# config_hash=" + hex64(hash) + "\n# seed=" + std::to_string(seed) + "\n";
}

void announce(const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << f << "\n";
}

// ---- subcommands ----

int run_kernel(const KeyValueConfig& c) {
  const int d = static_cast<int>(c.get_int("d", 2));
  const StableParams p = params_of(c, d);
  const auto ts = c.get_list("t", {1.0});
  std::vector<double> rs = c.get_list("r", {});
  if (rs.empty() || !c.has("r"))
    for (int i = 0; i <= 40; ++i) rs.push_back(0.25 * i);
  std::string csv = header("stabletrace.kernel/1", c.hash(), seed_of(c)) + "t,r,density\n";
  for (double t : ts)
    for (double r : rs) csv += fmt_real(t) + "," + fmt_real(r) + "," + fmt_real(transition_density(t, r, p)) + "\n";
  const std::string path = out_prefix(c, "kernel") + ".csv";
  write_file(path, csv);
  announce({path});
  return kOk;
}

// characteristic-function check of the increment sampler, or the radial law of the ball exit
int run_sample_test(const KeyValueConfig& c) {
  const int d = static_cast<int>(c.get_int("d", 2));
  const StableParams p = params_of(c, d);
  const long n = positive(c, "n", 1000000);
  const std::string test = c.get("test", "cf");
  const std::uint64_t seed = seed_of(c);
  const int threads = threads_of(c);
  json payload;
  payload["test"] = test;
  payload["d"] = d;
  payload["alpha"] = p.alpha;
  payload["n"] = n;
  bool pass = true;

  if (test == "cf") {
    const double z_max = c.get_double("z_max", 4.0);
    const auto radii = c.get_list("xi", {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0});
    std::vector<Vec> xi;
    for (std::size_t k = 0; k < radii.size(); ++k) {
      Vec v(d);
      const double th = std::numbers::pi * static_cast<double>(k) / static_cast<double>(radii.size());
      v[0] = radii[k] * std::cos(th);
      if (d > 1) v[1] = radii[k] * std::sin(th);
      xi.push_back(v);
    }
    const double dt = c.get_double("t", 1.0);
    std::vector<double> x(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
    const RngStream root(seed, 0);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
      RngStream r = root.substream(i);
      const Vec j = sample_stable_increment(dt, p, r).jump;
      for (int k = 0; k < d; ++k) x[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] = j[k];
    });
    auto& rows = payload["rows"] = json::array();
    for (const Vec& v : xi) {
      std::vector<double> cs(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < cs.size(); ++i) {
        double dotp = 0.0;
        for (int k = 0; k < d; ++k) dotp += v[k] * x[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
        cs[i] = std::cos(dotp);
      }
      const auto m = stats::mean_std(cs);
      const double exact = std::exp(-dt * std::pow(v.norm(), p.alpha));
      const double z = (m.mean - exact) / m.std_error;
      pass = pass && std::abs(z) <= z_max;
      rows.push_back({{"xi_norm", v.norm()}, {"empirical", m.mean}, {"std_error", m.std_error}, {"exact", exact}, {"z", z}});
    }
  } else if (test == "ball-exit") {
    if (p.is_gaussian()) throw ConfigError("sample-test ball-exit requires alpha < 2");
    const int shells = static_cast<int>(positive(c, "shells", 10));
    const double p_min = c.get_double("p_min", 0.01);
    std::vector<double> edges{1.0};
    for (int k = 1; k < shells; ++k) edges.push_back(ball_exit_radius_quantile(static_cast<double>(k) / shells, 1.0, p.alpha));
    std::vector<double> obs(static_cast<std::size_t>(shells), 0.0), expv(static_cast<std::size_t>(shells), static_cast<double>(n) / shells);
    std::vector<double> radius(static_cast<std::size_t>(n));
    const RngStream root(seed, 1);
    const Vec o(d);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
      RngStream r = root.substream(i);
      radius[i] = sample_ball_exit_position(o, o, 1.0, p, r).norm();
    });
    for (double s : radius) {
      const auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), s) - edges.begin()) - 1;
      obs[std::min<std::size_t>(k, obs.size() - 1)] += 1.0;
    }
    const auto chi = stats::chi_square(obs, expv);
    pass = chi.p_value > p_min;
    payload["chi_square"] = chi.statistic;
    payload["p_value"] = chi.p_value;
    payload["shell_edges"] = edges;
    payload["observed"] = obs;
  } else {
    throw ConfigError("unknown sample test " + test + " (cf, ball-exit)");
  }
  payload["pass"] = pass;
  const std::string path = out_prefix(c, "sample_test") + ".json";
  write_file(path, envelope("stabletrace.sample_test/1", c.hash(), seed, payload).dump(2) + "\n");
  announce({path});
  if (!pass) throw StatisticalFailure("sample-test " + test + " rejected the sampler law");
  return kOk;
}

std::vector<Vec> points_of(const KeyValueConfig& c, int d) {
  // x = "0,0;0.5,0": points separated by ';'
  std::vector<Vec> out;
  std::stringstream ss(c.get("x", ""));
  std::string item;
  while (std::getline(ss, item, ';')) {
    KeyValueConfig one;
    one.set("x", item);
    const auto v = one.get_list("x", {});
    if (static_cast<int>(v.size()) != d) throw ConfigError("each point in x must have d coordinates");
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = v[static_cast<std::size_t>(i)];
    out.push_back(x);
  }
  if (out.empty()) out.push_back(Vec(d));
  return out;
}

int run_exit(const KeyValueConfig& c) {
  const Domain D = domain_from_config(c);
  const StableParams p = params_of(c, D.dim());
  ExitSimConfig sc;
  sc.threads = threads_of(c);
  const ExitSimulator sim(p, sc);
  const std::string quantity = c.get("quantity", "mean_exit_time");
  const auto ts = c.get_list("t", {quantity == "mean_exit_time" ? 50.0 : 0.1});
  const long paths = positive(c, "paths", 10000);
  const double step = c.get_double("step", 0.01);
  if (!(step > 0.0)) throw ConfigError("step must be positive");
  const std::uint64_t seed = seed_of(c);
  const RngStream root(seed, 0);
  std::vector<std::pair<double, Vec>> where;
  std::vector<MCEstimate> est;
  const auto xs = points_of(c, D.dim());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!D.contains(xs[i])) throw ConfigError("exit: start point " + std::to_string(i) + " is not inside the domain");
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const RngStream s = root.substream(i, j);
      if (quantity == "mean_exit_time") {
        est.push_back(estimate_mean_exit_time(sim, D, xs[i], ts[j], paths, step, s));
      } else if (quantity == "r_D") {
        est.push_back(estimate_rD(sim, ts[j], xs[i], D, paths, step, s));
      } else {
        throw ConfigError("unknown quantity " + quantity + " (mean_exit_time, r_D)");
      }
      where.emplace_back(ts[j], xs[i]);
    }
  }
  const std::string path = out_prefix(c, "exit") + ".csv";
  write_file(path, exit_csv(where, est, D.dim(), c.hash()));
  announce({path});
  return kOk;
}

int run_c2(const KeyValueConfig& c) {
  const int d = static_cast<int>(c.get_int("d", 2));
  if (d < 2) throw ConfigError("c2: d must be at least 2");
  const StableParams p = params_of(c, d);
  ExitSimConfig sc;
  sc.threads = threads_of(c);
  const ExitSimulator sim(p, sc);
  const long paths = positive(c, "paths", 10000);
  const double qmax = c.get_double("qmax", 8.0);
  const double step = c.get_double("step", 1.0 / 32.0);
  if (!(qmax > 0.01) || !(step > 0.0)) throw ConfigError("c2: need qmax > 0.01 and step > 0");
  const std::uint64_t seed = seed_of(c);
  const C2Result r = compute_C2(sim, paths, step, RngStream(seed, 0).substream(0xC2), qmax);
  json payload = to_json(r);
  if (p.is_gaussian()) payload["closed_form"] = c2_gaussian(d);
  const std::string path = out_prefix(c, "c2") + ".json";
  write_file(path, envelope(kC2Schema, c.hash(), seed, payload).dump(2) + "\n");
  announce({path});
  return kOk;
}

Domain spectral_domain(const KeyValueConfig& c) {
  KeyValueConfig dc = c;
  const std::string kind = c.get("domain", "interval");
  if (kind != "interval" && kind != "box") throw ConfigError("spectrum: domain must be interval or box");
  dc.set("domain", kind);
  if (!c.has("d")) dc.set("d", kind == "interval" ? "1" : "2");
  return domain_from_config(dc);
}

int run_spectrum(const KeyValueConfig& c) {
  const Domain D = spectral_domain(c);
  const double alpha = params_of(c, D.dim()).alpha;
  const double h = c.get_double("h", D.dim() == 1 ? 1.0 / 1000 : 1.0 / 64);
  GeneratorMatrix G;
  try {
    G = assemble_generator(D, h, alpha);
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  const int k = static_cast<int>(std::min<long long>(c.get_int("k", 400), G.size()));
  if (k < 1) throw ConfigError("k must be positive");
  const Spectrum s = eigen_spectrum(G, k);
  SpectrumSummary sum = summarize_spectrum(s);
  if (c.get_bool("convergence", false)) sum.convergence = lambda1_convergence(D, h, alpha);
  json payload = to_json(sum);
  if (c.has("trace_t")) {
    auto& tr = payload["trace"] = json::array();
    for (double t : c.get_list("trace_t", {})) {
      try {
        const auto v = trace_from_spectrum(s, t);
        tr.push_back({{"t", t}, {"Z", v.value}, {"truncation_bound", v.truncation_bound}});
      } catch (const std::domain_error& e) {
        tr.push_back({{"t", t}, {"refused", e.what()}});
      }
    }
  }
  const std::uint64_t seed = seed_of(c);
  std::string csv = header(kSpectrumSchema, c.hash(), seed) + "n,lambda\n";
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) csv += std::to_string(i + 1) + "," + fmt_real(s.eigenvalues[i]) + "\n";
  const std::string prefix = out_prefix(c, "spectrum");
  write_file(prefix + ".csv", csv);
  write_file(prefix + ".json", envelope(kSpectrumSchema, c.hash(), seed, payload).dump(2) + "\n");
  announce({prefix + ".csv", prefix + ".json"});
  return kOk;
}

int run_trace(const KeyValueConfig& c, bool full_report) {
  const ExperimentConfig e = experiment_from_config(c);
  const auto [curve, c2] = run_trace_experiment(e);
  std::optional<SecondTermFit> fit;
  if (curve.rows.size() >= 3) fit = fit_second_term(curve, e.domain);
  std::optional<SpectrumSummary> spectrum;
  const std::string prefix = out_prefix(c, full_report ? "report" : "trace");
  if (!full_report) {
    announce(emit_report(prefix, curve, fit, c2, spectrum));
    return kOk;
  }
  // report: the curve plus the residual trend and, for boxes and intervals, a spectral reference trace
  json extra;
  if (curve.rows.size() >= 2) {
    const auto trend = residual_trend(curve);
    extra["residual_trend"] = {{"kendall_tau", trend.statistic}, {"p_value", trend.p_value}};
  }
  const std::string kind = e.domain.name();
  if (kind == "box" || kind == "interval") {
    const double h = c.get_double("spectral_h", 1.0 / 64);
    GeneratorMatrix G;
    try {
      G = assemble_generator(e.domain, h, e.params.alpha);
    } catch (const std::domain_error& err) {
      throw ConfigError(err.what());
    }
    const Spectrum s = eigen_spectrum(G);
    spectrum = summarize_spectrum(s);
    auto& rows = extra["spectral_crosscheck"] = json::array();
    for (const auto& r : curve.rows) {
      json row{{"t", r.t}, {"Z_est", r.z_est}, {"Z_err", r.z_err}};
      try {
        const auto v = trace_from_spectrum(s, r.t);
        row["Z_spectral"] = v.value;
        row["truncation_bound"] = v.truncation_bound;
      } catch (const std::domain_error& err) {
        row["refused"] = err.what();
      }
      rows.push_back(row);
    }
  }
  const auto files = emit_report(prefix, curve, fit, c2, spectrum);
  auto j = nlohmann::ordered_json::parse(std::ifstream(prefix + ".json"));
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_file(prefix + ".json", j.dump(2) + "\n");
  announce(files);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stabletrace: stable-process heat traces, exit simulation and spectral checks"};
  app.require_subcommand(1);
  std::map<std::string, Command> cmds;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, help);
    c.app->set_help_flag("--help", "print this help and exit");  // frees -h for the grid spacing flag
    common_flags(c);
    return c;
  };

  auto& kernel = make("kernel", "tabulate the transition density p_t(r)");
  kernel.ov.flag(kernel.app, "d", "d", "dimension");
  kernel.ov.flag(kernel.app, "alpha", "alpha", "stability index");
  kernel.ov.flag(kernel.app, "t", "t", "times (comma list)");
  kernel.ov.flag(kernel.app, "r", "r", "distances (comma list)");

  auto& st = make("sample-test", "statistical check of the samplers");
  st.ov.flag(st.app, "test", "test", "cf (characteristic function) or ball-exit");
  st.ov.flag(st.app, "d", "d", "dimension");
  st.ov.flag(st.app, "alpha", "alpha", "stability index");
  st.ov.flag(st.app, "n", "n", "number of samples");

  auto& ex = make("exit", "first-exit estimates (mean exit time or r_D)");
  for (const char* k : {"domain", "d", "radius", "r_inner", "r_outer", "side", "center", "alpha", "x", "t", "quantity",
                        "paths", "step"})
    ex.ov.flag(ex.app, k, k, std::string("config key ") + k);

  auto& c2 = make("c2", "second-term constant C2 from the half-space remainder");
  for (const char* k : {"d", "alpha", "paths", "qmax", "step"}) c2.ov.flag(c2.app, k, k, std::string("config key ") + k);

  auto& sp = make("spectrum", "eigenvalues of the discretized generator");
  for (const char* k : {"domain", "alpha", "h", "k", "side", "convergence", "trace_t"})
    sp.ov.flag(sp.app, k, k, std::string("config key ") + k);

  auto& tr = make("trace", "Z_D(t) curve against the two-term expansion");
  auto& rp = make("report", "trace curve with fit, residual trend and spectral cross-check");
  for (Command* c : {&tr, &rp})
    for (const char* k : {"domain", "alpha", "t_grid", "points", "paths_per_point", "step", "c2_paths", "c2_value",
                          "crosscheck", "allow_trivial_regime"})
      c->ov.flag(c->app, k, k, std::string("config key ") + k);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    for (auto& [name, c] : cmds) {
      if (!c.app->parsed()) continue;
      const KeyValueConfig cfg = c.ov.merged();
      if (name == "kernel") return run_kernel(cfg);
      if (name == "sample-test") return run_sample_test(cfg);
      if (name == "exit") return run_exit(cfg);
      if (name == "c2") return run_c2(cfg);
      if (name == "spectrum") return run_spectrum(cfg);
      if (name == "trace") return run_trace(cfg, false);
      if (name == "report") return run_trace(cfg, true);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return kStatisticalFailure;
  } catch (const SamplingError& e) {
    std::cerr << "sampling failure: " << e.what() << "\n";
    return kStatisticalFailure;
  } catch (const StatisticalFailure& e) {
    std::cerr << "statistical failure: " << e.what() << "\n";
    return kStatisticalFailure;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kConfigFailure;
}
