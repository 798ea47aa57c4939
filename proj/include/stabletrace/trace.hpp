#pragma once

// Two-term trace experiments: configuration, the Z_D(t) curve against C1|D|t^{-d/alpha} and
// C2|dD|t^{(1-d)/alpha}, the second-term fit, and deterministic CSV/JSON reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stabletrace/exit_sim.hpp"
#include "stabletrace/geometry.hpp"
#include "stabletrace/halfspace.hpp"
#include "stabletrace/spectral.hpp"
#include "stabletrace/stats.hpp"

namespace stabletrace {

inline constexpr const char* kTraceSchema = "stabletrace.trace/1";
inline constexpr const char* kC2Schema = "stabletrace.c2/1";
inline constexpr const char* kSpectrumSchema = "stabletrace.spectrum/1";
inline constexpr const char* kExitSchema = "stabletrace.exit/1";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key=value configuration. '#' starts a comment; later assignments win.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    return parse(f);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not a number: " + it->second);
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not an integer: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const std::string v = get(key, fallback ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key " + key + ": not a boolean: " + v);
  }

  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(get(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      KeyValueConfig tmp;
      tmp.set("v", item.substr(item.find_first_not_of(' ') == std::string::npos ? 0 : item.find_first_not_of(' ')));
      out.push_back(tmp.get_double("v", 0.0));
    }
    if (out.empty()) throw ConfigError("config key " + key + ": empty list");
    return out;
  }

  /// FNV-1a over the sorted "key=value\n" lines.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : values_)
      for (char ch : k + "=" + v + "\n") {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
      }
    return h;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Round-trip decimal form (17 significant digits), so repeated runs print identical bytes.
inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Domain from keys: domain = disk|ball|annulus|box|interval, with d, radius, r_inner, r_outer,
/// side (box edge length) and center (comma list, defaults to the origin).
inline Domain domain_from_config(const KeyValueConfig& c) {
  const std::string kind = c.get("domain", "disk");
  const int d = static_cast<int>(c.get_int("d", kind == "disk" ? 2 : (kind == "interval" ? 1 : 2)));
  if (d < 1 || d > kMaxDim) throw ConfigError("d must lie in [1, " + std::to_string(kMaxDim) + "]");
  Vec center(d);
  if (c.has("center")) {
    const auto v = c.get_list("center", {});
    if (static_cast<int>(v.size()) != d) throw ConfigError("center must have d entries");
    for (int i = 0; i < d; ++i) center[i] = v[static_cast<std::size_t>(i)];
  }
  try {
    if (kind == "disk" || kind == "ball") {
      if (kind == "disk" && d != 2) throw ConfigError("domain=disk requires d=2");
      return Domain::ball(center, c.get_double("radius", 1.0));
    }
    if (kind == "annulus") return Domain::annulus(center, c.get_double("r_inner", 1.0), c.get_double("r_outer", 2.0));
    if (kind == "box") {
      const double side = c.get_double("side", 1.0);
      Vec hi = center;
      for (int i = 0; i < d; ++i) hi[i] += side;
      return Domain::box(center, hi);
    }
    if (kind == "interval") {
      if (d != 1) throw ConfigError("domain=interval requires d=1");
      return Domain::interval(center[0], center[0] + c.get_double("side", 1.0));
    }
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
  throw ConfigError("unknown domain " + kind + " (disk, ball, annulus, box, interval)");
}

struct ExperimentConfig {
  KeyValueConfig source;
  Domain domain = Domain::ball(Vec(2), 1.0);
  StableParams params{2, 1.5};
  std::vector<double> t_grid{0.2, 0.1, 0.05};
  long points = 2000;
  long paths_per_point = 4;
  double step = 0.01;  ///< base step; each horizon t uses min(step, t / 8)
  std::uint64_t seed = 1;
  int threads = 1;
  long c2_paths = 10000;
  double c2_qmax = 8.0;
  std::optional<double> c2_value;  ///< skip the C2 computation when given
  bool crosscheck = false;          ///< spectral cross-check mode: boxes allowed, no regime guard
  bool allow_trivial_regime = false;
  std::string out = "trace";

  std::uint64_t hash() const { return source.hash(); }
};

inline ExperimentConfig experiment_from_config(const KeyValueConfig& c) {
  ExperimentConfig e;
  e.source = c;
  e.domain = domain_from_config(c);
  try {
    e.params = StableParams{e.domain.dim(), c.get_double("alpha", 1.5)};
  } catch (const std::domain_error& err) {
    throw ConfigError(err.what());
  }
  e.t_grid = c.get_list("t_grid", e.t_grid);
  e.points = static_cast<long>(c.get_int("points", e.points));
  e.paths_per_point = static_cast<long>(c.get_int("paths_per_point", e.paths_per_point));
  e.step = c.get_double("step", e.step);
  e.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
  e.threads = static_cast<int>(c.get_int("threads", 1));
  e.c2_paths = static_cast<long>(c.get_int("c2_paths", e.c2_paths));
  e.c2_qmax = c.get_double("c2_qmax", e.c2_qmax);
  if (c.has("c2_value")) e.c2_value = c.get_double("c2_value", 0.0);
  e.crosscheck = c.get_bool("crosscheck", false);
  e.allow_trivial_regime = c.get_bool("allow_trivial_regime", false);
  e.out = c.get("out", e.out);
  if (e.points < 8 || e.paths_per_point < 1 || e.c2_paths < 2) throw ConfigError("point and path budgets are too small");
  if (!(e.step > 0.0)) throw ConfigError("step must be positive");
  if (e.threads < 1) throw ConfigError("threads must be >= 1");
  for (std::size_t i = 0; i < e.t_grid.size(); ++i) {
    if (!(e.t_grid[i] > 0.0)) throw ConfigError("t_grid entries must be positive");
    if (i > 0 && !(e.t_grid[i] < e.t_grid[i - 1])) throw ConfigError("t_grid must be strictly decreasing");
  }
  return e;
}

/// Small-time expansion preconditions: d >= 2, alpha < 2, bounded R-smooth domain, t^{1/alpha} <= R/2.
/// Throws ConfigError with the reason. Crosscheck mode skips the smoothness and regime checks.
inline void check_asymptotic_regime(const ExperimentConfig& e) {
  if (!e.domain.bounded()) throw ConfigError("trace: the domain must be bounded");
  if (e.crosscheck) return;
  if (e.params.d < 2) throw ConfigError("trace: the two-term expansion is stated for d >= 2");
  if (e.params.is_gaussian()) throw ConfigError("trace: alpha must lie in (0, 2)");
  const Measures m = e.domain.measures();
  if (!m.r_smooth || !(m.smoothness_radius > 0.0))
    throw ConfigError("trace: " + e.domain.name() +
                      " is not R-smooth (corners have no tangent balls); boxes are allowed only with crosscheck=true");
  if (!e.allow_trivial_regime)
    for (double t : e.t_grid)
      if (std::pow(t, 1.0 / e.params.alpha) > 0.5 * m.smoothness_radius)
        throw ConfigError("trace: t = " + fmt_real(t) + " violates t^{1/alpha} <= R/2 with R = " +
                          fmt_real(m.smoothness_radius) + " (set allow_trivial_regime=true to run it anyway)");
}

struct TraceRow {
  double t = 0.0;
  double z_est = 0.0;
  double z_err = 0.0;
  double first_term = 0.0;
  double second_term = 0.0;
  double residual = 0.0;
  double residual_normalized = 0.0;
  double bias_diagnostic = 0.0;
  double bias_std_error = 0.0;
  double truncation_bound = 0.0;
  long long n_paths = 0;
  double step = 0.0;
};

struct TraceCurve {
  std::vector<TraceRow> rows;
  Domain domain = Domain::ball(Vec(2), 1.0);
  StableParams params{2, 1.5};
  double c2 = 0.0;
  double c3_estimate = 0.0;  ///< max normalized residual
  double c3_std_error = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

/// Fills first_term, second_term, residual and residual_normalized of each row from t, z_est and
/// z_err for the given C2.
inline void complete_rows(TraceCurve& curve) {
  const Measures m = curve.domain.measures();
  const double c1 = c1_constant(curve.params);
  const int d = curve.params.d;
  const double a = curve.params.alpha;
  const double R = m.smoothness_radius > 0.0 ? m.smoothness_radius : 1.0;
  curve.c3_estimate = 0.0;
  curve.c3_std_error = 0.0;
  for (auto& r : curve.rows) {
    r.first_term = c1 * m.volume * std::pow(r.t, -d / a);
    r.second_term = curve.c2 * m.surface_area * std::pow(r.t, (1.0 - d) / a);
    r.residual = std::abs(r.z_est - r.first_term + r.second_term);
    const double norm = R * R * std::pow(r.t, (d - 2.0) / a) / m.volume;
    r.residual_normalized = r.residual * norm;
    if (r.residual_normalized >= curve.c3_estimate) {
      curve.c3_estimate = r.residual_normalized;
      curve.c3_std_error = r.z_err * norm;
    }
  }
}

/// Z_D(t) on the t-grid with one stream per t, and C2 from compute_C2 unless supplied.
inline std::pair<TraceCurve, std::optional<C2Result>> run_trace_experiment(const ExperimentConfig& e) {
  check_asymptotic_regime(e);
  ExitSimConfig sc;
  sc.threads = e.threads;
  const ExitSimulator sim(e.params, sc);
  const RngStream root(e.seed, 0);

  std::optional<C2Result> c2;
  TraceCurve curve;
  curve.domain = e.domain;
  curve.params = e.params;
  curve.seed = e.seed;
  curve.config_hash = e.hash();
  if (e.c2_value) {
    curve.c2 = *e.c2_value;
  } else if (!e.params.is_gaussian()) {
    const ExitSimulator sim1(StableParams{e.params.d, e.params.alpha}, sc);
    c2 = compute_C2(sim1, e.c2_paths, 1.0 / 32.0, root.substream(0xC2), e.c2_qmax);
    curve.c2 = c2->value;
  } else {
    curve.c2 = c2_gaussian(e.params.d);
  }

  for (std::size_t i = 0; i < e.t_grid.size(); ++i) {
    const double t = e.t_grid[i];
    const double step = std::min(e.step, t / 8.0);
    const ZEstimate z = estimate_Z(sim, t, e.domain, e.points, e.paths_per_point, step, root.substream(0x7ACE, i));
    TraceRow r;
    r.t = t;
    r.z_est = z.z.mean;
    r.z_err = z.z.std_error;
    r.bias_diagnostic = z.z.bias_diagnostic;
    r.bias_std_error = z.z.bias_std_error;
    r.truncation_bound = z.truncation_bound;
    r.n_paths = z.z.n_samples;
    r.step = step;
    curve.rows.push_back(r);
  }
  complete_rows(curve);
  return {curve, c2};
}

struct SecondTermFit {
  double c2 = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double nuisance = 0.0;  ///< coefficient K of t^{1/alpha}
  bool wide_interval = false;
};

/// Weighted least squares of y(t) = (first_term - Z_est) t^{(d-1)/alpha} on |dD| and t^{1/alpha};
/// the |dD| coefficient is the C2 estimate. 95% interval from the Monte Carlo errors.
inline SecondTermFit fit_second_term(const TraceCurve& curve, const Domain& D) {
  if (curve.rows.size() < 3) throw std::domain_error("fit_second_term: need at least three t-nodes");
  const Measures m = D.measures();
  const int d = curve.params.d;
  const double a = curve.params.alpha;
  double s00 = 0, s01 = 0, s11 = 0, b0 = 0, b1 = 0;
  for (const auto& r : curve.rows) {
    const double scale = std::pow(r.t, (d - 1.0) / a);
    const double y = (r.first_term - r.z_est) * scale;
    const double sig = std::max(r.z_err * scale, 1e-300);
    const double w = 1.0 / (sig * sig);
    const double x0 = m.surface_area, x1 = std::pow(r.t, 1.0 / a);
    s00 += w * x0 * x0;
    s01 += w * x0 * x1;
    s11 += w * x1 * x1;
    b0 += w * x0 * y;
    b1 += w * x1 * y;
  }
  const double det = s00 * s11 - s01 * s01;
  if (!(std::abs(det) > 0.0)) throw std::domain_error("fit_second_term: degenerate design");
  SecondTermFit f;
  f.c2 = (s11 * b0 - s01 * b1) / det;
  f.nuisance = (s00 * b1 - s01 * b0) / det;
  f.std_error = std::sqrt(s11 / det);
  f.ci_low = f.c2 - 1.96 * f.std_error;
  f.ci_high = f.c2 + 1.96 * f.std_error;
  f.wide_interval = 1.96 * f.std_error > 0.5 * std::abs(f.c2);
  return f;
}

/// Kendall test for an increasing trend of the normalized residual as t decreases.
inline stats::TestResult residual_trend(const TraceCurve& curve) {
  std::vector<double> x, y;
  for (const auto& r : curve.rows) {
    x.push_back(-r.t);
    y.push_back(r.residual_normalized);
  }
  return stats::kendall_increasing(x, y);
}

struct SpectrumSummary {
  std::string domain;
  double alpha = 0.0;
  double grid_h = 0.0;
  int k = 0;
  double lambda1 = 0.0;
  double lambda_k = 0.0;
  double karamata_ratio_top = 0.0;
  double counting_slope = 0.0;
  double expected_slope = 0.0;
  std::optional<GridConvergence> convergence;
};

inline SpectrumSummary summarize_spectrum(const Spectrum& s) {
  SpectrumSummary r;
  r.domain = s.domain.name();
  r.alpha = s.alpha;
  r.grid_h = s.grid_h;
  r.k = static_cast<int>(s.eigenvalues.size());
  r.lambda1 = s.eigenvalues.front();
  r.lambda_k = s.eigenvalues.back();
  r.karamata_ratio_top = karamata_ratio(s, r.lambda_k);
  r.counting_slope = r.k >= 6 ? counting_slope(s) : 0.0;
  r.expected_slope = s.domain.dim() / s.alpha;
  return r;
}

// ---- reports ----

inline const std::vector<std::string>& trace_csv_columns() {
  static const std::vector<std::string> cols{"t",        "Z_est",    "Z_err",
                                             "first_term", "second_term", "residual",
                                             "residual_normalized"};
  return cols;
}

inline std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : std::string()) + v[i];
  return s;
}

/// Plot-ready CSV, one row per t, preceded by '#' lines carrying schema, config hash and seed.
inline std::string trace_csv(const TraceCurve& c) {
  std::string s = std::string("# schema=") + kTraceSchema + "\n# config_hash=" + hex64(c.config_hash) +
                  "\n# seed=" + std::to_string(c.seed) + "\n" + join(trace_csv_columns()) + "\n";
  for (const auto& r : c.rows)
    s += join({fmt_real(r.t), fmt_real(r.z_est), fmt_real(r.z_err), fmt_real(r.first_term), fmt_real(r.second_term),
               fmt_real(r.residual), fmt_real(r.residual_normalized)}) +
         "\n";
  return s;
}

inline nlohmann::ordered_json to_json(const C2Result& r) {
  nlohmann::ordered_json j;
  j["value"] = r.value;
  j["std_error"] = r.std_error;
  j["quadrature_error"] = r.quadrature_error;
  j["tail_bound"] = r.tail_bound;
  j["near_origin_bound"] = r.near_origin_bound;
  j["total_error"] = r.total_error;
  j["q_min"] = r.q_min;
  j["q_max"] = r.q_max;
  j["tail_constant"] = r.tail_constant;
  j["tail_fit_unstable"] = r.tail_fit_unstable;
  j["bias_diagnostic"] = r.bias_diagnostic;
  j["bias_std_error"] = r.bias_std_error;
  j["d"] = r.d;
  j["alpha"] = r.alpha;
  j["n_paths"] = r.n_paths;
  j["seed"] = r.seed;
  j["step"] = r.step;
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : r.nodes) nodes.push_back({{"q", n.q}, {"f", n.f}, {"std_error", n.std_error}});
  return j;
}

inline nlohmann::ordered_json to_json(const SpectrumSummary& s) {
  nlohmann::ordered_json j;
  j["domain"] = s.domain;
  j["alpha"] = s.alpha;
  j["grid_h"] = s.grid_h;
  j["k"] = s.k;
  j["lambda_1"] = s.lambda1;
  j["lambda_k"] = s.lambda_k;
  j["karamata_ratio_top"] = s.karamata_ratio_top;
  j["counting_slope"] = s.counting_slope;
  j["expected_slope"] = s.expected_slope;
  if (s.convergence) {
    j["grid_convergence"] = {{"lambda1_h", s.convergence->lambda1_h},
                             {"lambda1_half_h", s.convergence->lambda1_half},
                             {"relative_change", s.convergence->relative_change},
                             {"flagged", s.convergence->flagged}};
  }
  return j;
}

inline nlohmann::ordered_json to_json(const TraceCurve& c, const std::optional<SecondTermFit>& fit) {
  nlohmann::ordered_json j;
  j["domain"] = c.domain.name();
  j["d"] = c.params.d;
  j["alpha"] = c.params.alpha;
  j["C1"] = c1_constant(c.params);
  j["C2"] = c.c2;
  j["C3_estimate"] = c.c3_estimate;
  j["C3_std_error"] = c.c3_std_error;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"t", r.t},
                    {"Z_est", r.z_est},
                    {"Z_err", r.z_err},
                    {"first_term", r.first_term},
                    {"second_term", r.second_term},
                    {"residual", r.residual},
                    {"residual_normalized", r.residual_normalized},
                    {"bias_diagnostic", r.bias_diagnostic},
                    {"bias_std_error", r.bias_std_error},
                    {"truncation_bound", r.truncation_bound},
                    {"n_paths", r.n_paths},
                    {"step", r.step}});
  if (fit)
    j["second_term_fit"] = {{"C2_fit", fit->c2},     {"std_error", fit->std_error}, {"ci_low", fit->ci_low},
                            {"ci_high", fit->ci_high}, {"nuisance", fit->nuisance}, {"wide_interval", fit->wide_interval}};
  return j;
}

/// Wraps a payload with schema, config hash and seed.
inline nlohmann::ordered_json envelope(const char* schema, std::uint64_t config_hash, std::uint64_t seed,
                                       nlohmann::ordered_json payload) {
  nlohmann::ordered_json j;
  j["schema"] = schema;
  j["config_hash"] = hex64(config_hash);
  j["seed"] = seed;
  for (auto& [k, v] : payload.items()) j[k] = v;
  return j;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path);
}

/// Writes <prefix>.csv (the curve) and <prefix>.json (curve, fit, C2 and spectrum summary).
inline std::vector<std::string> emit_report(const std::string& prefix, const TraceCurve& curve,
                                            const std::optional<SecondTermFit>& fit,
                                            const std::optional<C2Result>& c2,
                                            const std::optional<SpectrumSummary>& spectrum) {
  write_file(prefix + ".csv", trace_csv(curve));
  nlohmann::ordered_json j = envelope(kTraceSchema, curve.config_hash, curve.seed, to_json(curve, fit));
  if (c2) j["c2_result"] = to_json(*c2);
  if (spectrum) j["spectrum"] = to_json(*spectrum);
  write_file(prefix + ".json", j.dump(2) + "\n");
  return {prefix + ".csv", prefix + ".json"};
}

/// Exit-simulation CSV rows: quantity, t, x0..x{d-1}, mean, std_error, n, step, bias_diagnostic, seed.
inline std::string exit_csv(const std::vector<std::pair<double, Vec>>& where, const std::vector<MCEstimate>& est,
                            int d, std::uint64_t config_hash) {
  std::vector<std::string> cols{"quantity", "t"};
  for (int i = 0; i < d; ++i) cols.push_back("x" + std::to_string(i));
  for (const char* c : {"mean", "std_error", "n", "step", "bias_diagnostic", "seed"}) cols.emplace_back(c);
  std::string s = std::string("# schema=") + kExitSchema + "\n# config_hash=" + hex64(config_hash) + "\n" + join(cols) + "\n";
  for (std::size_t i = 0; i < est.size(); ++i) {
    std::vector<std::string> row{est[i].quantity, fmt_real(where[i].first)};
    for (int k = 0; k < d; ++k) row.push_back(fmt_real(where[i].second[k]));
    row.push_back(fmt_real(est[i].mean));
    row.push_back(fmt_real(est[i].std_error));
    row.push_back(std::to_string(est[i].n_samples));
    row.push_back(fmt_real(est[i].step));
    row.push_back(fmt_real(est[i].bias_diagnostic));
    row.push_back(std::to_string(est[i].seed));
    s += join(row) + "\n";
  }
  return s;
}

}  // namespace stabletrace
