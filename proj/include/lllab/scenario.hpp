#pragma once

// Scenario configuration (JSON), the experiment runner and its reports.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lllab/dynamics.hpp"
#include "lllab/functionals.hpp"
#include "lllab/io.hpp"
#include "lllab/modulation.hpp"
#include "lllab/perturbation.hpp"
#include "lllab/solitons.hpp"

namespace lllab {

using json = nlohmann::json;

enum class Frame { spin, hydro };
enum class PerturbationKind { none, random_smooth, chi_direction, between_bump };

struct PerturbationConfig {
  PerturbationKind kind = PerturbationKind::none;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  double width = 2.0;  // between_bump only
};

struct GridConfig {
  double period = 409.6;
  std::size_t n = 4096;
  Grid grid() const { return Grid::centered(period, n); }
};

struct DiagnosticsConfig {
  std::vector<double> y0_list{5.0, 10.0, 20.0};
  double window_half_width = 5.0;
  bool fixed_speed = false;     // b paths: midpoints of the tracked centers unless set
  std::vector<double> gammas;   // N+1 limiting speeds when fixed_speed
  std::size_t rate_check_every = 10;  // samples between dI/dt formula checks
  double rate_check_step = 1e-3;
};

/// Known check names; each present key becomes one verdict.
inline const std::set<std::string>& known_checks() {
  static const std::set<std::string> k{"translation", "energy_drift", "momentum_drift",
                                       "eps_over_alpha", "min_center_gap", "rate_ratio",
                                       "monotonicity_A", "rate_formula", "window_decay",
                                       "newton_iters"};
  return k;
}

struct ScenarioConfig {
  std::string name;
  Frame frame = Frame::hydro;
  double theta0 = 0.0;
  MultiSolitonConfig solitons;
  PerturbationConfig perturbation;
  GridConfig grid;
  IntegratorConfig integrator;
  DiagnosticsConfig diagnostics;
  std::map<std::string, double> checks;

  void validate() const;
};

namespace detail {

inline Error config_error(const std::string& field, const std::string& what) {
  return Error(Errc::config, "field '" + field + "': " + what);
}

inline void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw config_error(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw config_error(path.empty() ? key : path + "." + key, "unknown key");
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const json& member(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw config_error(join(path, key), "missing");
  return j.at(key);
}

inline double get_number(const json& j, const std::string& path, const std::string& key) {
  const json& v = member(j, path, key);
  if (!v.is_number()) throw config_error(join(path, key), "expected a number");
  return v.get<double>();
}

inline double get_number(const json& j, const std::string& path, const std::string& key, double fallback) {
  return j.contains(key) ? get_number(j, path, key) : fallback;
}

inline std::uint64_t get_count(const json& j, const std::string& path, const std::string& key) {
  const json& v = member(j, path, key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw config_error(join(path, key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::uint64_t get_count(const json& j, const std::string& path, const std::string& key,
                               std::uint64_t fallback) {
  return j.contains(key) ? get_count(j, path, key) : fallback;
}

inline bool get_bool(const json& j, const std::string& path, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw config_error(join(path, key), "expected true or false");
  return j.at(key).get<bool>();
}

inline std::string get_string(const json& j, const std::string& path, const std::string& key) {
  const json& v = member(j, path, key);
  if (!v.is_string()) throw config_error(join(path, key), "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> get_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw config_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw config_error(path, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

/// Rethrows library validation errors as config errors on the given field.
template <class F>
void as_field(const std::string& field, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    throw config_error(field, e.detail());
  }
}

}  // namespace detail

inline MultiSolitonConfig parse_solitons(const json& j, const std::string& path) {
  using namespace detail;
  check_keys(j, path, {"params", "min_separation"});
  MultiSolitonConfig cfg;
  cfg.min_separation = get_number(j, path, "min_separation", 0.0);
  const json& ps = member(j, path, "params");
  if (!ps.is_array() || ps.empty()) throw config_error(join(path, "params"), "expected a non-empty array");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const std::string p = join(path, "params") + "[" + std::to_string(k) + "]";
    check_keys(ps[k], p, {"c", "a", "s"});
    const double s = get_number(ps[k], p, "s", 1.0);
    if (s != 1.0 && s != -1.0) throw config_error(p + ".s", "must be +1 or -1");
    cfg.params.push_back({get_number(ps[k], p, "c"), get_number(ps[k], p, "a"), static_cast<int>(s)});
  }
  as_field(path, [&] { cfg.validate(); });
  return cfg;
}

inline json solitons_to_json(const MultiSolitonConfig& cfg) {
  json ps = json::array();
  for (const auto& p : cfg.params) ps.push_back({{"c", p.c}, {"a", p.a}, {"s", p.s}});
  return {{"params", ps}, {"min_separation", cfg.min_separation}};
}

inline void ScenarioConfig::validate() const {
  using detail::as_field;
  using detail::config_error;
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..")
    throw config_error("name", "must be a non-empty plain file name");
  as_field("solitons", [&] { solitons.validate(); });
  if (!(perturbation.amplitude >= 0.0) || !std::isfinite(perturbation.amplitude))
    throw config_error("perturbation.amplitude", "must be finite and >= 0");
  if (perturbation.kind == PerturbationKind::between_bump && solitons.size() < 2)
    throw config_error("perturbation.kind", "between_bump needs at least two solitons");
  if (!(perturbation.width > 0.0)) throw config_error("perturbation.width", "must be positive");
  Grid g;
  as_field("grid", [&] { g = grid.grid(); });
  as_field("integrator", [&] { integrator.validate(g); });
  if (!(diagnostics.window_half_width > 0.0))
    throw config_error("diagnostics.window_half_width", "must be positive");
  if (diagnostics.rate_check_every < 1) throw config_error("diagnostics.rate_check_every", "must be >= 1");
  if (!(diagnostics.rate_check_step > 0.0)) throw config_error("diagnostics.rate_check_step", "must be positive");
  if (diagnostics.fixed_speed) {
    const auto c = solitons.speeds();
    if (diagnostics.gammas.size() != c.size() + 1)
      throw config_error("diagnostics.b_path.fixed_speed", "needs N+1 speeds");
    const std::size_t N = c.size();
    for (std::size_t j = 0; j <= N; ++j) {
      const double lo = j == 0 ? -1.0 : c[j - 1], hi = j == N ? 1.0 : c[j];
      if (!(lo < diagnostics.gammas[j] && diagnostics.gammas[j] < hi))
        throw config_error("diagnostics.b_path.fixed_speed",
                           "speed " + std::to_string(j + 1) + " does not interlace the soliton speeds");
    }
  }
  for (const auto& [k, v] : checks) {
    if (!known_checks().count(k)) throw config_error("checks." + k, "unknown check");
    if (!std::isfinite(v)) throw config_error("checks." + k, "threshold must be finite");
  }
}

inline ScenarioConfig parse_scenario(const json& j) {
  using namespace detail;
  check_keys(j, "", {"name", "frame", "theta0", "solitons", "perturbation", "grid", "integrator",
                     "diagnostics", "checks"});
  ScenarioConfig cfg;
  cfg.name = get_string(j, "", "name");
  if (j.contains("frame")) {
    const std::string f = get_string(j, "", "frame");
    if (f == "spin") cfg.frame = Frame::spin;
    else if (f == "hydro") cfg.frame = Frame::hydro;
    else throw config_error("frame", "expected \"spin\" or \"hydro\", got \"" + f + "\"");
  }
  cfg.theta0 = get_number(j, "", "theta0", 0.0);
  cfg.solitons = parse_solitons(member(j, "", "solitons"), "solitons");

  if (j.contains("perturbation")) {
    const json& p = j.at("perturbation");
    check_keys(p, "perturbation", {"kind", "amplitude", "seed", "width"});
    const std::string kind = get_string(p, "perturbation", "kind");
    static const std::map<std::string, PerturbationKind> kinds{
        {"none", PerturbationKind::none},
        {"random_smooth", PerturbationKind::random_smooth},
        {"chi_direction", PerturbationKind::chi_direction},
        {"between_bump", PerturbationKind::between_bump}};
    if (!kinds.count(kind)) throw config_error("perturbation.kind", "unknown kind \"" + kind + "\"");
    cfg.perturbation.kind = kinds.at(kind);
    cfg.perturbation.amplitude = get_number(p, "perturbation", "amplitude", 0.0);
    cfg.perturbation.seed = get_count(p, "perturbation", "seed", 0);
    cfg.perturbation.width = get_number(p, "perturbation", "width", 2.0);
  }

  const json& g = member(j, "", "grid");
  check_keys(g, "grid", {"period", "n"});
  cfg.grid.period = get_number(g, "grid", "period");
  cfg.grid.n = get_count(g, "grid", "n");

  const json& in = member(j, "", "integrator");
  check_keys(in, "integrator", {"dt", "t_end", "sample_stride", "renormalize_spin", "dealias", "cfl_factor"});
  cfg.integrator.dt = get_number(in, "integrator", "dt");
  cfg.integrator.t_end = get_number(in, "integrator", "t_end");
  cfg.integrator.sample_stride = get_count(in, "integrator", "sample_stride", 100);
  cfg.integrator.renormalize_spin = get_bool(in, "integrator", "renormalize_spin", true);
  cfg.integrator.dealias = get_bool(in, "integrator", "dealias", false);
  cfg.integrator.cfl_factor = get_number(in, "integrator", "cfl_factor", 0.2);

  if (j.contains("diagnostics")) {
    const json& d = j.at("diagnostics");
    check_keys(d, "diagnostics", {"y0_list", "window_half_width", "b_path", "rate_check_every", "rate_check_step"});
    if (d.contains("y0_list")) cfg.diagnostics.y0_list = get_numbers(d.at("y0_list"), "diagnostics.y0_list");
    cfg.diagnostics.window_half_width = get_number(d, "diagnostics", "window_half_width", 5.0);
    cfg.diagnostics.rate_check_every = get_count(d, "diagnostics", "rate_check_every", 10);
    cfg.diagnostics.rate_check_step = get_number(d, "diagnostics", "rate_check_step", 1e-3);
    if (d.contains("b_path")) {
      const json& b = d.at("b_path");
      if (b.is_string()) {
        if (b.get<std::string>() != "midpoints")
          throw config_error("diagnostics.b_path", "expected \"midpoints\" or {\"fixed_speed\": [...]}");
      } else {
        check_keys(b, "diagnostics.b_path", {"fixed_speed"});
        cfg.diagnostics.fixed_speed = true;
        cfg.diagnostics.gammas = get_numbers(member(b, "diagnostics.b_path", "fixed_speed"),
                                             "diagnostics.b_path.fixed_speed");
      }
    }
  }
  if (j.contains("checks")) {
    const json& c = j.at("checks");
    check_keys(c, "checks", known_checks());
    for (const auto& [k, _] : c.items()) cfg.checks[k] = get_number(c, "checks", k);
  }
  cfg.validate();
  return cfg;
}

/// Reads a JSON file, mapping syntax errors (with line and column) to config errors.
inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f.good()) throw Error(Errc::config, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config, path.string() + ": " + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return parse_scenario(j);
  } catch (const Error& e) {
    throw Error(Errc::config, path.string() + ": " + e.detail());
  }
}

inline json scenario_to_json(const ScenarioConfig& cfg) {
  static const char* kinds[] = {"none", "random_smooth", "chi_direction", "between_bump"};
  json d{{"y0_list", cfg.diagnostics.y0_list},
         {"window_half_width", cfg.diagnostics.window_half_width},
         {"rate_check_every", cfg.diagnostics.rate_check_every},
         {"rate_check_step", cfg.diagnostics.rate_check_step}};
  if (cfg.diagnostics.fixed_speed) d["b_path"] = {{"fixed_speed", cfg.diagnostics.gammas}};
  else d["b_path"] = "midpoints";
  return {{"name", cfg.name},
          {"frame", cfg.frame == Frame::spin ? "spin" : "hydro"},
          {"theta0", cfg.theta0},
          {"solitons", solitons_to_json(cfg.solitons)},
          {"perturbation",
           {{"kind", kinds[static_cast<int>(cfg.perturbation.kind)]},
            {"amplitude", cfg.perturbation.amplitude},
            {"seed", cfg.perturbation.seed},
            {"width", cfg.perturbation.width}}},
          {"grid", {{"period", cfg.grid.period}, {"n", cfg.grid.n}}},
          {"integrator",
           {{"dt", cfg.integrator.dt},
            {"t_end", cfg.integrator.t_end},
            {"sample_stride", cfg.integrator.sample_stride},
            {"renormalize_spin", cfg.integrator.renormalize_spin},
            {"dealias", cfg.integrator.dealias},
            {"cfl_factor", cfg.integrator.cfl_factor}}},
          {"diagnostics", d},
          {"checks", cfg.checks}};
}

struct Verdict {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
};

inline json verdicts_to_json(const std::vector<Verdict>& vs) {
  json out = json::array();
  for (const auto& v : vs) {
    json e{{"name", v.name}, {"pass", v.pass}, {"threshold", v.threshold}};
    if (std::isfinite(v.measured)) e["measured"] = v.measured;
    else e["measured"] = nullptr;
    out.push_back(e);
  }
  return out;
}

/// Series emitted by a run; verdicts are computed from these alone.
struct SeriesTables {
  io::CsvTable diagnostics;  // t, E, P, U, [translation_error], I_*, window_*
  io::CsvTable modulation;   // t, c_k, a_k, eps_xnorm, iters
  io::CsvTable rates;        // t, path (0 = a, 1 = b), j, y0, fd, formula
};

struct RunReport {
  ScenarioConfig config;
  SeriesTables series;
  ModulationTrack track;
  std::vector<Verdict> verdicts;
  std::optional<Error> failure;
  double failure_time = 0.0;
  std::map<std::string, double> timings;
  io::StoredTrajectory trajectory;

  bool all_pass() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return !failure.has_value();
  }

  json to_json() const {
    json j{{"scenario", config.name},
           {"config", scenario_to_json(config)},
           {"verdicts", verdicts_to_json(verdicts)},
           {"timings", timings},
           {"all_pass", all_pass()}};
    if (failure) j["failure"] = {{"message", failure->what()}, {"time", failure_time}};
    else j["failure"] = nullptr;
    return j;
  }
};

inline std::string y0_label(double y0) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", y0);
  return buf;
}

namespace detail {

inline std::size_t column(const io::CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return i;
  throw Error(Errc::invalid_argument, "series has no column " + name);
}

inline std::vector<double> column_values(const io::CsvTable& t, const std::string& name) {
  const std::size_t c = column(t, name);
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(r[c]);
  return out;
}

inline bool has_column(const io::CsvTable& t, const std::string& name) {
  for (const auto& h : t.header)
    if (h == name) return true;
  return false;
}

/// Worst relative deviation from the first value, relative to max(|x0|, 1).
inline double max_drift(const std::vector<double>& x) {
  double d = 0.0;
  for (double v : x) d = std::max(d, std::abs(v - x.front()));
  return x.empty() ? 0.0 : d / std::max(std::abs(x.front()), 1.0);
}

/// min over t0 <= t1 of x(t1) - x(t0); NaN samples are skipped.
inline double monotonicity_defect(const std::vector<double>& x) {
  double best = -std::numeric_limits<double>::infinity(), defect = 0.0;
  for (double v : x) {
    if (std::isnan(v)) continue;
    best = std::max(best, v);
    defect = std::min(defect, v - best);
  }
  return defect;
}

}  // namespace detail

/// Rebuilds a modulation track (with derivative estimates) from its CSV table.
inline ModulationTrack track_from_table(const io::CsvTable& t, std::size_t N) {
  ModulationTrack tr;
  for (const auto& r : t.rows) {
    tr.times.push_back(r[0]);
    tr.c.emplace_back(r.begin() + 1, r.begin() + 1 + static_cast<std::ptrdiff_t>(N));
    tr.a.emplace_back(r.begin() + 1 + static_cast<std::ptrdiff_t>(N), r.begin() + 1 + static_cast<std::ptrdiff_t>(2 * N));
    tr.eps_xnorm.push_back(r[1 + 2 * N]);
    tr.iters.push_back(static_cast<int>(r[2 + 2 * N]));
  }
  differentiate_track(tr);
  return tr;
}

inline io::CsvTable track_table(const ModulationTrack& tr, std::size_t N) {
  io::CsvTable t;
  t.header.push_back("t");
  for (std::size_t k = 1; k <= N; ++k) t.header.push_back("c_" + std::to_string(k));
  for (std::size_t k = 1; k <= N; ++k) t.header.push_back("a_" + std::to_string(k));
  t.header.push_back("eps_xnorm");
  t.header.push_back("iters");
  for (std::size_t i = 0; i < tr.size(); ++i) {
    std::vector<double> r{tr.times[i]};
    r.insert(r.end(), tr.c[i].begin(), tr.c[i].end());
    r.insert(r.end(), tr.a[i].begin(), tr.a[i].end());
    r.push_back(tr.eps_xnorm[i]);
    r.push_back(tr.iters[i]);
    t.add_row(std::move(r));
  }
  return t;
}

/// Verdicts for every configured check, from the emitted series only.
inline std::vector<Verdict> evaluate_verdicts(const ScenarioConfig& cfg, const SeriesTables& s) {
  using namespace detail;
  std::vector<Verdict> out;
  const std::size_t N = cfg.solitons.size();
  const ModulationTrack tr = track_from_table(s.modulation, N);
  const double nu = speed_gaps(cfg.solitons).nu_c;
  auto add = [&](const std::string& name, double measured, double threshold, bool upper = true) {
    const bool pass = std::isfinite(measured) && (upper ? measured <= threshold : measured >= threshold);
    out.push_back({name, pass, measured, threshold});
  };
  for (const auto& [name, thr] : cfg.checks) {
    if (name == "translation") {
      const auto e = column_values(s.diagnostics, "translation_error");
      add(name, e.empty() ? NAN : e.back(), thr);
    } else if (name == "energy_drift") {
      add(name, max_drift(column_values(s.diagnostics, "E")), thr);
    } else if (name == "momentum_drift") {
      add(name, max_drift(column_values(s.diagnostics, "P")), thr);
    } else if (name == "eps_over_alpha") {
      double sup = tr.size() ? 0.0 : NAN;
      for (double e : tr.eps_xnorm) sup = std::max(sup, e);
      out.push_back({"eps_sup", std::isfinite(sup) && sup <= thr * cfg.perturbation.amplitude, sup,
                     thr * cfg.perturbation.amplitude});
    } else if (name == "min_center_gap") {
      double gap = tr.size() && N > 1 ? INFINITY : NAN;
      for (std::size_t i = 0; i < tr.size(); ++i)
        for (std::size_t k = 1; k < N; ++k) gap = std::min(gap, tr.a[i][k] - tr.a[i][k - 1]);
      add(name, gap, thr, false);
    } else if (name == "rate_ratio") {
      double r = tr.size() ? 0.0 : NAN;
      for (std::size_t i = 0; i < tr.size(); ++i) r = std::max(r, tr.rate_ratio(i));
      add(name, r, thr);
    } else if (name == "monotonicity_A") {
      double A = 0.0;
      bool any = false;
      for (std::size_t c = 0; c < s.diagnostics.header.size(); ++c) {
        const std::string& h = s.diagnostics.header[c];
        if (h.rfind("I_", 0) != 0) continue;
        const double y0 = std::stod(h.substr(h.find("_y") + 2));
        std::vector<double> x;
        for (const auto& r : s.diagnostics.rows) x.push_back(r[c]);
        A = std::max(A, -monotonicity_defect(x) * std::exp(nu * std::abs(y0) / 16.0));
        any = true;
      }
      add(name, any ? A : NAN, thr);
    } else if (name == "rate_formula") {
      double e = s.rates.rows.empty() ? NAN : 0.0;
      for (const auto& r : s.rates.rows) e = std::max(e, std::abs(r[4] - r[5]));
      add(name, e, thr);
    } else if (name == "window_decay") {
      double ratio = N > 1 ? 0.0 : NAN;
      for (std::size_t k = 2; k <= N; ++k) {
        std::vector<double> w;
        for (double x : column_values(s.diagnostics, "window_b" + std::to_string(k)))
          if (!std::isnan(x)) w.push_back(x);
        if (w.size() < 2 || !(w.front() > 0)) {
          ratio = NAN;
          break;
        }
        ratio = std::max(ratio, w.back() / w.front());
      }
      add(name, ratio, thr);
    } else if (name == "newton_iters") {
      double m = tr.size() ? 0.0 : NAN;
      for (int it : tr.iters) m = std::max(m, static_cast<double>(it));
      add(name, m, thr);
    }
  }
  return out;
}

/// Builds the initial datum S_{c,a,s} plus the configured perturbation.
inline HydroState initial_state(const ScenarioConfig& cfg, ChiCache& cache) {
  const Grid g = cfg.grid.grid();
  HydroState u = multi_soliton_sum(cfg.solitons, g);
  const auto& pc = cfg.perturbation;
  switch (pc.kind) {
    case PerturbationKind::none:
      break;
    case PerturbationKind::random_smooth:
      u += random_smooth(g, pc.amplitude, pc.seed);
      break;
    case PerturbationKind::chi_direction: {
      HydroState h(g);
      for (std::size_t k = 0; k < cfg.solitons.size(); ++k) {
        const auto& p = cfg.solitons.params[k];
        const NegativeMode& m = cache.get(k, p.c, g);
        const double shift = p.a - g.midpoint();
        h.axpy(p.s, HydroState(g, spectral::translate(m.chi.v, g.period(), shift),
                               spectral::translate(m.chi.w, g.period(), shift)));
      }
      const double nrm = x_norm(h);
      if (nrm > 0.0) h *= pc.amplitude / nrm;
      u += h;
      break;
    }
    case PerturbationKind::between_bump:
      for (std::size_t k = 1; k < cfg.solitons.size(); ++k) {
        const double mid = 0.5 * (cfg.solitons.params[k - 1].a + cfg.solitons.params[k].a);
        u += gaussian_bump(g, pc.amplitude, mid, pc.width);
      }
      break;
  }
  check_nv(u);
  return u;
}

/// Runs one scenario end to end. Dynamics and modulation failures are recorded
/// in the report (with the partial series); config errors propagate.
inline RunReport run_scenario(const ScenarioConfig& cfg) {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
  const auto t_start = clock::now();
  cfg.validate();
  RunReport rep;
  rep.config = cfg;
  const Grid g = cfg.grid.grid();
  const std::size_t N = cfg.solitons.size();
  ChiCache cache;

  // Evolution.
  auto t0 = clock::now();
  const HydroState u0 = initial_state(cfg, cache);
  std::vector<double> times;
  std::vector<HydroState> states;
  std::optional<Error> evolve_failure;
  double evolve_failure_time = 0.0;
  if (cfg.frame == Frame::hydro) {
    auto traj = evolve(u0, cfg.integrator);
    times = std::move(traj.times);
    states = std::move(traj.states);
    evolve_failure = traj.failure;
    evolve_failure_time = traj.failure_time;
  } else {
    auto traj = evolve(reconstruct_spin(u0, cfg.theta0), cfg.integrator);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      try {
        states.push_back(extract_hydro(traj.states[i]));
        times.push_back(traj.times[i]);
      } catch (const Error& e) {
        traj.failure = e;
        traj.failure_time = traj.times[i];
        break;
      }
    }
    evolve_failure = traj.failure;
    evolve_failure_time = traj.failure_time;
  }
  rep.timings["evolve_s"] = seconds(t0);
  rep.trajectory = {g, cfg.frame == Frame::spin ? io::TrajectoryFrame::spin : io::TrajectoryFrame::hydro,
                    integrate(g, u0.w), times, states};

  // Modulation.
  t0 = clock::now();
  rep.track = track_modulation(times, states, cfg.solitons, cache);
  rep.timings["modulation_s"] = seconds(t0);
  if (evolve_failure) {
    rep.failure = evolve_failure->with_context("at t = " + std::to_string(evolve_failure_time));
    rep.failure_time = evolve_failure_time;
  }
  if (rep.track.failure && (!rep.failure || rep.track.failure_time < rep.failure_time)) {
    rep.failure = rep.track.failure;
    rep.failure_time = rep.track.failure_time;
  }

  // Diagnostics.
  t0 = clock::now();
  const auto& dc = cfg.diagnostics;
  const double nu = speed_gaps(cfg.solitons).nu_c;
  io::CsvTable& diag = rep.series.diagnostics;
  diag.header = {"t", "E", "P", "U"};
  if (N == 1) diag.header.push_back("translation_error");
  for (std::size_t k = 1; k <= N; ++k)
    for (double y0 : dc.y0_list) diag.header.push_back("I_a" + std::to_string(k) + "_y" + y0_label(y0));
  for (std::size_t k = 2; k <= N; ++k)
    for (double y0 : dc.y0_list) diag.header.push_back("I_b" + std::to_string(k) + "_y" + y0_label(y0));
  for (std::size_t k = 1; k <= N; ++k) diag.header.push_back("window_a" + std::to_string(k));
  for (std::size_t k = 2; k <= N; ++k) diag.header.push_back("window_b" + std::to_string(k));
  rep.series.rates.header = {"t", "path", "j", "y0", "fd", "formula"};

  const ModulationTrack& tr = rep.track;
  std::vector<double> b0(N + 1, 0.0);
  if (tr.size())
    for (std::size_t k = 1; k < N; ++k) b0[k + 1] = 0.5 * (tr.a[0][k - 1] + tr.a[0][k]);
  auto b_center = [&](std::size_t i, std::size_t k) {  // k in 2..N
    if (dc.fixed_speed) return b0[k] + dc.gammas[k - 1] * tr.times[i];
    return 0.5 * (tr.a[i][k - 2] + tr.a[i][k - 1]);
  };
  auto b_speed = [&](std::size_t i, std::size_t k) {
    if (dc.fixed_speed) return dc.gammas[k - 1];
    return 0.5 * (tr.a_dot[i][k - 2] + tr.a_dot[i][k - 1]);
  };
  auto I_at = [&](const HydroState& s, double center, double y0) {
    return localized_momentum(s, {[center](double) { return center; }, y0, nu}, 0.0);
  };
  const double h = dc.rate_check_step;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const HydroState& s = states[i];
    std::vector<double> row{times[i], energy_hydro(s), momentum(s), virial_U(s)};
    if (N == 1) {
      const auto& p = cfg.solitons.params[0];
      const HydroState ref = p.s * sampled_soliton(p.c, p.a + p.c * times[i], g);
      row.push_back(l2_norm(s - ref) / l2_norm(ref));
    }
    const bool tracked = i < tr.size();
    for (std::size_t k = 1; k <= N; ++k)
      for (double y0 : dc.y0_list) row.push_back(tracked ? I_at(s, tr.a[i][k - 1], y0) : NAN);
    for (std::size_t k = 2; k <= N; ++k)
      for (double y0 : dc.y0_list) row.push_back(tracked ? I_at(s, b_center(i, k), y0) : NAN);
    HydroState eps(g);
    if (tracked) eps = s - soliton_sum_unchecked(tr.c[i], tr.a[i], cfg.solitons.signs(), g);
    for (std::size_t k = 1; k <= N; ++k)
      row.push_back(tracked ? window_norm(eps, tr.a[i][k - 1], dc.window_half_width) : NAN);
    for (std::size_t k = 2; k <= N; ++k)
      row.push_back(tracked ? window_norm(eps, b_center(i, k), dc.window_half_width) : NAN);
    diag.add_row(std::move(row));

    // Finite-difference dI/dt against the rate formula, weight moving linearly.
    if (!tracked || i % dc.rate_check_every != 0 || !cfg.checks.count("rate_formula")) continue;
    HydroState fwd, bwd;
    try {
      fwd = step_rk4(s, h);
      bwd = step_rk4(s, -h);
    } catch (const Error&) {
      continue;
    }
    auto check = [&](int path, std::size_t k, double center, double speed) {
      for (double y0 : dc.y0_list) {
        const double fd = (I_at(fwd, center + speed * h, y0) - I_at(bwd, center - speed * h, y0)) / (2 * h);
        const double formula =
            localized_momentum_rate(s, {[center](double) { return center; }, y0, nu}, 0.0, speed);
        rep.series.rates.add_row({times[i], double(path), double(k), y0, fd, formula});
      }
    };
    for (std::size_t k = 1; k <= N; ++k) check(0, k, tr.a[i][k - 1], tr.a_dot[i][k - 1]);
    for (std::size_t k = 2; k <= N; ++k) check(1, k, b_center(i, k), b_speed(i, k));
  }
  rep.series.modulation = track_table(tr, N);
  rep.timings["diagnostics_s"] = seconds(t0);

  rep.verdicts = evaluate_verdicts(cfg, rep.series);
  const double reached = times.empty() ? 0.0 : times.back();
  rep.verdicts.insert(rep.verdicts.begin(),
                      Verdict{"run_complete", !rep.failure.has_value(),
                              rep.failure ? rep.failure_time : reached, cfg.integrator.t_end, });
  rep.timings["total_s"] = seconds(t_start);
  return rep;
}

/// Writes diagnostics.csv, modulation.csv, rates.csv and report.json under dir/name.
inline std::filesystem::path write_report(const RunReport& rep, const std::filesystem::path& dir,
                                          bool save_trajectory = false) {
  const auto out = dir / rep.config.name;
  std::filesystem::create_directories(out);
  io::write_csv(out / "diagnostics.csv", rep.series.diagnostics);
  io::write_csv(out / "modulation.csv", rep.series.modulation);
  io::write_csv(out / "rates.csv", rep.series.rates);
  if (save_trajectory) io::write_trajectory(out / "trajectory.bin", rep.trajectory);
  io::write_text(out / "report.json", rep.to_json().dump(2) + "\n");
  return out;
}

// Virial audit: small random data, U'(t) against the quarter X-norm bound.

struct VirialAuditConfig {
  double amplitude = 0.01;
  std::uint64_t seed = 7;
  double envelope_fraction = 1.0 / 16.0;
  GridConfig grid{409.6, 4096};
  IntegratorConfig integrator{2e-3, 10.0, Scheme::rk4, true, 50};
};

struct VirialAuditResult {
  io::CsvTable series;  // t, U, U_rate, xnorm2, seam_ok
  std::vector<Verdict> verdicts;
  std::optional<Error> failure;

  bool all_pass() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return !failure.has_value();
  }
};

inline std::vector<Verdict> virial_verdicts(const io::CsvTable& t) {
  double ratio = t.rows.empty() ? NAN : INFINITY, seam = t.rows.empty() ? NAN : 1.0;
  for (const auto& r : t.rows) {
    ratio = std::min(ratio, r[3] > 0 ? r[2] / r[3] : INFINITY);
    seam = std::min(seam, r[4]);
  }
  return {{"virial_coercivity", std::isfinite(ratio) && ratio >= 0.25, ratio, 0.25},
          {"seam_support", seam == 1.0, seam, 1.0}};
}

inline VirialAuditResult virial_audit(const VirialAuditConfig& cfg) {
  const Grid g = cfg.grid.grid();
  SmoothNoiseOptions opt;
  opt.envelope_fraction = cfg.envelope_fraction;
  const HydroState u0 = random_smooth(g, cfg.amplitude, cfg.seed, opt);
  VirialAuditResult res;
  res.series.header = {"t", "U", "U_rate", "xnorm2", "seam_ok"};
  Diagnostic<HydroState> record = [&](double t, const HydroState& s) {
    VirialWarning w;
    const double rate = virial_rate(s, &w);
    const double xn = x_norm(s);
    res.series.add_row({t, virial_U(s), rate, xn * xn, w.seam_ok ? 1.0 : 0.0});
  };
  const auto traj = evolve(u0, cfg.integrator, {record}, false);
  res.failure = traj.failure;
  res.verdicts = virial_verdicts(res.series);
  return res;
}

}  // namespace lllab
