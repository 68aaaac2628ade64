// Command-line front end: simulate, modulate-track, monotonicity-audit,
// virial-audit, soliton-table.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "lllab/scenario.hpp"

namespace fs = std::filesystem;
using namespace lllab;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

std::size_t thread_cap(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LL_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) cap = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

/// Runs job(i) for i < count on at most thread_cap(count) threads.
template <class F>
void run_pool(std::size_t count, F job) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < thread_cap(count); ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  for (auto& t : workers) t.join();
}

std::mutex print_mutex;

void print_verdicts(const std::string& title, const std::vector<Verdict>& vs) {
  std::lock_guard lock(print_mutex);
  for (const auto& v : vs)
    std::printf("%s  %-18s %s  measured=%s threshold=%s\n", title.c_str(), v.name.c_str(),
                v.pass ? "PASS" : "FAIL", io::format_number(v.measured).c_str(),
                io::format_number(v.threshold).c_str());
}

int simulate(const std::vector<std::string>& paths, const fs::path& out, bool save_trajectory,
             bool monotonicity_only) {
  std::vector<ScenarioConfig> cfgs;
  for (const auto& p : paths) cfgs.push_back(load_scenario(p));
  if (monotonicity_only) {
    for (auto& c : cfgs) {
      std::map<std::string, double> kept;
      kept["monotonicity_A"] = c.checks.count("monotonicity_A") ? c.checks.at("monotonicity_A") : 10.0;
      kept["rate_formula"] = c.checks.count("rate_formula") ? c.checks.at("rate_formula") : 1e-6;
      c.checks = kept;
      c.name += "-monotonicity";
    }
  }
  std::vector<int> status(cfgs.size(), kExitFail);
  run_pool(cfgs.size(), [&](std::size_t i) {
    RunReport rep;
    try {
      rep = run_scenario(cfgs[i]);
    } catch (const Error& e) {
      std::lock_guard lock(print_mutex);
      std::fprintf(stderr, "%s: %s\n", cfgs[i].name.c_str(), e.what());
      return;
    }
    const fs::path dir = write_report(rep, out, save_trajectory);
    print_verdicts(cfgs[i].name, rep.verdicts);
    std::lock_guard lock(print_mutex);
    if (rep.failure) std::printf("%s  failure at t = %g: %s\n", cfgs[i].name.c_str(), rep.failure_time,
                                 rep.failure->what());
    std::printf("%s  -> %s (%.1f s)\n", cfgs[i].name.c_str(), dir.string().c_str(), rep.timings.at("total_s"));
    status[i] = rep.all_pass() ? kExitPass : kExitFail;
  });
  for (int s : status)
    if (s != kExitPass) return kExitFail;
  return kExitPass;
}

int modulate_track(const fs::path& traj_path, const fs::path& guess_path, const fs::path& out) {
  const json g = read_json_file(guess_path);
  MultiSolitonConfig guess;
  std::map<std::string, double> checks;
  try {
    detail::check_keys(g, "", {"solitons", "checks"});
    guess = parse_solitons(detail::member(g, "", "solitons"), "solitons");
    if (g.contains("checks")) {
      detail::check_keys(g.at("checks"), "checks", {"newton_iters"});
      for (const auto& [k, _] : g.at("checks").items()) checks[k] = detail::get_number(g.at("checks"), "checks", k);
    }
  } catch (const Error& e) {
    throw Error(Errc::config, guess_path.string() + ": " + e.detail());
  }
  const io::StoredTrajectory tr = io::read_trajectory(traj_path);

  ChiCache cache;
  const ModulationTrack track = track_modulation(tr.times, tr.states, guess, cache);
  const io::CsvTable table = track_table(track, guess.size());
  std::vector<Verdict> vs{{"run_complete", track.complete(), track.complete() ? track.times.back() : track.failure_time,
                           tr.times.empty() ? 0.0 : tr.times.back()}};
  if (checks.count("newton_iters")) {
    double m = 0;
    for (int it : track.iters) m = std::max(m, double(it));
    vs.push_back({"newton_iters", m <= checks["newton_iters"], m, checks["newton_iters"]});
  }
  const fs::path dir = out / (traj_path.stem().string() + "-track");
  fs::create_directories(dir);
  io::write_csv(dir / "modulation.csv", table);
  json rep{{"scenario", dir.filename().string()},
           {"trajectory", traj_path.string()},
           {"guess", solitons_to_json(guess)},
           {"verdicts", verdicts_to_json(vs)},
           {"failure", track.failure ? json(track.failure->what()) : json(nullptr)}};
  io::write_text(dir / "report.json", rep.dump(2) + "\n");
  print_verdicts(dir.filename().string(), vs);
  for (const auto& v : vs)
    if (!v.pass) return kExitFail;
  return kExitPass;
}

int virial(double amplitude, std::uint64_t seed, int runs, double t_end, const fs::path& out) {
  if (!(amplitude >= 0.0) || runs < 1 || !(t_end >= 0.0))
    throw Error(Errc::config, "virial-audit needs amplitude >= 0, runs >= 1, t-end >= 0");
  std::vector<VirialAuditResult> results(static_cast<std::size_t>(runs));
  std::vector<VirialAuditConfig> cfgs(results.size());
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    cfgs[i].amplitude = amplitude;
    cfgs[i].seed = seed + i;
    cfgs[i].integrator.t_end = t_end;
    detail::as_field("t-end", [&] { cfgs[i].integrator.validate(cfgs[i].grid.grid()); });
  }
  run_pool(cfgs.size(), [&](std::size_t i) { results[i] = virial_audit(cfgs[i]); });

  const fs::path dir = out / "virial-audit";
  fs::create_directories(dir);
  json runs_json = json::array();
  bool pass = true;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const std::string tag = "seed_" + std::to_string(cfgs[i].seed);
    io::write_csv(dir / (tag + ".csv"), results[i].series);
    runs_json.push_back({{"seed", cfgs[i].seed},
                         {"verdicts", verdicts_to_json(results[i].verdicts)},
                         {"failure", results[i].failure ? json(results[i].failure->what()) : json(nullptr)}});
    print_verdicts(tag, results[i].verdicts);
    pass = pass && results[i].all_pass();
  }
  json rep{{"scenario", "virial-audit"}, {"amplitude", amplitude}, {"t_end", t_end}, {"runs", runs_json},
           {"all_pass", pass}};
  io::write_text(dir / "report.json", rep.dump(2) + "\n");
  return pass ? kExitPass : kExitFail;
}

int soliton_table(double c, double xmax, double dx, const std::string& out) {
  if (!(std::abs(c) < 1.0) || !(xmax > 0.0) || !(dx > 0.0))
    throw Error(Errc::config, "soliton-table needs |c| < 1, xmax > 0, dx > 0");
  io::CsvTable t;
  t.header = {"x", "u1", "u2", "u3", "v", "w"};
  const auto m = static_cast<long>(std::floor(xmax / dx + 1e-9));
  for (long i = -m; i <= m; ++i) {
    const double x = static_cast<double>(i) * dx;
    const Vec3 u = soliton_spin(c, x);
    const HydroPoint q = soliton_hydro(c, x);
    t.add_row({x, u[0], u[1], u[2], q.v, q.w});
  }
  if (out.empty()) {
    std::cout << t.str();
  } else {
    fs::create_directories(out);
    io::write_csv(fs::path(out) / ("soliton_c" + y0_label(c) + ".csv"), t);
  }
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the easy-plane Landau-Lifshitz equation"};
  app.require_subcommand(1);
  std::string out = "out";

  auto* sim = app.add_subcommand("simulate", "Run scenarios (in parallel, capped by LL_LAB_THREADS)");
  std::vector<std::string> sim_paths;
  bool save_traj = false;
  sim->add_option("configs", sim_paths, "Scenario JSON files")->required();
  sim->add_option("--out", out, "Output directory");
  sim->add_flag("--save-trajectory", save_traj, "Also write trajectory.bin");

  auto* mt = app.add_subcommand("modulate-track", "Modulate every snapshot of a stored trajectory");
  std::string traj_path, guess_path;
  mt->add_option("trajectory", traj_path, "trajectory.bin written by simulate --save-trajectory")->required();
  mt->add_option("guess", guess_path, "JSON with the initial soliton parameters")->required();
  mt->add_option("--out", out, "Output directory");

  auto* mono = app.add_subcommand("monotonicity-audit", "Localized momentum monotonicity and rate checks");
  std::vector<std::string> mono_paths;
  mono->add_option("configs", mono_paths, "Scenario JSON files")->required();
  mono->add_option("--out", out, "Output directory");

  auto* vir = app.add_subcommand("virial-audit", "Virial coercivity along small random solutions");
  double amplitude = 0.01, t_end = 10.0;
  std::uint64_t seed = 7;
  int runs = 1;
  vir->add_option("--amplitude", amplitude, "X-norm of the initial datum");
  vir->add_option("--seed", seed, "First seed");
  vir->add_option("--runs", runs, "Number of consecutive seeds");
  vir->add_option("--t-end", t_end, "Final time");
  vir->add_option("--out", out, "Output directory");

  auto* tab = app.add_subcommand("soliton-table", "Sample a single soliton as CSV");
  double c = 0.5, xmax = 20.0, dx = 0.1;
  std::string tab_out;
  tab->add_option("--c", c, "Speed")->required();
  tab->add_option("--xmax", xmax, "Half width of the sampled interval")->required();
  tab->add_option("--dx", dx, "Sample spacing")->required();
  tab->add_option("--out", tab_out, "Output directory (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (*sim) return simulate(sim_paths, out, save_traj, false);
    if (*mono) return simulate(mono_paths, out, false, true);
    if (*mt) return modulate_track(traj_path, guess_path, out);
    if (*vir) return virial(amplitude, seed, runs, t_end, out);
    if (*tab) return soliton_table(c, xmax, dx, tab_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == Errc::config ? kExitConfig : kExitFail;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
  return kExitFail;
}
