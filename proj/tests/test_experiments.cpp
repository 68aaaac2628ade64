#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lllab/scenario.hpp"

using namespace lllab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lllab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json small_single() {
  return json::parse(R"({
    "name": "single-small",
    "solitons": {"params": [{"c": 0.6, "a": 0.0}]},
    "grid": {"period": 102.4, "n": 1024},
    "integrator": {"dt": 0.001, "t_end": 1.0, "sample_stride": 250},
    "checks": {"translation": 1e-3, "energy_drift": 1e-8, "momentum_drift": 1e-8, "newton_iters": 5}
  })");
}

Errc parse_code(const json& j, std::string* msg = nullptr) {
  try {
    parse_scenario(j);
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  return Errc::invalid_argument;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LLLAB_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Csv, SeventeenDigitsRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    const std::string s = io::format_number(x);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), x) << s;
  }
  EXPECT_EQ(io::format_number(0.1), "0.10000000000000001");
}

TEST(Csv, TableLayout) {
  io::CsvTable t;
  t.header = {"t", "a,b", "q\"x"};
  t.add_row({0.5, 1.0, -2.0});
  EXPECT_EQ(t.str(), "t,\"a,b\",\"q\"\"x\"\r\n0.5,1,-2\r\n");
  EXPECT_THROW(t.add_row({1.0}), Error);
}

TEST(Trajectory, BinaryRoundTripIsExact) {
  const fs::path dir = scratch("traj");
  const Grid g = Grid::centered(51.2, 256);
  io::StoredTrajectory tr{g, io::TrajectoryFrame::spin, 3.14159, {0.0, 0.5},
                          {sampled_soliton(0.6, 0.0, g), sampled_soliton(0.6, 0.3, g)}};
  io::write_trajectory(dir / "t.bin", tr);
  const io::StoredTrajectory back = io::read_trajectory(dir / "t.bin");
  EXPECT_EQ(back.grid, g);
  EXPECT_EQ(back.frame, io::TrajectoryFrame::spin);
  EXPECT_EQ(back.twist, 3.14159);
  ASSERT_EQ(back.times, tr.times);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.states[i].v, tr.states[i].v);
    EXPECT_EQ(back.states[i].w, tr.states[i].w);
  }
  EXPECT_EQ(fs::file_size(dir / "t.bin"), 8 + 6 * 8 + 2 * (8 + 2 * 256 * 8));
}

TEST(Trajectory, RejectsBadFiles) {
  const fs::path dir = scratch("traj_bad");
  io::write_text(dir / "junk.bin", "not a trajectory");
  EXPECT_THROW(io::read_trajectory(dir / "junk.bin"), Error);
  const Grid g = Grid::centered(51.2, 256);
  io::write_trajectory(dir / "t.bin", {g, io::TrajectoryFrame::hydro, 0.0, {0.0}, {HydroState(g)}});
  fs::resize_file(dir / "t.bin", fs::file_size(dir / "t.bin") - 8);
  try {
    io::read_trajectory(dir / "t.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST(ScenarioConfig, ShippedScenariosLoad) {
  for (const char* name : {"single-free", "pair-ordered", "between-bump"}) {
    const ScenarioConfig c = load_scenario(std::string(LLLAB_SCENARIO_DIR) + "/" + name + ".json");
    EXPECT_EQ(c.name, name);
    EXPECT_LE(c.integrator.dt, 2e-3);
  }
}

TEST(ScenarioConfig, Defaults) {
  const ScenarioConfig c = parse_scenario(small_single());
  EXPECT_EQ(c.frame, Frame::hydro);
  EXPECT_EQ(c.perturbation.kind, PerturbationKind::none);
  EXPECT_EQ(c.solitons.params[0].s, 1);
  EXPECT_EQ(c.diagnostics.y0_list, (std::vector<double>{5, 10, 20}));
  EXPECT_FALSE(c.diagnostics.fixed_speed);
}

TEST(ScenarioConfig, JsonRoundTrip) {
  json j = small_single();
  j["frame"] = "spin";
  j["perturbation"] = {{"kind", "random_smooth"}, {"amplitude", 0.01}, {"seed", 3}};
  const ScenarioConfig a = parse_scenario(j);
  const ScenarioConfig b = parse_scenario(scenario_to_json(a));
  EXPECT_EQ(scenario_to_json(a), scenario_to_json(b));
  EXPECT_EQ(b.frame, Frame::spin);
  EXPECT_EQ(b.perturbation.seed, 3u);
}

TEST(ScenarioConfig, UnknownKeysRejectedWithFieldPath) {
  std::string msg;
  json j = small_single();
  j["grid"]["dx"] = 0.1;
  EXPECT_EQ(parse_code(j, &msg), Errc::config);
  EXPECT_NE(msg.find("grid.dx"), std::string::npos) << msg;

  j = small_single();
  j["solitons"]["params"][0]["speed"] = 0.5;
  EXPECT_EQ(parse_code(j, &msg), Errc::config);
  EXPECT_NE(msg.find("solitons.params[0].speed"), std::string::npos) << msg;

  j = small_single();
  j["extra"] = 1;
  EXPECT_EQ(parse_code(j), Errc::config);
  j = small_single();
  j["checks"]["made_up"] = 1;
  EXPECT_EQ(parse_code(j), Errc::config);
}

TEST(ScenarioConfig, InvalidValuesRejected) {
  auto bad = [](auto mutate) {
    json j = small_single();
    mutate(j);
    return parse_code(j);
  };
  EXPECT_EQ(bad([](json& j) { j["frame"] = "lab"; }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j["grid"]["n"] = 1000; }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j["grid"]["n"] = "1024"; }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j.erase("grid"); }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j["integrator"]["dt"] = 0.01; }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j["perturbation"] = {{"kind", "random_smooth"}, {"amplitude", -0.1}}; }),
            Errc::config);
  EXPECT_EQ(bad([](json& j) { j["perturbation"] = {{"kind", "between_bump"}, {"amplitude", 0.1}}; }),
            Errc::config);
  EXPECT_EQ(bad([](json& j) { j["perturbation"] = {{"kind", "shake"}}; }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j["solitons"]["params"][0]["c"] = 1.0; }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j["solitons"]["params"][0]["s"] = 2; }), Errc::config);
  EXPECT_EQ(bad([](json& j) { j["name"] = "../x"; }), Errc::config);
  // Interlacing -1 < g1 < c1 < g2 < 1.
  EXPECT_EQ(bad([](json& j) { j["diagnostics"] = {{"b_path", {{"fixed_speed", {-0.5, 0.5}}}}}; }),
            Errc::config);
  EXPECT_EQ(bad([](json& j) { j["diagnostics"] = {{"b_path", {{"fixed_speed", {-0.5, 0.8}}}}}; }),
            Errc::invalid_argument);
  EXPECT_EQ(bad([](json& j) { j["diagnostics"] = {{"b_path", "lanes"}}; }), Errc::config);
}

TEST(ScenarioConfig, SyntaxErrorReportsLine) {
  const fs::path dir = scratch("syntax");
  io::write_text(dir / "bad.json", "{\n  \"name\": \"x\",\n  \"grid\": {\"period\": 1,,}\n}\n");
  try {
    load_scenario(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_scenario(dir / "missing.json"), Error);
}

TEST(Verdicts, MonotonicityDefectOracle) {
  EXPECT_EQ(detail::monotonicity_defect({1, 2, 3}), 0.0);
  EXPECT_EQ(detail::monotonicity_defect({1, 3, 2, 2.5, 0.5, 4}), -2.5);
  EXPECT_EQ(detail::monotonicity_defect({NAN, 2, NAN, 1}), -1.0);
  EXPECT_DOUBLE_EQ(detail::max_drift({2.0, 2.5, 1.0}), 0.5);
  EXPECT_DOUBLE_EQ(detail::max_drift({0.0, 1e-9}), 1e-9);
}

TEST(Verdicts, ComputedFromTablesOnly) {
  ScenarioConfig cfg = parse_scenario(small_single());
  cfg.solitons = {{{-0.4, -20.0, 1}, {0.4, 20.0, 1}}, 30.0};
  cfg.perturbation = {PerturbationKind::random_smooth, 0.01, 1, 2.0};
  cfg.checks = {{"monotonicity_A", 10.0}, {"eps_over_alpha", 10.0}, {"min_center_gap", 39.0},
                {"window_decay", 0.5}, {"rate_formula", 1e-6}};
  SeriesTables s;
  s.diagnostics.header = {"t", "E", "P", "U", "I_a1_y5", "window_b2"};
  s.diagnostics.add_row({0.0, 1, 0, 0, 1.0, 0.2});
  s.diagnostics.add_row({1.0, 1, 0, 0, 0.9, 0.05});
  s.modulation.header = {"t", "c_1", "c_2", "a_1", "a_2", "eps_xnorm", "iters"};
  s.modulation.add_row({0.0, -0.4, 0.4, -20.0, 20.0, 0.01, 1});
  s.modulation.add_row({1.0, -0.4, 0.4, -20.4, 20.4, 0.2, 2});
  s.rates.header = {"t", "path", "j", "y0", "fd", "formula"};
  s.rates.add_row({0.0, 0, 1, 5, 1.0, 1.0 + 3e-7});
  const auto vs = evaluate_verdicts(cfg, s);
  std::map<std::string, Verdict> by;
  for (const auto& v : vs) by[v.name] = v;
  const double nu = std::sqrt(1 - 0.16);
  EXPECT_NEAR(by["monotonicity_A"].measured, 0.1 * std::exp(nu * 5 / 16), 1e-12);
  EXPECT_TRUE(by["monotonicity_A"].pass);
  EXPECT_DOUBLE_EQ(by["eps_sup"].measured, 0.2);
  EXPECT_FALSE(by["eps_sup"].pass);
  EXPECT_DOUBLE_EQ(by["eps_sup"].threshold, 0.1);
  EXPECT_DOUBLE_EQ(by["min_center_gap"].measured, 40.0);
  EXPECT_DOUBLE_EQ(by["window_decay"].measured, 0.25);
  EXPECT_NEAR(by["rate_formula"].measured, 3e-7, 1e-15);
}

TEST(RunScenario, SingleSolitonPassesAndIsDeterministic) {
  const ScenarioConfig cfg = parse_scenario(small_single());
  const RunReport a = run_scenario(cfg), b = run_scenario(cfg);
  EXPECT_TRUE(a.all_pass());
  ASSERT_EQ(a.series.diagnostics.rows.size(), 5u);
  EXPECT_EQ(a.series.diagnostics.str(), b.series.diagnostics.str());
  EXPECT_EQ(a.series.modulation.str(), b.series.modulation.str());
  // Verdicts are reproducible from the emitted series.
  const auto again = evaluate_verdicts(cfg, a.series);
  ASSERT_EQ(again.size() + 1, a.verdicts.size());
  for (std::size_t i = 0; i < again.size(); ++i) EXPECT_EQ(again[i].measured, a.verdicts[i + 1].measured);
  EXPECT_EQ(a.verdicts.front().name, "run_complete");
  const json r = a.to_json();
  EXPECT_EQ(r["scenario"], "single-small");
  for (const auto& v : r["verdicts"]) {
    EXPECT_TRUE(v.contains("name") && v.contains("pass") && v.contains("measured") && v.contains("threshold"));
  }
}

TEST(RunScenario, SpinFrameMatchesHydroFrame) {
  json j = small_single();
  j["perturbation"] = {{"kind", "random_smooth"}, {"amplitude", 0.01}, {"seed", 4}};
  j["integrator"]["dt"] = 5e-4;
  j["integrator"]["t_end"] = 0.5;
  j["integrator"]["sample_stride"] = 500;
  j["checks"] = json::object();
  const RunReport h = run_scenario(parse_scenario(j));
  j["frame"] = "spin";
  j["theta0"] = 1.1;
  const RunReport s = run_scenario(parse_scenario(j));
  ASSERT_TRUE(h.all_pass() && s.all_pass());
  const auto& hs = h.trajectory.states.back();
  const auto& ss = s.trajectory.states.back();
  EXPECT_LE(sup_norm(hs - ss), 1e-8);
}

TEST(RunScenario, RuntimeFailureKeepsPartialSeries) {
  // Explicit RK4 at the edge of its stability region blows up near the soliton cores.
  json j = small_single();
  j["name"] = "unstable";
  j["solitons"] = {{"params", {{{"c", -0.4}, {"a", -20.0}}, {{"c", 0.4}, {"a", 20.0}}}}};
  j["grid"] = {{"period", 409.6}, {"n", 4096}};
  j["integrator"] = {{"dt", 0.002}, {"t_end", 1.0}, {"sample_stride", 5}};
  j["perturbation"] = {{"kind", "random_smooth"}, {"amplitude", 0.01}, {"seed", 7}};
  j["checks"] = {{"newton_iters", 5}};
  const RunReport r = run_scenario(parse_scenario(j));
  ASSERT_TRUE(r.failure.has_value());
  EXPECT_FALSE(r.all_pass());
  EXPECT_FALSE(r.verdicts.front().pass);
  EXPECT_GT(r.series.diagnostics.rows.size(), 1u);
  EXPECT_LT(r.failure_time, 1.0);
  EXPECT_NE(std::string(r.failure->what()).find("at t = "), std::string::npos);
  const fs::path dir = scratch("partial");
  write_report(r, dir);
  EXPECT_TRUE(fs::exists(dir / "unstable" / "diagnostics.csv"));
  EXPECT_FALSE(json::parse(slurp(dir / "unstable" / "report.json"))["failure"].is_null());
}

TEST(InitialState, Perturbations) {
  json j = small_single();
  j["solitons"] = {{"params", {{{"c", -0.4}, {"a", -20.0}}, {{"c", 0.4}, {"a", 20.0}}}}};
  j["grid"] = {{"period", 409.6}, {"n", 4096}};
  j["integrator"] = {{"dt", 0.001}, {"t_end", 0.001}};
  ChiCache cache;
  const Grid g = Grid::centered(409.6, 4096);
  const HydroState base = multi_soliton_sum({{{-0.4, -20.0, 1}, {0.4, 20.0, 1}}, 0.0}, g);

  j["perturbation"] = {{"kind", "between_bump"}, {"amplitude", 0.05}};
  HydroState d = initial_state(parse_scenario(j), cache) - base;
  EXPECT_NEAR(d.v[g.n / 2], 0.05, 1e-15);
  EXPECT_EQ(sup_norm(HydroState(g, Field(g.n, 0.0), d.w)), 0.0);

  j["perturbation"] = {{"kind", "chi_direction"}, {"amplitude", 0.02}};
  d = initial_state(parse_scenario(j), cache) - base;
  EXPECT_NEAR(x_norm(d), 0.02, 1e-14);
  EXPECT_EQ(cache.solves(), 2);

  j["perturbation"] = {{"kind", "random_smooth"}, {"amplitude", 0.03}, {"seed", 9}};
  d = initial_state(parse_scenario(j), cache) - base;
  EXPECT_NEAR(x_norm(d), 0.03, 1e-14);
}

TEST(VirialAudit, ShortRunPasses) {
  VirialAuditConfig cfg;
  cfg.integrator.t_end = 0.5;
  const VirialAuditResult r = virial_audit(cfg);
  EXPECT_TRUE(r.all_pass());
  EXPECT_EQ(r.series.rows.size(), 6u);
  EXPECT_GE(r.verdicts[0].measured, 0.25);
}

TEST(Cli, SolitonTableToStdout) {
  const fs::path dir = scratch("cli_table");
  ASSERT_EQ(run_cli("soliton-table --c 0.5 --xmax 2 --dx 0.5", dir / "out.csv"), 0);
  std::istringstream in(slurp(dir / "out.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,u1,u2,u3,v,w\r");
  int rows = 0;
  double x = 0, u1 = 0, u2 = 0, u3 = 0, v = 0, w = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (rows == 5) std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &x, &u1, &u2, &u3, &v, &w);
  }
  EXPECT_EQ(rows, 9);
  const double nu = std::sqrt(0.75);
  EXPECT_EQ(x, 0.0);
  EXPECT_DOUBLE_EQ(u1, 0.5);
  EXPECT_DOUBLE_EQ(u3, nu);
  EXPECT_DOUBLE_EQ(v, nu);
  EXPECT_NEAR(w, 0.5 * nu / (1 - nu * nu), 1e-15);
}

TEST(Cli, ExitCodesAndOutputs) {
  const fs::path dir = scratch("cli_sim");
  // Missing config: exit 2 and nothing written.
  EXPECT_EQ(run_cli("simulate " + (dir / "nope.json").string() + " --out " + (dir / "o1").string(), dir / "log1"), 2);
  EXPECT_FALSE(fs::exists(dir / "o1"));

  json bad = small_single();
  bad["integrator"]["tolerance"] = 1;
  io::write_text(dir / "bad.json", bad.dump());
  EXPECT_EQ(run_cli("simulate " + (dir / "bad.json").string() + " --out " + (dir / "o2").string(), dir / "log2"), 2);
  EXPECT_NE(slurp(dir / "log2").find("integrator.tolerance"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "o2"));

  EXPECT_EQ(run_cli("frobnicate", dir / "log3"), 2);

  io::write_text(dir / "ok.json", small_single().dump());
  json twin = small_single();
  twin["name"] = "single-twin";
  io::write_text(dir / "twin.json", twin.dump());
  ASSERT_EQ(run_cli("simulate " + (dir / "ok.json").string() + " " + (dir / "twin.json").string() + " --out " +
                        (dir / "o3").string() + " --save-trajectory",
                    dir / "log4"),
            0)
      << slurp(dir / "log4");
  for (const char* f : {"diagnostics.csv", "modulation.csv", "rates.csv", "report.json", "trajectory.bin"})
    EXPECT_TRUE(fs::exists(dir / "o3" / "single-small" / f)) << f;
  EXPECT_EQ(slurp(dir / "o3" / "single-small" / "diagnostics.csv"),
            slurp(dir / "o3" / "single-twin" / "diagnostics.csv"));
  const json rep = json::parse(slurp(dir / "o3" / "single-small" / "report.json"));
  EXPECT_TRUE(rep["all_pass"].get<bool>());

  json guess{{"solitons", {{"params", {{{"c", 0.6}, {"a", 0.0}}}}}}, {"checks", {{"newton_iters", 5}}}};
  io::write_text(dir / "guess.json", guess.dump());
  EXPECT_EQ(run_cli("modulate-track " + (dir / "o3" / "single-small" / "trajectory.bin").string() + " " +
                        (dir / "guess.json").string() + " --out " + (dir / "o4").string(),
                    dir / "log5"),
            0)
      << slurp(dir / "log5");
  EXPECT_EQ(slurp(dir / "o4" / "trajectory-track" / "modulation.csv"),
            slurp(dir / "o3" / "single-small" / "modulation.csv"));

  // Failing verdict: exit 1 with the report written.
  json strict = small_single();
  strict["name"] = "strict";
  strict["checks"]["translation"] = 1e-16;
  io::write_text(dir / "strict.json", strict.dump());
  EXPECT_EQ(run_cli("simulate " + (dir / "strict.json").string() + " --out " + (dir / "o5").string(), dir / "log6"),
            1);
  EXPECT_TRUE(fs::exists(dir / "o5" / "strict" / "report.json"));

  EXPECT_EQ(run_cli("virial-audit --amplitude 0.01 --seed 7 --t-end 0.2 --out " + (dir / "o6").string(),
                    dir / "log7"),
            0);
  EXPECT_TRUE(fs::exists(dir / "o6" / "virial-audit" / "seed_7.csv"));
  EXPECT_EQ(run_cli("virial-audit --t-end 0.0005 --out " + (dir / "o7").string(), dir / "log8"), 2);
}
