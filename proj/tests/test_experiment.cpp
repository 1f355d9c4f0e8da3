#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "experiment.hpp"

using namespace blowup;
using namespace blowup::exp;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  auto d = fs::temp_directory_path() / ("blowup_exp_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV body without the header row
std::string body(const fs::path& p) {
  auto s = slurp(p);
  return s.substr(s.find('\n') + 1);
}

ExperimentConfig stationary_audit() {
  auto c = parse_config(R"(
scenario: lyapunov-audit
params: {perturbation: zero}
lyapunov_audit:
  run: {L: 8, dy: 0.1, ds: 0.001, s_begin: 1, s_end: 1.2, init: {kind: constant, amplitude: 1, kappa_units: true}}
)");
  return c;
}

}  // namespace

TEST(Config, RoundTripIsBitExact) {
  ExperimentConfig c;
  c.params.p = 1.0 / 3 + 2;
  c.params.theta = 0.1;
  c.phi_series.samples = {25.000000000000004, 1e-310 + 30};
  c.seed = 18446744073709551615ull;
  c.sweep.axes = {{"params.p", {"1.5", "2"}}};
  c.pde_blowup.init.noise = 5e-324;
  auto text = dump_config(c);
  auto back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(parse_config(""), ExperimentConfig{});
}

TEST(Config, FieldLevelDiagnostics) {
  auto path_of = [](const std::string& yaml) {
    try {
      validate(parse_config(yaml));
    } catch (const ConfigError& e) {
      return e.path;
    }
    return std::string("<accepted>");
  };
  EXPECT_EQ(path_of("ode_rate: {v00: 1}"), "ode_rate.v00");
  EXPECT_EQ(path_of("ode_rate: {v0: abc}"), "ode_rate.v0");
  EXPECT_EQ(path_of("workers: 1.5"), "workers");
  EXPECT_EQ(path_of("seed: -1"), "seed");
  EXPECT_EQ(path_of("scenario: nope"), "scenario");
  EXPECT_EQ(path_of("params: {p: 0.5}"), "params");
  EXPECT_EQ(path_of("params: {perturbation: cubic}"), "params.perturbation");
  EXPECT_EQ(path_of("scenario: classify\nclassify: {run: {dy: 0.3}}"), "classify.run.dy");
  EXPECT_EQ(path_of("scenario: classify\nclassify: {run: {init: {kind: box}}}"), "classify.run.init.kind");
  EXPECT_EQ(path_of("phi_series: {samples: [1]}\nscenario: phi-series"), "phi_series.samples[0]");
  EXPECT_EQ(path_of("scenario: sweep\nsweep: {axes: [{key: params.nope, values: ['1']}]}"), "sweep.axes[0].key");
  EXPECT_EQ(path_of("scenario: sweep\nsweep: {axes: [{key: params.p, values: ['2', '0.5']}]}"), "sweep.cell[1].params");
  EXPECT_EQ(path_of("scenario: sweep\nsweep: {base: sweep}"), "sweep.base");
  EXPECT_EQ(path_of("[1, 2]"), "config");
  EXPECT_EQ(path_of("ode_rate: {v0: 2}"), "<accepted>");
  auto r = run(parse_config("ode_rate: {rtol: 1}"), fresh("bad"));
  EXPECT_EQ(r.status, 2);
  EXPECT_FALSE(fs::exists(fresh("bad")));
}

TEST(Run, OdeRateUnperturbed) {
  auto c = parse_config("params: {p: 2, perturbation: zero}");
  auto d = fresh("ode");
  auto r = run(c, d);
  ASSERT_EQ(r.status, 0) << r.error;
  auto rows = read_csv((d / "rate.csv").string());
  ASSERT_GT(rows.size(), 10u);
  EXPECT_EQ(rows[0].back(), "rate_constant");
  EXPECT_NEAR(parse_double(rows.back().back()), 1.0, 0.02);
  EXPECT_TRUE(fs::exists(d / "summary.json"));
  EXPECT_FALSE(fs::exists(d / "FAILED"));
}

TEST(Run, StationaryAuditHasZeroViolation) {
  auto d = fresh("audit");
  auto r = run(stationary_audit(), d);
  ASSERT_EQ(r.status, 0) << r.error;
  auto rows = read_csv((d / "audit.csv").string());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "max_violation");
  EXPECT_EQ(parse_double(rows[1][0]), 0.0);
}

TEST(Run, DeterministicBodiesAndSeededNoise) {
  auto c = stationary_audit();
  c.lyapunov_audit.run.init.noise = 1e-3;
  c.seed = 7;
  auto a = fresh("det_a"), b = fresh("det_b"), e = fresh("det_c");
  ASSERT_EQ(run(c, a).status, 0);
  ASSERT_EQ(run(c, b).status, 0);
  EXPECT_EQ(slurp(a / "functionals.csv"), slurp(b / "functionals.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  c.seed = 8;
  ASSERT_EQ(run(c, e).status, 0);
  EXPECT_NE(body(a / "functionals.csv"), body(e / "functionals.csv"));
}

TEST(Run, ManifestListsEveryFileWithItsHash) {
  auto d = fresh("manifest");
  ASSERT_EQ(run(stationary_audit(), d).status, 0);
  auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["status"], "ok");
  size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") ++files;
  ASSERT_EQ(m["files"].size(), files);
  for (const auto& f : m["files"]) {
    auto p = d / f["path"].get<std::string>();
    ASSERT_TRUE(fs::exists(p));
    EXPECT_EQ(f["sha256"], sha256_file(p));
    EXPECT_EQ(f["bytes"], fs::file_size(p));
  }
}

TEST(Run, Sha256KnownVector) {
  auto d = fresh("sha");
  fs::create_directories(d);
  std::ofstream(d / "abc") << "abc";
  EXPECT_EQ(sha256_file(d / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, RuntimeFailureLeavesMarker) {
  // K0 too large for the grid fails inside the profile module
  auto c = parse_config(R"(
scenario: profile-check
params: {perturbation: zero}
profile_check: {K0: 100, run: {L: 8, dy: 0.1, ds: 0.01, s_begin: 0, s_end: 2}}
)");
  auto d = fresh("fail");
  auto r = run(c, d);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.error.find("maximal usable s"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "FAILED"));
  EXPECT_TRUE(fs::exists(d / "config.yaml"));
  auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["status"], "failed");
}

TEST(Sweep, OdeRateGridWithinThreePercent) {
  auto c = parse_config(R"(
scenario: sweep
workers: 3
sweep:
  base: ode-rate
  axes:
    - {key: params.p, values: ["1.5", "2", "3"]}
    - {key: params.perturbation, values: [zero, log_damped]}
)");
  auto d = fresh("sweep");
  auto r = run(c, d);
  ASSERT_EQ(r.status, 0) << r.error;
  auto rows = read_csv((d / "summary.csv").string());
  ASSERT_EQ(rows.size(), 7u);
  auto col = [&](const std::string& name) {
    return size_t(std::find(rows[0].begin(), rows[0].end(), name) - rows[0].begin());
  };
  for (size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][col("status")], "ok");
    double kappa = parse_double(rows[i][col("kappa")]);
    EXPECT_NEAR(parse_double(rows[i][col("rate_constant")]) / kappa, 1.0, 0.03);
  }
  EXPECT_EQ(rows[1][col("params.p")], "1.5");
  EXPECT_EQ(rows[2][col("params.p")], "2");
  EXPECT_EQ(rows[4][col("params.perturbation")], "log_damped");
}

TEST(Sweep, EmptyAxesIsTheBaseRun) {
  auto a = fresh("empty_sweep"), b = fresh("plain");
  auto c = parse_config("scenario: sweep\nsweep: {base: ode-rate}");
  ASSERT_EQ(run(c, a).status, 0);
  ASSERT_EQ(run(parse_config("scenario: ode-rate"), b).status, 0);
  EXPECT_EQ(slurp(a / "rate.csv"), slurp(b / "rate.csv"));
  EXPECT_EQ(slurp(a / "config.yaml"), slurp(b / "config.yaml"));
}

TEST(Sweep, PhiPlateauPerCellAndIsolatedFailures) {
  auto c = parse_config(R"(
scenario: sweep
sweep:
  base: phi-series
  axes: [{key: params.a, values: ["1.5", "2", "3"]}]
)");
  auto d = fresh("phi_sweep");
  ASSERT_EQ(run(c, d).status, 0);
  auto rows = read_csv((d / "summary.csv").string());
  ASSERT_EQ(rows.size(), 4u);
  for (size_t i = 1; i < 4; ++i) EXPECT_LT(parse_double(rows[i].back()), 1e-3);

  auto f = parse_config(R"(
scenario: sweep
workers: 2
sweep:
  base: profile-check
  axes: [{key: profile_check.K0, values: ["1", "100"]}]
profile_check: {run: {L: 8, dy: 0.1, ds: 0.01, s_begin: 0, s_end: 2}}
params: {perturbation: zero}
)");
  auto e = fresh("iso_sweep");
  auto r = run(f, e);
  EXPECT_EQ(r.status, 0);
  auto sr = read_csv((e / "summary.csv").string());
  ASSERT_EQ(sr.size(), 3u);
  EXPECT_EQ(sr[1][2], "ok");
  EXPECT_EQ(sr[2][2], "failed");
  EXPECT_TRUE(fs::exists(e / "cells" / "cell_001" / "FAILED"));
  EXPECT_FALSE(fs::exists(e / "cells" / "cell_000" / "FAILED"));
}

TEST(Pipeline, ClassifyCaseIiSeed) {
  auto c = parse_config(R"(
scenario: classify
params: {n: 2, p: 2, M: 1, mu: 0, perturbation: zero}
classify:
  run: {L: 10, dy: 0.1, ds: 0.01, s_begin: 0, s_end: 50, mode_control: true, snapshot_every: 100,
        init: {kind: quadratic, eps: 0.05, cutoff: 4}}
)");
  auto d = fresh("classify");
  auto r = run(c, d);
  ASSERT_EQ(r.status, 0) << r.error;
  auto rep = nlohmann::json::parse(slurp(d / "report.json"));
  EXPECT_EQ(rep["case"], "II_quadratic");
  EXPECT_EQ(rep["l"], 2);
}
