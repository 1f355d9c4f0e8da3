#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blowup/io.hpp"
#include "blowup/params.hpp"

namespace blowup::exp {

enum class Scenario { OdeRate, PhiSeries, AlphaDichotomy, PdeBlowup, LyapunovAudit, Classify, ProfileCheck, Sweep };

const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);
const std::vector<std::string>& scenario_names();

// field-level diagnostic: path is "classify.dy" style
struct ConfigError : std::runtime_error {
  std::string path;
  ConfigError(std::string p, const std::string& msg) : std::runtime_error(p + ": " + msg), path(std::move(p)) {}
};

struct ParamsBlock {
  int n = 1;
  double p = 2, a = 2, M = 30, mu = 1;
  std::string perturbation = "log_damped";  // zero | log_damped | power_sub
  double q = 1.5;                            // power_sub exponent
  double theta = 0;
  bool operator==(const ParamsBlock&) const = default;
};

// kinds: gaussian, constant, quadratic, hermite
struct InitialData {
  std::string kind = "gaussian";
  double amplitude = 1;
  bool kappa_units = false;  // amplitude is a multiple of kappa
  double width = 1;          // gaussian: A exp(-|y|^2 / width)
  double eps = 0.05;         // quadratic / hermite seed size
  double cutoff = 0;         // cutoff radius, 0 disables
  int mode = 4;              // hermite degree along y1
  double noise = 0;          // uniform noise amplitude, drawn from the seed
  bool operator==(const InitialData&) const = default;
};

struct OdeRateKnobs {
  double v0 = 1, v_stop = 1e8, rtol = 1e-10, rate_floor = 1e6;
  bool operator==(const OdeRateKnobs&) const = default;
};

struct PhiSeriesKnobs {
  double s_start = 20, s_end = 200;
  int K = 3;
  std::vector<double> samples{25, 50, 100, 200};
  bool operator==(const PhiSeriesKnobs&) const = default;
};

struct AlphaKnobs {
  double q = 3, s_begin = 20, s_end = 1e4;
  std::vector<double> c{-1, -0.5, 0, 0.5, 1};
  std::vector<double> alpha0{-2, -1, -0.5};  // in units of 1/s_begin
  bool small_order_seed = true;               // add the seeded small-order start per c
  bool operator==(const AlphaKnobs&) const = default;
};

struct PdeBlowupKnobs {
  double L = 6, dx = 1e-3, cfl = 0.005, dt_max = 1e-3, t_max = 10, u_stop = 1e8, resolution = 4;
  InitialData init{"gaussian", 5, false, 1};
  bool operator==(const PdeBlowupKnobs&) const = default;
};

struct WRunKnobs {
  double L = 20, dy = 0.05, ds = 1e-3, s_begin = 20, s_end = 21;
  bool mode_control = false;
  int snapshot_every = 100;
  double sup_stop = 0;  // end the run once sup w reaches this, 0 disables
  InitialData init{"gaussian", 0.5, true, 8};
  bool operator==(const WRunKnobs&) const = default;
};

struct AuditKnobs {
  WRunKnobs run;
  double tol = 1e-4;
  bool select_theta = true;
  bool operator==(const AuditKnobs&) const = default;
};

struct ClassifyKnobs {
  WRunKnobs run{10, 0.1, 0.01, 0, 50, true, 100, 0, InitialData{"quadratic", 1, true, 1, 0.05, 4}};
  int degree = 6;
  bool operator==(const ClassifyKnobs&) const = default;
};

struct ProfileKnobs {
  WRunKnobs run{10, 0.1, 0.01, 0, 50, true, 100, 0, InitialData{"quadratic", 1, true, 1, 0.05, 4}};
  double K0 = 1.4, fit_from = 5, residual_radius = 4;
  int l = 0;  // 0 means l = n
  bool operator==(const ProfileKnobs&) const = default;
};

struct Axis {
  std::string key;  // dotted path, e.g. params.p
  std::vector<std::string> values;
  bool operator==(const Axis&) const = default;
};

struct SweepKnobs {
  std::string base = "ode-rate";
  std::vector<Axis> axes;
  bool operator==(const SweepKnobs&) const = default;
};

struct ExperimentConfig {
  std::string scenario = "ode-rate";
  uint64_t seed = 0;
  int workers = 1;
  std::string out = "out";
  ParamsBlock params;
  OdeRateKnobs ode_rate;
  PhiSeriesKnobs phi_series;
  AlphaKnobs alpha_dichotomy;
  PdeBlowupKnobs pde_blowup;
  AuditKnobs lyapunov_audit;
  ClassifyKnobs classify;
  ProfileKnobs profile_check;
  SweepKnobs sweep;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);  // throws ConfigError
ProblemParams make_params(const ExperimentConfig& c);

using Metrics = std::vector<std::pair<std::string, CsvCell>>;

struct RunOutcome {
  int status = 0;  // 0 ok, 1 runtime failure, 2 invalid config
  std::string error;
  Metrics metrics;
};

// runs one scenario into dir, writes summary.json, FAILED on error, and manifest.json
RunOutcome run(const ExperimentConfig& c, const std::filesystem::path& dir);

// the Cartesian product of the axes as concrete configs, validated
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& c);

std::string sha256_file(const std::filesystem::path& p);

}  // namespace blowup::exp
