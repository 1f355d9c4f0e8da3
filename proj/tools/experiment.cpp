#include "experiment.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "blowup/classify.hpp"
#include "blowup/energy.hpp"
#include "blowup/ode.hpp"
#include "blowup/pde.hpp"
#include "blowup/profiles.hpp"

namespace blowup::exp {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::vector<std::pair<Scenario, std::string>>& scenario_table() {
  static const std::vector<std::pair<Scenario, std::string>> t{
      {Scenario::OdeRate, "ode-rate"},           {Scenario::PhiSeries, "phi-series"},
      {Scenario::AlphaDichotomy, "alpha-dichotomy"}, {Scenario::PdeBlowup, "pde-blowup"},
      {Scenario::LyapunovAudit, "lyapunov-audit"}, {Scenario::Classify, "classify"},
      {Scenario::ProfileCheck, "profile-check"},   {Scenario::Sweep, "sweep"}};
  return t;
}

}  // namespace

const char* to_string(Scenario s) {
  for (const auto& [k, v] : scenario_table())
    if (k == s) return v.c_str();
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  for (const auto& [k, v] : scenario_table())
    if (v == s) return k;
  throw ConfigError("scenario", "unknown scenario '" + s + "'");
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : scenario_table()) v.push_back(e.second);
    return v;
  }();
  return names;
}

// ---------------------------------------------------------------- config fields

template <class V> void fields(V& v, ParamsBlock& b) {
  v("n", b.n); v("p", b.p); v("a", b.a); v("M", b.M); v("mu", b.mu);
  v("perturbation", b.perturbation); v("q", b.q); v("theta", b.theta);
}
template <class V> void fields(V& v, InitialData& d) {
  v("kind", d.kind); v("amplitude", d.amplitude); v("kappa_units", d.kappa_units); v("width", d.width);
  v("eps", d.eps); v("cutoff", d.cutoff); v("mode", d.mode); v("noise", d.noise);
}
template <class V> void fields(V& v, OdeRateKnobs& k) {
  v("v0", k.v0); v("v_stop", k.v_stop); v("rtol", k.rtol); v("rate_floor", k.rate_floor);
}
template <class V> void fields(V& v, PhiSeriesKnobs& k) {
  v("s_start", k.s_start); v("s_end", k.s_end); v("K", k.K); v("samples", k.samples);
}
template <class V> void fields(V& v, AlphaKnobs& k) {
  v("q", k.q); v("s_begin", k.s_begin); v("s_end", k.s_end); v("c", k.c); v("alpha0", k.alpha0);
  v("small_order_seed", k.small_order_seed);
}
template <class V> void fields(V& v, PdeBlowupKnobs& k) {
  v("L", k.L); v("dx", k.dx); v("cfl", k.cfl); v("dt_max", k.dt_max); v("t_max", k.t_max);
  v("u_stop", k.u_stop); v("resolution", k.resolution); v("init", k.init);
}
template <class V> void fields(V& v, WRunKnobs& k) {
  v("L", k.L); v("dy", k.dy); v("ds", k.ds); v("s_begin", k.s_begin); v("s_end", k.s_end);
  v("mode_control", k.mode_control); v("snapshot_every", k.snapshot_every); v("sup_stop", k.sup_stop);
  v("init", k.init);
}
template <class V> void fields(V& v, AuditKnobs& k) { v("run", k.run); v("tol", k.tol); v("select_theta", k.select_theta); }
template <class V> void fields(V& v, ClassifyKnobs& k) { v("run", k.run); v("degree", k.degree); }
template <class V> void fields(V& v, ProfileKnobs& k) {
  v("run", k.run); v("K0", k.K0); v("fit_from", k.fit_from); v("residual_radius", k.residual_radius); v("l", k.l);
}
template <class V> void fields(V& v, Axis& a) { v("key", a.key); v("values", a.values); }
template <class V> void fields(V& v, SweepKnobs& k) { v("base", k.base); v("axes", k.axes); }
template <class V> void fields(V& v, ExperimentConfig& c) {
  v("scenario", c.scenario); v("seed", c.seed); v("workers", c.workers); v("out", c.out);
  v("params", c.params); v("ode_rate", c.ode_rate); v("phi_series", c.phi_series);
  v("alpha_dichotomy", c.alpha_dichotomy); v("pde_blowup", c.pde_blowup); v("lyapunov_audit", c.lyapunov_audit);
  v("classify", c.classify); v("profile_check", c.profile_check); v("sweep", c.sweep);
}

namespace {

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

struct Reader {
  const YAML::Node node;
  std::string path;
  std::set<std::string> known;

  template <class T>
  void operator()(const char* key, T& x) {
    known.insert(key);
    const YAML::Node c = node[key];
    if (c) read(c, x, join(path, key));
  }

  void finish() const {
    for (auto it = node.begin(); it != node.end(); ++it) {
      auto k = it->first.as<std::string>();
      if (!known.count(k)) throw ConfigError(join(path, k), "unknown field");
    }
  }

  static std::string scalar(const YAML::Node& n, const std::string& p) {
    if (!n.IsScalar()) throw ConfigError(p, "expected a scalar");
    return n.Scalar();
  }
  static void read(const YAML::Node& n, double& x, const std::string& p) {
    try {
      x = parse_double(scalar(n, p));
    } catch (const IoError&) {
      throw ConfigError(p, "expected a number, got '" + n.Scalar() + "'");
    }
  }
  static void read(const YAML::Node& n, int& x, const std::string& p) {
    auto s = scalar(n, p);
    size_t used = 0;
    try {
      x = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError(p, "expected an integer, got '" + s + "'");
  }
  static void read(const YAML::Node& n, uint64_t& x, const std::string& p) {
    auto s = scalar(n, p);
    size_t used = 0;
    try {
      if (!s.empty() && s[0] != '-') x = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError(p, "expected an unsigned 64-bit integer, got '" + s + "'");
  }
  static void read(const YAML::Node& n, bool& x, const std::string& p) {
    auto s = scalar(n, p);
    if (s == "true") x = true;
    else if (s == "false") x = false;
    else throw ConfigError(p, "expected true or false, got '" + s + "'");
  }
  static void read(const YAML::Node& n, std::string& x, const std::string& p) { x = scalar(n, p); }
  template <class T>
  static void read(const YAML::Node& n, std::vector<T>& x, const std::string& p) {
    if (!n.IsSequence()) throw ConfigError(p, "expected a list");
    x.clear();
    for (size_t i = 0; i < n.size(); ++i) {
      T v{};
      read(n[i], v, p + "[" + std::to_string(i) + "]");
      x.push_back(std::move(v));
    }
  }
  template <class T>
    requires requires(Reader& r, T& t) { fields(r, t); }
  static void read(const YAML::Node& n, T& x, const std::string& p) {
    if (!n.IsMap()) throw ConfigError(p, "expected a mapping");
    Reader r{n, p, {}};
    fields(r, x);
    r.finish();
  }
};

struct Writer {
  YAML::Node node{YAML::NodeType::Map};

  template <class T>
  void operator()(const char* key, const T& x) { node[key] = write(x); }

  static YAML::Node write(double x) { return YAML::Node(fmt_double(x)); }
  static YAML::Node write(int x) { return YAML::Node(std::to_string(x)); }
  static YAML::Node write(uint64_t x) { return YAML::Node(std::to_string(x)); }
  static YAML::Node write(bool x) { return YAML::Node(x ? "true" : "false"); }
  static YAML::Node write(const std::string& x) { return YAML::Node(x); }
  template <class T>
  static YAML::Node write(const std::vector<T>& v) {
    YAML::Node n(YAML::NodeType::Sequence);
    for (const auto& x : v) n.push_back(write(x));
    return n;
  }
  template <class T>
    requires requires(Writer& w, T& t) { fields(w, t); }
  static YAML::Node write(const T& x) {
    Writer w;
    fields(w, const_cast<T&>(x));
    return w.node;
  }
};

YAML::Node to_node(const ExperimentConfig& c) { return Writer::write(c); }

ExperimentConfig from_node(const YAML::Node& n) {
  ExperimentConfig c;
  if (!n || n.IsNull()) return c;
  Reader::read(n, c, "");
  return c;
}

std::string emit(const YAML::Node& n) {
  YAML::Emitter e;
  e << n;
  return std::string(e.c_str()) + "\n";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node n;
  try {
    n = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config", std::string("YAML syntax error: ") + e.what());
  }
  if (n && !n.IsNull() && !n.IsMap()) throw ConfigError("config", "top level must be a mapping");
  return from_node(n);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) { return emit(to_node(c)); }

// ---------------------------------------------------------------- validation

namespace {

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) throw ConfigError(path, msg);
}

void validate_init(const InitialData& d, const std::string& p) {
  static const std::set<std::string> kinds{"gaussian", "constant", "quadratic", "hermite"};
  require(kinds.count(d.kind), p + ".kind", "must be one of gaussian, constant, quadratic, hermite");
  require(std::isfinite(d.amplitude), p + ".amplitude", "must be finite");
  require(d.width > 0, p + ".width", "must be positive");
  require(std::isfinite(d.eps), p + ".eps", "must be finite");
  require(d.cutoff >= 0, p + ".cutoff", "must be nonnegative");
  require(d.mode >= 3 && d.mode <= 10, p + ".mode", "must lie in [3, 10]");
  require(d.noise >= 0, p + ".noise", "must be nonnegative");
}

void validate_wrun(const WRunKnobs& k, const std::string& p, int n) {
  require(k.L > 0, p + ".L", "must be positive");
  require(k.dy > 0, p + ".dy", "must be positive");
  try {
    Grid::make(n, k.L, k.dy);
  } catch (const InvalidArgument& e) {
    throw ConfigError(p + ".dy", e.what());
  }
  require(k.ds > 0, p + ".ds", "must be positive");
  require(k.s_begin >= 0, p + ".s_begin", "must be nonnegative");
  require(k.s_end > k.s_begin, p + ".s_end", "must exceed s_begin");
  require(k.snapshot_every >= 0, p + ".snapshot_every", "must be nonnegative");
  require(k.sup_stop >= 0, p + ".sup_stop", "must be nonnegative");
  validate_init(k.init, p + ".init");
}

}  // namespace

ProblemParams make_params(const ExperimentConfig& c) {
  const auto& b = c.params;
  Perturbation pert;
  if (b.perturbation == "zero") pert = Perturbation::zero();
  else if (b.perturbation == "log_damped") pert = Perturbation::log_damped();
  else if (b.perturbation == "power_sub") pert = Perturbation::power_sub(b.q);
  else throw ConfigError("params.perturbation", "must be zero, log_damped or power_sub");
  try {
    return derive_constants(b.n, b.p, b.a, b.M, b.mu, pert, {}, b.theta);
  } catch (const InvalidArgument& e) {
    throw ConfigError("params", e.what());
  }
}

void validate(const ExperimentConfig& c) {
  auto sc = scenario_from_string(c.scenario);
  require(c.workers >= 1, "workers", "must be at least 1");
  require(!c.out.empty(), "out", "must not be empty");
  require(c.params.n == 1 || c.params.n == 2, "params.n", "must be 1 or 2");
  make_params(c);
  const int n = c.params.n;
  switch (sc) {
    case Scenario::OdeRate: {
      const auto& k = c.ode_rate;
      require(k.v0 > 0, "ode_rate.v0", "must be positive");
      require(k.v_stop > k.v0, "ode_rate.v_stop", "must exceed v0");
      require(k.rtol > 0 && k.rtol < 1e-3, "ode_rate.rtol", "must lie in (0, 1e-3)");
      require(k.rate_floor > 0 && k.rate_floor < k.v_stop, "ode_rate.rate_floor", "must lie in (0, v_stop)");
      break;
    }
    case Scenario::PhiSeries: {
      const auto& k = c.phi_series;
      require(k.s_start >= 1, "phi_series.s_start", "must be at least 1");
      require(k.s_end > k.s_start, "phi_series.s_end", "must exceed s_start");
      require(k.K >= 0 && k.K <= 8, "phi_series.K", "must lie in [0, 8]");
      require(!k.samples.empty(), "phi_series.samples", "must not be empty");
      for (size_t i = 0; i < k.samples.size(); ++i)
        require(k.samples[i] >= k.s_start && k.samples[i] <= k.s_end, "phi_series.samples[" + std::to_string(i) + "]",
                "must lie in [s_start, s_end]");
      break;
    }
    case Scenario::AlphaDichotomy: {
      const auto& k = c.alpha_dichotomy;
      require(k.q > 2 && k.q <= 3, "alpha_dichotomy.q", "must lie in (2, 3]");
      require(k.s_begin > 0, "alpha_dichotomy.s_begin", "must be positive");
      require(k.s_end > k.s_begin, "alpha_dichotomy.s_end", "must exceed s_begin");
      require(!k.c.empty(), "alpha_dichotomy.c", "must not be empty");
      require(!k.alpha0.empty() || k.small_order_seed, "alpha_dichotomy.alpha0", "no starting values");
      break;
    }
    case Scenario::PdeBlowup: {
      const auto& k = c.pde_blowup;
      require(k.L > 0, "pde_blowup.L", "must be positive");
      try {
        Grid::make(n, k.L, k.dx);
      } catch (const InvalidArgument& e) {
        throw ConfigError("pde_blowup.dx", e.what());
      }
      require(k.cfl > 0, "pde_blowup.cfl", "must be positive");
      require(k.dt_max > 0, "pde_blowup.dt_max", "must be positive");
      require(k.t_max > 0, "pde_blowup.t_max", "must be positive");
      require(k.u_stop > 1, "pde_blowup.u_stop", "must exceed 1");
      require(k.resolution >= 0, "pde_blowup.resolution", "must be nonnegative");
      validate_init(k.init, "pde_blowup.init");
      require(k.init.kind == "gaussian" || k.init.kind == "constant", "pde_blowup.init.kind",
              "physical runs take gaussian or constant data");
      break;
    }
    case Scenario::LyapunovAudit:
      validate_wrun(c.lyapunov_audit.run, "lyapunov_audit.run", n);
      require(c.lyapunov_audit.tol >= 0, "lyapunov_audit.tol", "must be nonnegative");
      require(c.lyapunov_audit.run.s_begin > 0, "lyapunov_audit.run.s_begin", "the functional needs s > 0");
      break;
    case Scenario::Classify:
      validate_wrun(c.classify.run, "classify.run", n);
      require(c.params.perturbation == "zero" || c.classify.run.s_begin >= make_params(c).s0, "classify.run.s_begin",
              "perturbed runs start at or after the onset time s0");
      require(c.classify.degree >= 2 && c.classify.degree <= 12, "classify.degree", "must lie in [2, 12]");
      break;
    case Scenario::ProfileCheck:
      validate_wrun(c.profile_check.run, "profile_check.run", n);
      require(c.profile_check.K0 > 0, "profile_check.K0", "must be positive");
      require(c.profile_check.l >= 0 && c.profile_check.l <= n, "profile_check.l", "must lie in [0, n]");
      require(c.profile_check.residual_radius > 0, "profile_check.residual_radius", "must be positive");
      break;
    case Scenario::Sweep: {
      auto base = scenario_from_string(c.sweep.base);
      require(base != Scenario::Sweep, "sweep.base", "sweeps do not nest");
      expand_sweep(c);
      break;
    }
  }
}

// ---------------------------------------------------------------- sweep expansion

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& c) {
  const auto& axes = c.sweep.axes;
  ExperimentConfig base = c;
  base.scenario = c.sweep.base;
  base.sweep = {};
  base.sweep.base = c.sweep.base;
  std::vector<ExperimentConfig> cells;
  std::vector<size_t> idx(axes.size(), 0);
  for (size_t a = 0; a < axes.size(); ++a) {
    std::string p = "sweep.axes[" + std::to_string(a) + "]";
    require(!axes[a].values.empty(), p + ".values", "must not be empty");
    require(axes[a].key.rfind("sweep", 0) != 0 && axes[a].key != "scenario", p + ".key", "cannot sweep this key");
  }
  while (true) {
    YAML::Node n = to_node(base);
    for (size_t a = 0; a < axes.size(); ++a) {
      std::string p = "sweep.axes[" + std::to_string(a) + "]";
      std::vector<std::string> parts;
      std::stringstream ks(axes[a].key);
      for (std::string t; std::getline(ks, t, '.');) parts.push_back(t);
      require(!parts.empty(), p + ".key", "must not be empty");
      YAML::Node cur = n;
      for (size_t i = 0; i + 1 < parts.size(); ++i) {
        require(cur.IsMap() && cur[parts[i]], p + ".key", "no field '" + axes[a].key + "'");
        cur.reset(cur[parts[i]]);
      }
      require(cur.IsMap() && cur[parts.back()], p + ".key", "no field '" + axes[a].key + "'");
      const auto& val = axes[a].values[idx[a]];
      cur[parts.back()] = (!val.empty() && val[0] == '[') ? YAML::Load(val) : YAML::Node(val);
    }
    ExperimentConfig cell;
    try {
      cell = from_node(n);
      validate(cell);
    } catch (const ConfigError& e) {
      throw ConfigError("sweep.cell[" + std::to_string(cells.size()) + "]." + e.path, e.what());
    }
    cells.push_back(std::move(cell));
    size_t a = 0;
    while (a < axes.size() && ++idx[a] == axes[a].values.size()) idx[a++] = 0;
    if (a == axes.size()) break;
  }
  return cells;
}

// ---------------------------------------------------------------- hashing and manifest

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot hash " + p.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), std::streamsize(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), size_t(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

namespace {

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& scenario, int status) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path() != dir / "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json m;
  m["created"] = utc_now();
  m["scenario"] = scenario;
  m["status"] = status == 0 ? "ok" : "failed";
  m["files"] = json::array();
  for (const auto& f : files)
    m["files"].push_back({{"path", fs::relative(f, dir).generic_string()},
                          {"sha256", sha256_file(f)},
                          {"bytes", fs::file_size(f)}});
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
}

json to_json(const CsvCell& c) {
  if (auto d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(fmt_double(*d));
  if (auto l = std::get_if<long>(&c)) return *l;
  return std::get<std::string>(c);
}

json to_json(const Metrics& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = to_json(v);
  return j;
}

std::string mi_string(const MultiIndex& a) {
  std::string s = "(";
  for (int i = 0; i < a.dim(); ++i) s += (i ? "," : "") + std::to_string(a[i]);
  return s + ")";
}

// ---------------------------------------------------------------- initial data

std::vector<std::vector<int>> low_indices(int n, int max_total) {
  std::vector<std::vector<int>> out;
  if (n == 1)
    for (int a = 0; a <= max_total; ++a) out.push_back({a});
  else
    for (int t = 0; t <= max_total; ++t)
      for (int a = t; a >= 0; --a) out.push_back({a, t - a});
  return out;
}

Field initial_field(const InitialData& d, const Grid& g, const ProblemParams& P, Frame frame, double time, uint64_t seed) {
  double A = d.amplitude * (d.kappa_units ? P.kappa : 1.0);
  auto cut = [&](double r) { return d.cutoff > 0 ? cutoff_psi(r, d.cutoff) : 1.0; };
  auto r2 = [](const std::vector<double>& y) {
    double s = 0;
    for (double v : y) s += v * v;
    return s;
  };
  Field F;
  if (d.kind == "gaussian") {
    F = Field::sample(g, frame, time, [&](const auto& y) { return A * std::exp(-r2(y) / d.width); });
  } else if (d.kind == "constant") {
    F = Field::constant(g, frame, time, A);
  } else if (d.kind == "quadratic") {
    F = Field::sample(g, frame, time, [&](const auto& y) {
      double q = r2(y);
      return P.kappa - d.eps * (q - 2 * g.dim) * cut(std::sqrt(q));
    });
  } else {
    // H_(mode,0) seed with its |alpha| <= 2 content removed on the grid
    std::vector<int> top(g.dim, 0);
    top[0] = d.mode;
    MultiIndex al(top);
    std::vector<double> seedv(g.size());
    for (size_t k = 0; k < g.size(); ++k) {
      auto y = g.point(k);
      seedv[k] = eval_H(al, y) * cut(std::sqrt(r2(y)));
    }
    std::vector<std::vector<double>> basis;
    for (const auto& ix : low_indices(g.dim, 2)) {
      std::vector<double> b(g.size());
      MultiIndex bi(ix);
      for (size_t k = 0; k < g.size(); ++k) b[k] = eval_H(bi, g.point(k));
      for (const auto& e : basis) {
        double c = grid_inner(g, b, e);
        for (size_t k = 0; k < b.size(); ++k) b[k] -= c * e[k];
      }
      double nb = std::sqrt(grid_inner(g, b, b));
      for (double& v : b) v /= nb;
      basis.push_back(std::move(b));
    }
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& e : basis) {
        double c = grid_inner(g, seedv, e);
        for (size_t k = 0; k < seedv.size(); ++k) seedv[k] -= c * e[k];
      }
    F = Field::constant(g, frame, time, P.kappa);
    for (size_t k = 0; k < g.size(); ++k) F.values[k] -= d.eps * seedv[k];
  }
  if (d.noise > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (double& v : F.values) v += d.noise * U(rng);
  }
  return F;
}

struct WRun {
  SolveTrace trace;
  std::string stop = "s_end";
};

WRun run_similarity(const WRunKnobs& k, const ProblemParams& P, uint64_t seed,
                    const std::function<void(const Field&)>& observer = {}) {
  auto g = Grid::make(P.n, k.L, k.dy);
  Field w = initial_field(k.init, g, P, Frame::Similarity, k.s_begin, seed);
  WStepOptions so;
  so.control_unstable_modes = k.mode_control;
  if (k.mode_control && !P.unperturbed()) {
    auto phi = std::make_shared<OdeSolution>(solve_phi(P, std::max(k.s_begin, P.s0), k.s_end + 1));
    so.phi = [phi, &P](double s) { return s < phi->front_time() ? P.kappa : phi->at(s); };
  }
  WStepper st(g, P, k.ds, so);
  WRun R;
  auto record = [&](const Field& F) {
    R.trace.snapshots.push_back(F);
    R.trace.times.push_back(F.time);
    R.trace.sup_norms.push_back(F.sup_norm());
  };
  record(w);
  if (observer) observer(w);
  long steps = std::lround((k.s_end - k.s_begin) / k.ds);
  for (long i = 1; i <= steps; ++i) {
    try {
      st.step(w);
    } catch (const BlowupReached&) {
      R.stop = "blowup";
      break;
    }
    if (k.sup_stop > 0 && w.sup_norm() >= k.sup_stop) {
      R.stop = "sup_stop";
      break;
    }
    if (observer) observer(w);
    if ((k.snapshot_every > 0 && i % k.snapshot_every == 0) || i == steps) record(w);
  }
  if (R.stop != "s_end" && R.trace.snapshots.back().time != w.time && w.finite() && w.sup_norm() < k.sup_stop) record(w);
  R.trace.stop_reason = R.stop;
  return R;
}

// ---------------------------------------------------------------- scenarios

Metrics run_ode_rate(const ExperimentConfig& c, const fs::path& dir) {
  auto P = make_params(c);
  const auto& k = c.ode_rate;
  BlowupOdeOptions o;
  o.v_stop = k.v_stop;
  o.rtol = k.rtol;
  auto S = solve_blowup_ode(P, k.v0, 0.0, o);
  if (!S.blowup_time) throw std::runtime_error("ODE did not blow up within the horizon");
  auto r = rate_constants(S, P.p);
  CsvWriter w((dir / "rate.csv").string(), {"t", "v", "remaining", "rate_constant"});
  double worst = 0;
  for (size_t i = 0; i < S.times.size(); ++i) {
    w.row({S.times[i], S.values[i], S.remaining[i], r[i]});
    if (S.values[i] >= k.rate_floor) worst = std::max(worst, std::fabs(r[i] / P.kappa - 1));
  }
  return {{"kappa", P.kappa},
          {"blowup_time", *S.blowup_time},
          {"rate_constant", r.back()},
          {"rel_error", std::fabs(r.back() / P.kappa - 1)},
          {"max_rel_error_above_floor", worst},
          {"points", long(S.times.size())}};
}

Metrics run_phi_series(const ExperimentConfig& c, const fs::path& dir) {
  auto P = make_params(c);
  const auto& k = c.phi_series;
  PhiOptions po;
  po.K = k.K;
  auto phi = solve_phi(P, k.s_start, k.s_end, po);
  CsvWriter w((dir / "phi.csv").string(), {"s", "phi", "series", "plateau_ode", "plateau_series", "rel_diff"});
  double last_rel = 0, last_plateau = 0;
  for (double s : k.samples) {
    double f = phi.at(s), ser = eval_phi_series(P, s, k.K), sa = std::pow(s, P.a);
    double po_ = sa * (f - P.kappa), ps = sa * (ser - P.kappa);
    double rel = ps == 0 ? std::fabs(po_) : std::fabs(po_ / ps - 1);
    w.row({s, f, ser, po_, ps, rel});
    last_rel = rel;
    last_plateau = po_;
  }
  return {{"kappa", P.kappa}, {"plateau", last_plateau}, {"rel_diff", last_rel}};
}

Metrics run_alpha(const ExperimentConfig& c, const fs::path& dir) {
  const auto& k = c.alpha_dichotomy;
  CsvWriter w((dir / "alpha.csv").string(),
              {"c", "alpha0", "start", "branch", "s_alpha_end", "fit_residual", "growth_ratio", "blowup_s"});
  long runs = 0, global = 0, classified = 0, blowups = 0;
  double worst = 0;
  for (double cc : k.c) {
    std::vector<std::pair<std::string, double>> starts;
    for (double a : k.alpha0) starts.push_back({"scaled", a / k.s_begin});
    if (k.small_order_seed) starts.push_back({"small_order_seed", small_order_seed(k.q, cc, k.s_begin, k.s_end)});
    for (const auto& [label, a0] : starts) {
      ++runs;
      try {
        auto R = alpha_dichotomy(k.q, cc, a0, k.s_begin, k.s_end);
        ++global;
        bool ok = R.branch != AlphaBranch::Inconclusive;
        classified += ok;
        if (ok) worst = std::max(worst, R.fit_residual);
        w.row({cc, a0, label, std::string(to_string(R.branch)), R.s_alpha_end, R.fit_residual, R.growth_ratio, NAN});
      } catch (const BlowupBranch& e) {
        ++blowups;
        w.row({cc, a0, label, std::string("blowup"), NAN, NAN, NAN, e.s_blowup});
      }
    }
  }
  return {{"runs", runs}, {"global", global}, {"classified", classified}, {"blowups", blowups},
          {"max_fit_residual", worst}};
}

Metrics run_pde_blowup(const ExperimentConfig& c, const fs::path& dir) {
  auto P = make_params(c);
  const auto& k = c.pde_blowup;
  auto g = Grid::make(P.n, k.L, k.dx);
  auto u = initial_field(k.init, g, P, Frame::Physical, 0.0, c.seed);
  UBlowupOptions o;
  o.cfl = k.cfl;
  o.dt_max = k.dt_max;
  o.t_max = k.t_max;
  o.u_stop = k.u_stop;
  o.resolution = k.resolution;
  auto tr = run_u(u, P, o);
  auto D = detect_blowup(tr, P);
  bool det = D.status == BlowupStatus::Detected;
  {
    CsvWriter w((dir / "norms.csv").string(), {"t", "sup_norm", "rate_estimate"});
    for (size_t i = 0; i < tr.times.size(); ++i) {
      double est = det ? std::pow(D.T - tr.times[i], 1 / (P.p - 1)) * tr.sup_norms[i] : NAN;
      w.row({tr.times[i], tr.sup_norms[i], est});
    }
  }
  write_field_csv(tr.snapshots.back(), (dir / "final_field.csv").string());
  return {{"kappa", P.kappa},
          {"status", std::string(det ? "detected" : "inconclusive")},
          {"reason", D.reason},
          {"stop_reason", tr.stop_reason},
          {"blowup_time", D.T},
          {"rate_constant", D.rate_constant},
          {"rel_error", std::fabs(D.rate_constant / P.kappa - 1)},
          {"lower_bound_ok", std::string(D.lower_bound_ok ? "true" : "false")},
          {"lower_bound_min_ratio", D.lower_bound_min_ratio},
          {"samples", long(tr.times.size())}};
}

Metrics run_audit(const ExperimentConfig& c, const fs::path& dir) {
  auto P = make_params(c);
  const auto& k = c.lyapunov_audit;
  std::vector<FunctionalReport> R;
  auto run = run_similarity(k.run, P, c.seed, [&](const Field& F) { R.push_back(compute_J(F, P)); });
  if (R.size() < 2) throw std::runtime_error("fewer than two functional reports");
  double theta = P.theta;
  auto used = R;
  if (k.select_theta) {
    auto th = select_theta(R, P, k.tol);
    if (th) {
      theta = *th;
      used = reports_with_theta(R, P, theta);
    }
  }
  auto C = verify_lyapunov(used, k.tol);
  long over = std::count_if(C.violations.begin(), C.violations.end(), [&](double v) { return v > k.tol; });
  {
    CsvWriter w((dir / "functionals.csv").string(), {"s", "E0", "I", "E", "J", "ws_l2sq", "l2", "lp1", "h1"});
    for (const auto& r : used) w.row({r.s, r.E0, r.I, r.E, r.J, r.ws_l2sq, r.l2, r.lp1, r.h1});
  }
  {
    CsvWriter w((dir / "audit.csv").string(), {"max_violation", "violations", "theta", "reports", "s_last"});
    w.row({C.max_violation, over, theta, long(used.size()), used.back().s});
  }
  return {{"max_violation", C.max_violation},
          {"violations", over},
          {"theta", theta},
          {"reports", long(used.size())},
          {"s_last", used.back().s},
          {"stop", run.stop}};
}

LinearizedTrace classify_trace(const WRunKnobs& k, const ProblemParams& P, uint64_t seed, int degree, WRun& run) {
  run = run_similarity(k, P, seed);
  BuildVOptions bo;
  bo.degree = degree;
  return build_V(run.trace.snapshots, P, bo);
}

Metrics run_classify(const ExperimentConfig& c, const fs::path& dir) {
  auto P = make_params(c);
  WRun run;
  auto T = classify_trace(c.classify.run, P, c.seed, c.classify.degree, run);
  auto R = classify(T, P);
  {
    CsvWriter w((dir / "trace.csv").string(), {"s", "X", "Y", "Z", "beta", "omega"});
    for (size_t i = 0; i < T.s.size(); ++i) w.row({T.s[i], T.X[i], T.Y[i], T.Z[i], T.beta[i], T.omega[i]});
  }
  json rep;
  rep["case"] = to_string(R.verdict);
  rep["l"] = R.l ? json(*R.l) : json(nullptr);
  rep["dichotomy"] = to_string(R.xyz.dichotomy);
  rep["slope"] = R.xyz.slope;
  rep["note"] = R.note;
  Metrics m{{"case", std::string(to_string(R.verdict))}, {"l", long(R.l ? *R.l : -1)}, {"slope", R.xyz.slope}};
  if (R.afit) {
    const auto& A = *R.afit;
    CsvWriter w((dir / "eigenvalues.csv").string(), P.n == 1 ? std::vector<std::string>{"s", "s_lambda_1"}
                                                              : std::vector<std::string>{"s", "s_lambda_1", "s_lambda_2"});
    for (size_t i = 0; i < A.s.size(); ++i) {
      std::vector<double> row{A.s[i]};
      for (int j = 0; j < A.eigenvalues[i].size(); ++j) row.push_back(A.s[i] * A.eigenvalues[i](j));
      w.row_values(row);
    }
    rep["law"] = A.law;
    rep["max_rel_error"] = A.max_rel_error;
    rep["law_ok"] = A.law_ok;
    m.push_back({"max_rel_error", A.max_rel_error});
  }
  if (R.mode) {
    rep["mode"] = {{"ok", R.mode->ok}, {"m", R.mode->m}, {"slope", R.mode->slope}, {"residual", R.mode->residual}};
    json cs = json::array();
    for (size_t i = 0; i < R.mode->c.size(); ++i) cs.push_back({{"alpha", mi_string(R.mode->alphas[i])}, {"c", R.mode->c[i]}});
    rep["mode"]["coefficients"] = cs;
    m.push_back({"m", long(R.mode->m)});
  }
  std::ofstream(dir / "report.json") << rep.dump(2) << '\n';
  return m;
}

Metrics run_profile(const ExperimentConfig& c, const fs::path& dir) {
  auto P = make_params(c);
  const auto& k = c.profile_check;
  auto S = ProfileSpec::quadratic_f(P, k.l == 0 ? P.n : k.l);
  double res = residual_G(S, ball_lattice(P.n, k.residual_radius));
  auto run = run_similarity(k.run, P, c.seed);
  std::vector<Field> snaps;
  for (const auto& F : run.trace.snapshots)
    if (F.time >= 1) snaps.push_back(F);
  ConvergenceOptions co;
  co.fit_from = k.fit_from;
  auto C = extended_convergence(snaps, S, k.K0, co);
  {
    CsvWriter w((dir / "error.csv").string(), {"s", "sup_error"});
    for (size_t i = 0; i < C.s.size(); ++i) w.row({C.s[i], C.sup_error[i]});
  }
  Metrics m{{"residual_G", res}, {"monotone_from", C.monotone_from ? *C.monotone_from : NAN}};
  if (C.fit) {
    m.push_back({"c1", C.fit->c1});
    m.push_back({"c2", C.fit->c2});
    m.push_back({"rel_residual", C.fit->rel_residual});
    m.push_back({"measured_order", C.fit->measured_order});
    m.push_back({"model_order", C.fit->model_order});
  }
  return m;
}

Metrics run_scenario(const ExperimentConfig& c, const fs::path& dir);

Metrics run_sweep(const ExperimentConfig& c, const fs::path& dir) {
  auto cells = expand_sweep(c);
  std::vector<RunOutcome> out(cells.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next++) < cells.size();) {
      char name[32];
      std::snprintf(name, sizeof name, "cell_%03zu", i);
      out[i] = run(cells[i], dir / "cells" / name);
    }
  };
  std::vector<std::thread> pool;
  int nw = std::min<int>(c.workers, int(cells.size()));
  for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<std::string> keys;
  for (const auto& o : out)
    for (const auto& [key, v] : o.metrics)
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  std::vector<std::string> header{"cell"};
  for (const auto& a : c.sweep.axes) header.push_back(a.key);
  header.push_back("status");
  header.push_back("error");
  header.insert(header.end(), keys.begin(), keys.end());
  CsvWriter w((dir / "summary.csv").string(), header);
  std::vector<size_t> idx(c.sweep.axes.size(), 0);
  long failed = 0;
  for (size_t i = 0; i < cells.size(); ++i) {
    std::vector<CsvCell> row{long(i)};
    for (size_t a = 0; a < idx.size(); ++a) row.push_back(c.sweep.axes[a].values[idx[a]]);
    row.push_back(std::string(out[i].status == 0 ? "ok" : "failed"));
    row.push_back(out[i].error);
    for (const auto& key : keys) {
      auto it = std::find_if(out[i].metrics.begin(), out[i].metrics.end(), [&](const auto& kv) { return kv.first == key; });
      row.push_back(it == out[i].metrics.end() ? CsvCell(std::string()) : it->second);
    }
    w.row(row);
    failed += out[i].status != 0;
    size_t a = 0;
    while (a < idx.size() && ++idx[a] == c.sweep.axes[a].values.size()) idx[a++] = 0;
  }
  return {{"cells", long(cells.size())}, {"failed", failed}};
}

Metrics run_scenario(const ExperimentConfig& c, const fs::path& dir) {
  switch (scenario_from_string(c.scenario)) {
    case Scenario::OdeRate: return run_ode_rate(c, dir);
    case Scenario::PhiSeries: return run_phi_series(c, dir);
    case Scenario::AlphaDichotomy: return run_alpha(c, dir);
    case Scenario::PdeBlowup: return run_pde_blowup(c, dir);
    case Scenario::LyapunovAudit: return run_audit(c, dir);
    case Scenario::Classify: return run_classify(c, dir);
    case Scenario::ProfileCheck: return run_profile(c, dir);
    case Scenario::Sweep: return run_sweep(c, dir);
  }
  throw std::logic_error("unhandled scenario");
}

}  // namespace

RunOutcome run(const ExperimentConfig& c, const fs::path& dir) {
  RunOutcome R;
  try {
    validate(c);
  } catch (const ConfigError& e) {
    R.status = 2;
    R.error = e.what();
    return R;
  }
  // an empty sweep is the base run itself
  if (c.scenario == "sweep" && c.sweep.axes.empty()) return run(expand_sweep(c).front(), dir);
  fs::create_directories(dir);
  fs::remove(dir / "FAILED");
  std::ofstream(dir / "config.yaml") << dump_config(c);
  try {
    R.metrics = run_scenario(c, dir);
    json s;
    s["scenario"] = c.scenario;
    s["status"] = "ok";
    s["metrics"] = to_json(R.metrics);
    std::ofstream(dir / "summary.json") << s.dump(2) << '\n';
  } catch (const std::exception& e) {
    R.status = 1;
    R.error = e.what();
    std::ofstream(dir / "FAILED") << e.what() << '\n';
  }
  write_manifest(dir, c.scenario, R.status);
  return R;
}

}  // namespace blowup::exp
