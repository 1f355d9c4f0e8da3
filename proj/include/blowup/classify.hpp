#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blowup/hermite.hpp"
#include "blowup/ode.hpp"
#include "blowup/params.hpp"
#include "blowup/pde.hpp"

namespace blowup {

struct LinearizedTrace {
  int n = 1;
  std::vector<double> s, omega, beta, phi;
  std::vector<HermiteCoeffs> V;
  std::vector<double> Z, X, Y;
  std::vector<double> grid_norm_sq;  // ||V||^2 by grid quadrature (NAN for synthetic traces)
  double tail = 0;                   // closure of int_{s_end}^inf omega
};

inline void fill_split(LinearizedTrace& T) {
  T.Z.clear();
  T.X.clear();
  T.Y.clear();
  for (const auto& C : T.V) {
    auto S = split(C);
    T.Z.push_back(S.Z);
    T.X.push_back(S.X);
    T.Y.push_back(S.Y);
  }
}

// Trace from coefficients alone (phi = kappa, beta = 1)
inline LinearizedTrace trace_from_coeffs(const std::vector<double>& s, const std::vector<HermiteCoeffs>& V) {
  if (s.size() != V.size() || s.empty()) throw InvalidArgument("trace_from_coeffs: size mismatch");
  LinearizedTrace T;
  T.n = V.front().dim();
  T.s = s;
  T.V = V;
  T.omega.assign(s.size(), 0.0);
  T.beta.assign(s.size(), 1.0);
  T.phi.assign(s.size(), NAN);
  T.grid_norm_sq.assign(s.size(), NAN);
  fill_split(T);
  return T;
}

// V(s) = e^{sL} V(s_0) sampled at the given times
inline LinearizedTrace semigroup_trace(const HermiteCoeffs& V0, const std::vector<double>& s) {
  std::vector<HermiteCoeffs> V;
  for (double t : s) V.push_back(semigroup_apply(V0, t - s.front()));
  return trace_from_coeffs(s, V);
}

inline LinearizedTrace rotate_trace(const LinearizedTrace& T, const Eigen::MatrixXd& R) {
  LinearizedTrace out = T;
  for (auto& C : out.V) C = rotate(C, R);
  fill_split(out);
  return out;
}

struct BuildVOptions {
  int degree = 6;
  PhiOptions phi;
};

inline LinearizedTrace build_V(const std::vector<Field>& snaps, const ProblemParams& P, const BuildVOptions& o = {}) {
  if (snaps.size() < 2) throw InvalidArgument("build_V needs at least two snapshots");
  for (size_t k = 1; k < snaps.size(); ++k)
    if (!(snaps[k].time > snaps[k - 1].time)) throw InvalidArgument("snapshot times must increase");
  const double s_first = snaps.front().time, s_end = snaps.back().time;
  LinearizedTrace T;
  T.n = snaps.front().grid.dim;

  // phi on [s_first, s_end], omega along its samples, cumulative integral from s_end
  std::vector<double> ts, om, phis;
  if (P.unperturbed()) {
    ts = {s_first, s_end};
    om = {0.0, 0.0};
    phis = {P.kappa, P.kappa};
  } else {
    if (s_end - s_first < 1.0) throw InvalidArgument("trace too short for the omega tail estimate");
    auto sol = solve_phi(P, s_first, s_end, o.phi);
    ts = sol.times;
    phis = sol.values;
    for (size_t i = 0; i < ts.size(); ++i)
      om.push_back(P.p * (std::pow(phis[i], P.p - 1) - std::pow(P.kappa, P.p - 1)) + P.scaled_h(1, ts[i], phis[i]));
  }
  std::vector<double> tail_int(ts.size(), 0.0);  // int_{t}^{s_end} omega
  for (size_t i = ts.size() - 1; i-- > 0;) tail_int[i] = tail_int[i + 1] + 0.5 * (ts[i + 1] - ts[i]) * (om[i] + om[i + 1]);
  // omega ~ C s^{-a} past s_end
  T.tail = P.unperturbed() ? 0.0 : om.back() * std::pow(s_end, P.a) * std::pow(s_end, 1 - P.a) / (P.a - 1);

  auto interp = [&](const std::vector<double>& y, double s) {
    auto it = std::upper_bound(ts.begin(), ts.end(), s);
    size_t j = std::clamp<size_t>(it - ts.begin(), 1, ts.size() - 1);
    double t = (s - ts[j - 1]) / (ts[j] - ts[j - 1]);
    return (1 - t) * y[j - 1] + t * y[j];
  };

  for (const auto& F : snaps) {
    if (F.frame != Frame::Similarity) throw InvalidArgument("build_V needs similarity-frame fields");
    double s = F.time;
    double ph = P.unperturbed() ? P.kappa : interp(phis, s);
    double w_int = P.unperturbed() ? 0.0 : interp(tail_int, s) + T.tail;
    double beta = std::exp(-w_int);
    std::vector<double> V(F.values.size());
    for (size_t k = 0; k < V.size(); ++k) V[k] = beta * (F.values[k] - ph);
    auto Q = grid_rule(F.grid);
    T.s.push_back(s);
    T.phi.push_back(ph);
    T.beta.push_back(beta);
    T.omega.push_back(P.unperturbed() ? 0.0 : interp(om, s));
    T.V.push_back(project(Q, V, o.degree));
    T.grid_norm_sq.push_back(grid_inner(F.grid, V, V));
  }
  fill_split(T);
  return T;
}

// ---------------------------------------------------------------- Fbar

struct FbarRatios {
  double quadratic = 0;  // sup |Fbar| / V^2
  double expansion = 0;  // sup |Fbar - p/(2 kappa) V^2| / (|V|^3 + V^2 s^{1-a})
};

namespace detail {

// (1+x)^p - 1 - p x without cancellation for small x
inline double power_remainder(double p, double x) {
  if (std::fabs(x) >= 0.05) return std::pow(std::fabs(1 + x), p - 1) * (1 + x) - 1 - p * x;
  double term = p * (p - 1) / 2 * x * x, sum = 0;
  for (int k = 2; k < 30 && term != 0.0; ++k) {
    sum += term;
    term *= (p - k) / (k + 1) * x;
  }
  return sum;
}

}  // namespace detail

inline double Fbar(double V, const ProblemParams& P, double s, double phi, double beta) {
  double v = V / beta;
  double F = phi > 0 ? std::pow(phi, P.p) * detail::power_remainder(P.p, v / phi)
                     : std::pow(std::fabs(v + phi), P.p - 1) * (v + phi) - std::pow(std::fabs(phi), P.p - 1) * phi -
                           P.p * std::pow(std::fabs(phi), P.p - 1) * v;
  double H = 0.0;
  if (!P.unperturbed()) {
    if (std::fabs(v) <= 1e-3 * std::fabs(phi)) {
      double h2 = P.scaled_h(2, s, phi);
      H = v * v * (h2 / 2 + (P.scaled_h(2, s, phi + v) - h2) / 6);
    } else {
      H = P.scaled_h(0, s, v + phi) - P.scaled_h(0, s, phi) - P.scaled_h(1, s, phi) * v;
    }
  }
  return beta * (F + H);
}

inline FbarRatios check_Fbar_bound(const std::vector<double>& V, const ProblemParams& P, double s, double phi, double beta) {
  FbarRatios R;
  for (double x : V) {
    if (x == 0.0) continue;
    double f = Fbar(x, P, s, phi, beta), x2 = x * x;
    R.quadratic = std::max(R.quadratic, std::fabs(f) / x2);
    R.expansion = std::max(R.expansion, std::fabs(f - P.p / (2 * P.kappa) * x2) / (std::fabs(x) * x2 + x2 * std::pow(s, 1 - P.a)));
  }
  return R;
}

// ---------------------------------------------------------------- dichotomy

enum class Dichotomy { ExponentialDecay, NullDominant, Inconclusive };

inline const char* to_string(Dichotomy d) {
  switch (d) {
    case Dichotomy::ExponentialDecay: return "exponential_decay";
    case Dichotomy::NullDominant: return "null_dominant";
    default: return "inconclusive";
  }
}

struct DichotomyOptions {
  double mu_min = 0.4;
  double null_ratio = 0.2;
  double window = 0.5;  // trailing fraction of the trace used for fits
};

struct XYZResult {
  Dichotomy dichotomy = Dichotomy::Inconclusive;
  double slope = NAN;           // d log||V|| / ds over the window
  double fit_residual = NAN;    // RMS residual of that fit
  double max_ratio = NAN;       // max (Z+Y)/X over the window
};

namespace detail {

inline size_t window_start(const std::vector<double>& s, double frac) {
  double cut = s.back() - frac * (s.back() - s.front());
  return std::lower_bound(s.begin(), s.end(), cut) - s.begin();
}

}  // namespace detail

inline XYZResult track_XYZ(const LinearizedTrace& T, const DichotomyOptions& o = {}) {
  XYZResult R;
  size_t i0 = detail::window_start(T.s, o.window);
  std::vector<double> x, y;
  for (size_t i = i0; i < T.s.size(); ++i) {
    double nrm = std::sqrt(T.Z[i] * T.Z[i] + T.X[i] * T.X[i] + T.Y[i] * T.Y[i]);
    if (nrm <= 0) continue;
    x.push_back(T.s[i]);
    y.push_back(std::log(nrm));
  }
  if (x.size() >= 3) {
    auto f = fit_line(x, y);
    R.slope = f.slope;
    double ss = 0;
    for (size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    R.fit_residual = std::sqrt(ss / x.size());
  }
  R.max_ratio = 0;
  bool monotone = true;
  double prev = INFINITY;
  for (size_t i = i0; i < T.s.size(); ++i) {
    double r = T.X[i] > 0 ? (T.Z[i] + T.Y[i]) / T.X[i] : INFINITY;
    R.max_ratio = std::max(R.max_ratio, r);
    if (r > prev * (1 + 1e-9) + 1e-15) monotone = false;
    prev = r;
  }
  if (std::isfinite(R.slope) && R.slope <= -o.mu_min && R.fit_residual < 0.1)
    R.dichotomy = Dichotomy::ExponentialDecay;
  else if (R.max_ratio <= o.null_ratio && monotone)
    R.dichotomy = Dichotomy::NullDominant;
  return R;
}

// ---------------------------------------------------------------- case ii

enum class EigenBranch { Active, Inactive, Undetermined };

struct AFitOptions {
  double active_tol = 0.15;     // |s lambda / (-kappa/(4p)) - 1|
  double inactive_frac = 0.3;   // |s lambda| below this fraction of kappa/(4p)
  double growth_limit = 4.0;    // lambda s^{min(a,2)} growth over the window
  double x_floor = 1e-12;
  double window = 0.5;
};

struct AFit {
  std::vector<double> s;
  std::vector<Eigen::VectorXd> eigenvalues;  // ascending, per snapshot
  std::vector<EigenBranch> branch;           // per eigenvalue index
  int l = 0;                                 // number of active eigenvalues
  double law = 0;                            // -kappa/(4p)
  double max_rel_error = NAN;                // over active eigenvalues at the last snapshot
  bool law_ok = false;
};

inline Eigen::VectorXd a_eigenvalues(const HermiteCoeffs& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_matrix(C), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline AFit fit_A(const LinearizedTrace& T, const ProblemParams& P, const AFitOptions& o = {}) {
  if (T.X.back() < o.x_floor) throw InvalidArgument("fit_A: null-space component below the noise floor");
  AFit A;
  A.law = -P.kappa / (4 * P.p);
  A.s = T.s;
  for (const auto& C : T.V) A.eigenvalues.push_back(a_eigenvalues(C));
  const int n = T.n;
  const double ex = std::min(P.a, 2.0);
  size_t i0 = detail::window_start(T.s, o.window);
  A.max_rel_error = 0;
  for (int i = 0; i < n; ++i) {
    double sl = T.s.back() * A.eigenvalues.back()(i);
    double rel = std::fabs(sl / A.law - 1);
    if (rel <= o.active_tol) {
      A.branch.push_back(EigenBranch::Active);
      A.max_rel_error = std::max(A.max_rel_error, rel);
      ++A.l;
      continue;
    }
    double g0 = 0, g1 = 0;
    size_t mid = (i0 + T.s.size()) / 2;
    for (size_t k = i0; k < T.s.size(); ++k) {
      double g = std::fabs(A.eigenvalues[k](i)) * std::pow(T.s[k], ex);
      (k < mid ? g0 : g1) = std::max(k < mid ? g0 : g1, g);
    }
    bool small = std::fabs(sl) <= o.inactive_frac * std::fabs(A.law);
    bool bounded = g1 <= o.growth_limit * std::max(g0, 1e-300) || g1 == 0;
    A.branch.push_back(small && bounded ? EigenBranch::Inactive : EigenBranch::Undetermined);
  }
  A.law_ok = A.l >= 1 && std::none_of(A.branch.begin(), A.branch.end(), [](EigenBranch b) { return b == EigenBranch::Undetermined; });
  return A;
}

// ---------------------------------------------------------------- case iii

struct ModeFit {
  bool ok = false;
  int m = 0;
  double slope = NAN;
  std::vector<MultiIndex> alphas;
  std::vector<double> c;  // V ~ -e^{(1-m/2)s} sum c_alpha H_alpha
  double residual = NAN;
  bool even = false;
  std::string reason;
};

struct ModeOptions {
  double slope_tol = 0.1;
  double window = 0.5;
  double coeff_floor = 1e-3;  // c_alpha below this fraction of the largest are dropped
};

inline ModeFit extract_mode(const LinearizedTrace& T, const ModeOptions& o = {}) {
  ModeFit M;
  size_t i0 = detail::window_start(T.s, o.window);
  std::vector<double> x, y;
  for (size_t i = i0; i < T.s.size(); ++i) {
    double nrm = std::sqrt(T.Z[i] * T.Z[i] + T.X[i] * T.X[i] + T.Y[i] * T.Y[i]);
    if (nrm > 0) {
      x.push_back(T.s[i]);
      y.push_back(std::log(nrm));
    }
  }
  if (x.size() < 3) {
    M.reason = "too few nonzero snapshots";
    return M;
  }
  M.slope = fit_line(x, y).slope;
  int m = static_cast<int>(std::lround(2 * (1 - M.slope)));
  double lam = 1 - m / 2.0;
  if (m < 3 || std::fabs(M.slope - lam) > o.slope_tol * std::fabs(lam)) {
    M.reason = "slope between admissible eigenvalues";
    return M;
  }
  M.m = m;
  M.even = m % 2 == 0;
  const auto& idx = T.V.front().indices();
  double cmax = 0;
  std::vector<MultiIndex> al;
  std::vector<double> cs;
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k].total() != m) continue;
    double acc = 0;
    size_t cnt = 0;
    for (size_t i = i0; i < T.s.size(); ++i, ++cnt) acc += std::exp(-lam * T.s[i]) * T.V[i][k];
    al.push_back(idx[k]);
    cs.push_back(-acc / cnt);
    cmax = std::max(cmax, std::fabs(cs.back()));
  }
  if (al.empty()) {
    M.reason = "mode order beyond the projection degree";
    return M;
  }
  double num = 0, den = 0;
  for (size_t j = 0; j < al.size(); ++j) {
    if (std::fabs(cs[j]) < o.coeff_floor * cmax) continue;
    M.alphas.push_back(al[j]);
    M.c.push_back(cs[j]);
    ptrdiff_t k = idx.find(al[j]);
    for (size_t i = i0; i < T.s.size(); ++i) {
      double model = -cs[j] * std::exp(lam * T.s[i]);
      num += std::pow(T.V[i][k] - model, 2);
      den += model * model;
    }
  }
  M.residual = den > 0 ? std::sqrt(num / den) : INFINITY;
  M.ok = cmax > 0;
  if (!M.ok) M.reason = "all mode coefficients vanish";
  return M;
}

// ---------------------------------------------------------------- report

enum class Case { I_Phi, II_Quadratic, III_HigherMode, Inconclusive };

inline const char* to_string(Case c) {
  switch (c) {
    case Case::I_Phi: return "I_phi";
    case Case::II_Quadratic: return "II_quadratic";
    case Case::III_HigherMode: return "III_higher_mode";
    default: return "inconclusive";
  }
}

struct ClassifyOptions {
  DichotomyOptions dichotomy;
  AFitOptions afit;
  ModeOptions mode;
  double zero_floor = 1e-12;  // ||V|| below this over the window reads as V = 0
};

struct ClassificationReport {
  Case verdict = Case::Inconclusive;
  XYZResult xyz;
  std::optional<AFit> afit;
  std::optional<ModeFit> mode;
  std::optional<int> l;
  std::string note;
};

inline ClassificationReport classify(const LinearizedTrace& T, const ProblemParams& P, const ClassifyOptions& o = {}) {
  ClassificationReport R;
  size_t i0 = detail::window_start(T.s, o.dichotomy.window);
  double vmax = 0;
  for (size_t i = i0; i < T.s.size(); ++i)
    vmax = std::max(vmax, std::sqrt(T.Z[i] * T.Z[i] + T.X[i] * T.X[i] + T.Y[i] * T.Y[i]));
  if (vmax <= o.zero_floor) {
    R.verdict = Case::I_Phi;
    return R;
  }
  R.xyz = track_XYZ(T, o.dichotomy);
  if (R.xyz.dichotomy == Dichotomy::ExponentialDecay) {
    R.mode = extract_mode(T, o.mode);
    if (R.mode->ok) R.verdict = Case::III_HigherMode;
    else R.note = R.mode->reason;
  } else if (R.xyz.dichotomy == Dichotomy::NullDominant) {
    try {
      R.afit = fit_A(T, P, o.afit);
      if (R.afit->law_ok) {
        R.verdict = Case::II_Quadratic;
        R.l = R.afit->l;
      } else {
        R.note = "eigenvalues do not follow the dichotomy";
      }
    } catch (const InvalidArgument& e) {
      R.note = e.what();
    }
  }
  return R;
}

}  // namespace blowup
