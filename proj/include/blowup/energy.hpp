#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "blowup/hermite.hpp"
#include "blowup/params.hpp"
#include "blowup/pde.hpp"

namespace blowup {

// Grid integrals with node weights rho(y_k) h^n. The gradient term is summed
// over cell faces with the exact face weight, which makes the discrete energy
// the one whose gradient flow is the discrete w-equation.
struct FieldIntegrals {
  double l2 = 0;       // int w^2 rho
  double lp1 = 0;      // int |w|^{p+1} rho
  double grad_sq = 0;  // int |grad w|^2 rho
  double H_int = 0;    // e^{-(p+1)s/(p-1)} int H(e^{s/(p-1)} w) rho
  double ws_l2sq = 0;  // int w_s^2 rho, w_s from the discrete right-hand side
  double lp1_ball = 0; // int_{|y|<R} |w|^{p+1} dy (unweighted)
};

struct FunctionalReport {
  double s = 0;
  double E0 = 0, I = 0, E = 0, J = 0;
  double ws_l2sq = 0;
  double l2 = 0, lp1 = 0, h1 = 0;
  double lp1_ball = 0;
};

namespace detail {

template <class F>
void for_each_face(const Grid& g, F&& f) {
  const int N = g.N;
  const double h = g.h();
  if (g.dim == 1) {
    for (int i = 0; i + 1 < N; ++i) {
      double yf = g.coord(i) + 0.5 * h;
      f(size_t(i), size_t(i + 1), rho1(yf) * h, yf * yf, yf);
    }
    return;
  }
  for (int i = 0; i + 1 < N; ++i)
    for (int j = 0; j < N; ++j) {
      double yf = g.coord(i) + 0.5 * h, yo = g.coord(j);
      f(g.index(i, j), g.index(i + 1, j), rho1(yf) * rho1(yo) * h * h, yf * yf + yo * yo, std::hypot(yf, yo));
    }
  for (int i = 0; i < N; ++i)
    for (int j = 0; j + 1 < N; ++j) {
      double yf = g.coord(j) + 0.5 * h, yo = g.coord(i);
      f(g.index(i, j), g.index(i, j + 1), rho1(yf) * rho1(yo) * h * h, yf * yf + yo * yo, std::hypot(yf, yo));
    }
}

inline double norm_of(const std::vector<double>& y) {
  double r = 0;
  for (double v : y) r += v * v;
  return std::sqrt(r);
}

}  // namespace detail

inline double grad_energy(const Field& F) {
  const double h = F.grid.h();
  double s = 0;
  detail::for_each_face(F.grid, [&](size_t a, size_t b, double wf, double, double) {
    double d = (F.values[b] - F.values[a]) / h;
    s += wf * d * d;
  });
  return s;
}

inline std::vector<double> ws_field(const Field& F, const ProblemParams& P) {
  auto A = weighted_axis(F.grid);
  std::vector<double> out(F.values.size());
  for (size_t k = 0; k < out.size(); ++k) out[k] = w_reaction(P, F.time, F.values[k]);
  apply_operator(A, F.grid, F.values, out);
  return out;
}

inline FieldIntegrals field_integrals(const Field& F, const ProblemParams& P, double ball_radius = 1.0) {
  if (F.frame != Frame::Similarity) throw InvalidArgument("energies are defined on similarity-frame fields");
  FieldIntegrals R;
  const double vol = F.grid.cell_volume();
  auto ws = ws_field(F, P);
  const bool pert = !P.unperturbed();
  for (size_t k = 0; k < F.values.size(); ++k) {
    auto y = F.grid.point(k);
    double w = F.values[k], om = rho(y) * vol, ap = std::pow(std::fabs(w), P.p + 1);
    R.l2 += om * w * w;
    R.lp1 += om * ap;
    R.ws_l2sq += om * ws[k] * ws[k];
    if (pert) R.H_int += om * P.scaled_H(F.time, w);
    if (detail::norm_of(y) < ball_radius) R.lp1_ball += vol * ap;
  }
  R.grad_sq = grad_energy(F);
  return R;
}

inline double compute_E0(const Field& F, const ProblemParams& P) {
  auto I = field_integrals(F, P);
  return 0.5 * I.grad_sq + I.l2 / (2 * (P.p - 1)) - I.lp1 / (P.p + 1);
}

inline double compute_I(const Field& F, const ProblemParams& P) {
  if (P.unperturbed()) return 0.0;
  if (F.time < P.s0) throw InvalidArgument("I is evaluated for s >= s0");
  double h = 0;
  const double vol = F.grid.cell_volume();
  for (size_t k = 0; k < F.values.size(); ++k) h += rho(F.grid.point(k)) * vol * P.scaled_H(F.time, F.values[k]);
  return -h;
}

// Same functionals for a field given analytically, on a Gauss-Hermite rule
inline double compute_E0(const Quadrature& Q, const ProblemParams& P, const std::function<double(const std::vector<double>&)>& w,
                         const std::function<double(const std::vector<double>&)>& grad_sq) {
  return Q.integrate([&](const std::vector<double>& y) {
    double v = w(y);
    return 0.5 * grad_sq(y) + v * v / (2 * (P.p - 1)) - std::pow(std::fabs(v), P.p + 1) / (P.p + 1);
  });
}

inline double compute_I(const Quadrature& Q, const ProblemParams& P, double s,
                        const std::function<double(const std::vector<double>&)>& w) {
  if (P.unperturbed()) return 0.0;
  return -Q.integrate([&](const std::vector<double>& y) { return P.scaled_H(s, w(y)); });
}

inline double j_factor(const ProblemParams& P, double s) {
  return P.gamma == 0 ? 1.0 : std::exp(P.gamma * std::pow(s, 1 - P.a) / (P.a - 1));
}

inline double j_of(const ProblemParams& P, double s, double E) {
  return E * j_factor(P, s) + P.theta * std::pow(s, 1 - P.a);
}

inline FunctionalReport make_report(const ProblemParams& P, double s, const FieldIntegrals& I) {
  FunctionalReport R;
  R.s = s;
  R.E0 = 0.5 * I.grad_sq + I.l2 / (2 * (P.p - 1)) - I.lp1 / (P.p + 1);
  R.I = -I.H_int;
  R.E = R.E0 + R.I;
  R.J = j_of(P, s, R.E);
  R.ws_l2sq = I.ws_l2sq;
  R.l2 = I.l2;
  R.lp1 = I.lp1;
  R.h1 = I.l2 + I.grad_sq;
  R.lp1_ball = I.lp1_ball;
  return R;
}

inline FunctionalReport compute_J(const Field& F, const ProblemParams& P, double ball_radius = 1.0) {
  if (!(F.time > 0)) throw InvalidArgument("J needs s > 0");
  return make_report(P, F.time, field_integrals(F, P, ball_radius));
}

// partial derivative of I in s at fixed w
inline double explicit_dI_ds(const Field& F, const ProblemParams& P) {
  if (P.unperturbed()) return 0.0;
  double hw = 0, H = 0;
  const double vol = F.grid.cell_volume();
  for (size_t k = 0; k < F.values.size(); ++k) {
    double om = rho(F.grid.point(k)) * vol, w = F.values[k];
    hw += om * w * P.scaled_h(0, F.time, w);
    H += om * P.scaled_H(F.time, w);
  }
  return (P.p + 1) / (P.p - 1) * H - hw / (P.p - 1);
}

// ---------------------------------------------------------------- Lyapunov audit

struct LyapunovCheck {
  double max_violation = 0;
  std::vector<double> violations;  // per consecutive pair
  std::optional<double> onset;     // earliest s past which every pair is within tol
};

inline LyapunovCheck verify_lyapunov(const std::vector<FunctionalReport>& R, double tol = 1e-4) {
  LyapunovCheck C;
  if (R.size() < 2) return C;
  C.max_violation = -INFINITY;
  for (size_t k = 1; k < R.size(); ++k) {
    if (!(R[k].s > R[k - 1].s)) throw InvalidArgument("reports must be sampled at increasing s");
    double v = R[k].J - R[k - 1].J + 0.25 * (R[k].s - R[k - 1].s) * (R[k].ws_l2sq + R[k - 1].ws_l2sq);
    C.violations.push_back(v);
    C.max_violation = std::max(C.max_violation, v);
  }
  size_t first_ok = C.violations.size();
  while (first_ok > 0 && C.violations[first_ok - 1] <= tol) --first_ok;
  if (first_ok < C.violations.size()) C.onset = R[first_ok].s;
  return C;
}

inline std::vector<FunctionalReport> reports_with_theta(std::vector<FunctionalReport> R, const ProblemParams& P, double theta) {
  for (auto& r : R) r.J = r.E * j_factor(P, r.s) + theta * std::pow(r.s, 1 - P.a);
  return R;
}

// smallest theta in {0, 1, 2, 4, ...} with no violation above tol over the calibration reports
inline std::optional<double> select_theta(const std::vector<FunctionalReport>& R, const ProblemParams& P, double tol = 1e-4,
                                          int max_power = 40) {
  if (verify_lyapunov(reports_with_theta(R, P, 0.0), tol).max_violation <= tol) return 0.0;
  for (int k = 0; k <= max_power; ++k) {
    double th = std::ldexp(1.0, k);
    if (verify_lyapunov(reports_with_theta(R, P, th), tol).max_violation <= tol) return th;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- criterion

enum class Criterion { Triggered, NotTriggered };

struct CriterionResult {
  Criterion verdict = Criterion::NotTriggered;
  double margin = 0;
};

inline CriterionResult criterion_from(const ProblemParams& P, double J, double l2) {
  CriterionResult C;
  C.margin = -4 * J + (P.p - 1) / (P.p + 1) * std::pow(l2, (P.p + 1) / 2);
  C.verdict = C.margin > 0 ? Criterion::Triggered : Criterion::NotTriggered;
  return C;
}

inline CriterionResult blowup_criterion(const Field& F, const ProblemParams& P) {
  auto R = compute_J(F, P);
  return criterion_from(P, R.J, R.l2);
}

// ---------------------------------------------------------------- diagnostics

struct EnergyDiagnostics {
  double ws_window_max = 0;   // (i) sup_s int_s^{s+1} ||w_s||^2
  double two_J_first = 0;
  bool i_holds = false;       // (i) <= 2 J(s_first)
  double l2_max = 0;          // (ii)
  double lp1_vs_h1 = 0;       // (iii) sup lp1 / (1 + ||w||_{H1}^2)
  double h1_vs_ws = 0;        // (iv) sup ||w||_{H1}^2 / (1 + ||w_s||)
  double lp1_sq_window = 0;   // (v) sup window int ||w||_{L^{p+1}}^{2(p+1)}
  double h1_window = 0;       // (vi) sup window int ||w||_{H1}^2
  double key_q2 = 0, key_q4 = 0;  // sup window int ||w||^{q(p+1)}_{L^{p+1}(B_R)}
  double E_min = 0, E_max = 0;
  bool finite = true;
};

namespace detail {

// sup over windows [s, s+width] of the trapezoid integral of f
template <class F>
double window_sup(const std::vector<FunctionalReport>& R, double width, F&& f) {
  std::vector<double> cum(R.size(), 0.0);
  for (size_t k = 1; k < R.size(); ++k) cum[k] = cum[k - 1] + 0.5 * (R[k].s - R[k - 1].s) * (f(R[k]) + f(R[k - 1]));
  double best = 0;
  size_t j = 0;
  for (size_t i = 0; i < R.size(); ++i) {
    while (j + 1 < R.size() && R[j + 1].s <= R[i].s + width + 1e-12) ++j;
    if (R[j].s - R[i].s < width - 1e-9) break;
    best = std::max(best, cum[j] - cum[i]);
  }
  return best;
}

}  // namespace detail

inline EnergyDiagnostics energy_diagnostics(const std::vector<FunctionalReport>& R, double width = 1.0) {
  if (R.empty() || R.back().s - R.front().s < width - 1e-9) throw InvalidArgument("trace must span a full window");
  EnergyDiagnostics D;
  D.ws_window_max = detail::window_sup(R, width, [](const auto& r) { return r.ws_l2sq; });
  D.two_J_first = 2 * R.front().J;
  D.i_holds = D.ws_window_max <= D.two_J_first + 1e-12;
  D.E_min = D.E_max = R.front().E;
  for (const auto& r : R) {
    D.l2_max = std::max(D.l2_max, r.l2);
    D.lp1_vs_h1 = std::max(D.lp1_vs_h1, r.lp1 / (1 + r.h1));
    D.h1_vs_ws = std::max(D.h1_vs_ws, r.h1 / (1 + std::sqrt(r.ws_l2sq)));
    D.E_min = std::min(D.E_min, r.E);
    D.E_max = std::max(D.E_max, r.E);
    for (double v : {r.J, r.l2, r.lp1, r.h1, r.ws_l2sq})
      if (!std::isfinite(v)) D.finite = false;
  }
  D.lp1_sq_window = detail::window_sup(R, width, [](const auto& r) { return r.lp1 * r.lp1; });
  D.h1_window = detail::window_sup(R, width, [](const auto& r) { return r.h1; });
  D.key_q2 = detail::window_sup(R, width, [](const auto& r) { return std::pow(r.lp1_ball, 2); });
  D.key_q4 = detail::window_sup(R, width, [](const auto& r) { return std::pow(r.lp1_ball, 4); });
  return D;
}

// ---------------------------------------------------------------- local functional

// 1 on B_R, 0 outside B_{2R}, quintic smoothstep in between (C^2)
inline double cutoff_psi(double r, double R) {
  if (r <= R) return 1.0;
  if (r >= 2 * R) return 0.0;
  double t = (r - R) / R;
  return 1.0 - t * t * t * (10 - 15 * t + 6 * t * t);
}

inline double compute_E_psi(const Field& F, const ProblemParams& P, double R) {
  if (!(R > 0) || R >= F.grid.L / 2) throw InvalidArgument("cutoff radius must satisfy 0 < R < L/2");
  const double vol = F.grid.cell_volume(), h = F.grid.h();
  double grad = 0, bulk = 0;
  detail::for_each_face(F.grid, [&](size_t a, size_t b, double wf, double, double rf) {
    double ps = cutoff_psi(rf, R), d = (F.values[b] - F.values[a]) / h;
    grad += ps * ps * wf * d * d;
  });
  const bool pert = !P.unperturbed();
  for (size_t k = 0; k < F.values.size(); ++k) {
    auto y = F.grid.point(k);
    double ps = cutoff_psi(detail::norm_of(y), R), w = F.values[k], om = rho(y) * vol * ps * ps;
    if (om == 0) continue;
    bulk += om * (w * w / (2 * (P.p - 1)) - std::pow(std::fabs(w), P.p + 1) / (P.p + 1));
    if (pert) bulk -= om * P.scaled_H(F.time, w);
  }
  return 0.5 * grad + bulk;
}

// (n/(p+1) - (2-n)/2) int |grad w|^2 rho + (1/2)(1/2 - 1/(p+1)) int |y|^2 |grad w|^2 rho
inline double pohozaev_residual(const Field& F, double p) {
  const int n = F.grid.dim;
  const double h = F.grid.h();
  double g = 0, gy = 0;
  detail::for_each_face(F.grid, [&](size_t a, size_t b, double wf, double y2, double) {
    double d = (F.values[b] - F.values[a]) / h;
    g += wf * d * d;
    gy += wf * y2 * d * d;
  });
  return (n / (p + 1) - (2.0 - n) / 2) * g + 0.5 * (0.5 - 1 / (p + 1)) * gy;
}

}  // namespace blowup
