// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <cfloat>
#include <string>
#include <vector>

#include "blowup/classify.hpp"
#include "blowup/energy.hpp"
#include "blowup/hermite.hpp"
#include "blowup/ode.hpp"
#include "blowup/params.hpp"
#include "blowup/pde.hpp"
#include "blowup/profiles.hpp"

using namespace blowup;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double x) {
  char b[64];
  std::snprintf(b, sizeof b, f, x);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ProblemParams zero(int n, double p) { return derive_constants(n, p, 2, 1, 0, Perturbation::zero()); }
ProblemParams logd(double p, double mu = 1) { return derive_constants(1, p, 2, 30, mu, Perturbation::log_damped()); }

// ---------------------------------------------------------------- 1

Outcome ode_rate() {
  Outcome o;
  double worst = 0, slowest = 0;
  for (int h = 0; h < 3; ++h)
    for (double p : {1.5, 2.0, 3.0}) {
      auto P = h == 0 ? zero(1, p) : logd(p, h == 1 ? 1.0 : -1.0);
      auto t0 = std::chrono::steady_clock::now();
      auto S = solve_blowup_ode(P, 1.0, 0.0);
      slowest = std::max(slowest, seconds_since(t0));
      if (!S.blowup_time) {
        o.require(false, "no blow-up for p = " + fmt("%g", p));
        continue;
      }
      auto r = rate_constants(S, p);
      int used = 0;
      for (size_t i = 0; i < r.size(); ++i)
        if (S.values[i] >= 1e6) {
          worst = std::max(worst, std::fabs(r[i] / P.kappa - 1));
          ++used;
        }
      o.require(used > 0, "no samples above 1e6");
    }
  o.require(worst <= 0.03, "rate within 3%");
  o.require(slowest < 1.0, "each run under 1 s");
  o.note("max |rate/kappa - 1| = " + fmt("%.3e", worst) + ", slowest run " + fmt("%.3f s", slowest));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome phi_series() {
  Outcome o;
  auto P = logd(2);
  auto sol = solve_phi(P, 20, 200);
  double s = 200, sa = std::pow(s, P.a);
  double ode = sa * (sol.at(s) - P.kappa), ser = sa * (eval_phi_series(P, s, 3) - P.kappa);
  double rel = std::fabs(ode / ser - 1);
  o.require(rel <= 0.05, "series agreement within 5%");
  auto Z = zero(1, 2);
  auto z = solve_phi(Z, 20, 200);
  bool exact = true;
  for (double v : z.values) exact = exact && v == Z.kappa;
  o.require(exact, "phi == kappa exactly for h = 0");
  o.note("s^a(phi - kappa) = " + fmt("%.6f", ode) + " vs series " + fmt("%.6f", ser) + ", rel " + fmt("%.2e", rel));
  return o;
}

// ---------------------------------------------------------------- 3

Outcome hermite_suite() {
  Outcome o;
  double worst_off = 0, worst_norm = 0, raw_off = 0;
  for (int n : {1, 2}) {
    const int deg = 10;
    auto Q = build_quadrature(n, deg + 2);
    IndexSet I(n, deg);
    std::vector<std::vector<double>> tab(I.size(), std::vector<double>(Q.size()));
    for (size_t i = 0; i < I.size(); ++i)
      for (size_t k = 0; k < Q.size(); ++k) tab[i][k] = eval_H(I[i], Q.node(k));
    for (size_t i = 0; i < I.size(); ++i)
      for (size_t j = i; j < I.size(); ++j) {
        double ip = 0;
        for (size_t k = 0; k < Q.size(); ++k) ip += Q.weight(k) * tab[i][k] * tab[j][k];
        auto nsq = [&](const MultiIndex& a) {
          double v = 1;
          for (int d = 0; d < n; ++d) v *= std::pow(2.0, a[d]) * std::tgamma(a[d] + 1.0);
          return v;
        };
        if (i == j) {
          worst_norm = std::max(worst_norm, std::fabs(ip / nsq(I[i]) - 1));
        } else {
          raw_off = std::max(raw_off, std::fabs(ip));
          worst_off = std::max(worst_off, std::fabs(ip) / std::sqrt(nsq(I[i]) * nsq(I[j])));
        }
      }
  }
  o.require(worst_off <= 1e-10, "orthogonality 1e-10 relative to the norms");
  o.require(worst_norm <= 1e-8, "norms 1e-8");

  // composition law in coefficient space, |alpha| = 2 untouched
  HermiteCoeffs C(2, 8);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  for (auto& v : C.values()) v = U(rng);
  double worst_comp = 0;
  bool fixed2 = true, closed = true;
  for (auto [s1, s2] : {std::pair{0.75, 1.875}, std::pair{0.25, 0.5}, std::pair{3.0, 4.5}}) {
    auto a = semigroup_apply(semigroup_apply(C, s1), s2), b = semigroup_apply(C, s1 + s2);
    for (size_t k = 0; k < C.size(); ++k) {
      int t = C.index(k).total();
      worst_comp = std::max(worst_comp, std::fabs(a[k] - b[k]) / std::max(std::fabs(b[k]), 1e-300));
      if (t == 2) fixed2 = fixed2 && a[k] == C[k] && b[k] == C[k];
      closed = closed && b[k] == C[k] * (t == 2 ? 1.0 : std::exp((1.0 - 0.5 * t) * (s1 + s2)));
    }
  }
  o.require(closed, "coefficients equal c e^{lambda s} bit for bit");
  o.require(worst_comp <= 8 * DBL_EPSILON, "composition within a few ulps");
  o.require(fixed2, "|alpha| = 2 invariant");
  o.note("offdiag " + fmt("%.1e", worst_off) + " (raw " + fmt("%.1e", raw_off) + ")" + ", norm " + fmt("%.1e", worst_norm) + ", composition rel " +
         fmt("%.1e", worst_comp));
  return o;
}

// ---------------------------------------------------------------- 4

struct AuditRun {
  std::vector<FunctionalReport> R;
  double s_last = 0;
};

AuditRun audit(const ProblemParams& P, std::function<double(double)> w0, double s_end, double sup_stop) {
  auto g = Grid::make(1, 20.0, 0.05);
  auto F = Field::sample(g, Frame::Similarity, 20.0, [&](const auto& y) { return w0(y[0]); });
  WStepper st(g, P, 1e-3);
  AuditRun A;
  A.R.push_back(compute_J(F, P));
  long steps = std::lround((s_end - 20.0) / 1e-3);
  for (long k = 0; k < steps; ++k) {
    try {
      st.step(F);
    } catch (const BlowupReached&) {
      break;
    }
    if (sup_stop > 0 && F.sup_norm() >= sup_stop) break;
    A.R.push_back(compute_J(F, P));
  }
  A.s_last = A.R.back().s;
  return A;
}

Outcome lyapunov() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  auto Z = zero(1, 2);
  auto P = logd(2);
  auto st = audit(Z, [&](double) { return Z.kappa; }, 21.0, 0);
  auto sub = audit(P, [&](double y) { return 0.5 * P.kappa * std::exp(-y * y / 8); }, 22.0, 0);
  auto sup = audit(P, [&](double y) { return 1.3 * P.kappa * std::exp(-y * y / 16); }, 22.0, 5.0);
  double v0 = verify_lyapunov(st.R).max_violation;
  double v1 = verify_lyapunov(sub.R).max_violation;
  double v2 = verify_lyapunov(sup.R).max_violation;
  double secs = seconds_since(t0);
  o.require(v0 == 0.0, "stationary run exactly 0");
  o.require(v1 <= 1e-4, "sub-threshold run");
  o.require(v2 <= 1e-4, "super-threshold segment");
  o.require(sup.s_last < 22.0, "super-threshold data reaches sup w = 5");
  o.require(secs < 300, "runtime under 5 min");
  o.note("violations " + fmt("%.1e", v0) + " / " + fmt("%.2e", v1) + " / " + fmt("%.2e", v2) + " (segment to s = " +
         fmt("%.3f", sup.s_last) + "), " + fmt("%.1f s", secs));
  return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion_sweep() {
  Outcome o;
  int triggered = 0, global_checked = 0;
  for (double p : {2.0, 3.0}) {
    auto P = zero(1, p);
    auto g = Grid::make(1, 20.0, 0.5);
    for (int k = 1; k <= 30; ++k) {
      double w0 = 0.1 * k * P.kappa;
      auto F = Field::constant(g, Frame::Similarity, 1.0, w0);
      auto C = blowup_criterion(F, P);
      // constant data follow the scalar ODE exactly
      WStepper st(g, P, 1e-3);
      bool blew = false;
      for (long i = 0; i < 40000 && !blew; ++i) {
        try {
          st.step(F);
        } catch (const BlowupReached&) {
          blew = true;
        }
        blew = blew || F.sup_norm() > 1e6;
      }
      if (C.verdict == Criterion::Triggered) {
        ++triggered;
        o.require(blew, "triggered cell w0 = " + fmt("%.2f", w0) + " blows up");
      } else if (w0 <= P.kappa) {
        ++global_checked;
        o.require(!blew && F.finite(), "cell w0 = " + fmt("%.2f", w0) + " stays global");
      }
    }
  }
  auto P = zero(1, 2);
  auto Q = build_quadrature(1, 20);
  auto margin = [&](double c) {
    double E0 = compute_E0(Q, P, [c](const auto&) { return c; }, [](const auto&) { return 0.0; });
    double l2 = Q.integrate([c](const auto&) { return c * c; });
    return criterion_from(P, E0, l2).margin;
  };
  double m1 = margin(1.0), m2 = margin(2.0);
  o.require(std::fabs(m1 + 1.0 / 3) <= 1e-6, "margin(kappa) = -1/3");
  o.require(std::fabs(m2 - 16.0 / 3) <= 1e-6, "margin(2) = 16/3");
  o.note(std::to_string(triggered) + " triggered cells blew up, " + std::to_string(global_checked) +
         " sub-kappa cells global; margins " + fmt("%.12f", m1) + ", " + fmt("%.12f", m2));
  return o;
}

// ---------------------------------------------------------------- 6

Outcome pde_rate() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  auto P = logd(2);
  auto g = Grid::make(1, 6.0, 1e-3);
  auto u = Field::sample(g, Frame::Physical, 0, [](const auto& x) { return 5 * std::exp(-x[0] * x[0]); });
  auto tr = run_u(u, P);
  auto D = detect_blowup(tr, P);
  o.require(D.status == BlowupStatus::Detected, "blow-up detected");
  double rel = std::fabs(D.rate_constant / P.kappa - 1);
  o.require(rel <= 0.05, "rate within 5% of kappa");
  o.require(D.lower_bound_ok, "lower bound never violated");
  o.note("T = " + fmt("%.6f", D.T) + ", (T-t)||u|| = " + fmt("%.4f", D.rate_constant) + ", min lower-bound ratio " +
         fmt("%.4f", D.lower_bound_min_ratio) + ", stop: " + tr.stop_reason + ", " + fmt("%.1f s", seconds_since(t0)));
  return o;
}

// ---------------------------------------------------------------- 7 and 9 share the case-ii run

struct CaseIi {
  ProblemParams P = zero(2, 2);
  SolveTrace trace;
  LinearizedTrace T;
};

const CaseIi& case_ii() {
  static std::optional<CaseIi> run;
  if (!run) {
    CaseIi c;
    auto g = Grid::make(2, 10.0, 0.1);
    auto F = Field::sample(g, Frame::Similarity, 0.0, [&](const auto& y) {
      double r2 = y[0] * y[0] + y[1] * y[1];
      return c.P.kappa - 0.05 * (r2 - 4) * cutoff_psi(std::sqrt(r2), 4.0);
    });
    WRunOptions o;
    o.step.control_unstable_modes = true;
    o.snapshot_every = 100;
    c.trace = run_w(F, c.P, 0.01, 50.0, o);
    c.T = build_V(c.trace.snapshots, c.P);
    run = std::move(c);
  }
  return *run;
}

Outcome case_ii_law() {
  Outcome o;
  const auto& c = case_ii();
  auto A = fit_A(c.T, c.P);
  o.require(A.l == c.P.n, "l = n");
  double s_end = A.s.back(), worst = 0;
  for (int i = 0; i < A.eigenvalues.back().size(); ++i)
    worst = std::max(worst, std::fabs(s_end * A.eigenvalues.back()(i) / A.law - 1));
  o.require(s_end >= 50 - 1e-9, "trace reaches s = 50");
  o.require(worst <= 0.15, "s lambda_i within 15% of -kappa/(4p)");
  double rot = 0;
  for (double t : {0.3, 0.7, 2.1}) {
    Eigen::Matrix2d R;
    R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    auto B = fit_A(rotate_trace(c.T, R), c.P);
    for (size_t k = 0; k < A.s.size(); ++k) rot = std::max(rot, (A.eigenvalues[k] - B.eigenvalues[k]).cwiseAbs().maxCoeff());
  }
  o.require(rot <= 1e-8, "rotation equivariance 1e-8");
  auto rep = classify(c.T, c.P);
  o.require(rep.verdict == Case::II_Quadratic, "classified as case ii");
  o.note("s lambda = (" + fmt("%.5f", s_end * A.eigenvalues.back()(0)) + ", " + fmt("%.5f", s_end * A.eigenvalues.back()(1)) +
         ") vs " + fmt("%.5f", A.law) + ", max rel " + fmt("%.3f", worst) + ", rotation " + fmt("%.1e", rot));
  return o;
}

// ---------------------------------------------------------------- 8

Outcome case_iii() {
  Outcome o;
  auto P = zero(1, 2);
  const double eps = 1e-6;
  auto g = Grid::make(1, 20.0, 0.05);
  std::vector<double> seed(g.size());
  for (int i = 0; i < g.N; ++i) seed[i] = eval_h(4, g.coord(i)) * cutoff_psi(std::fabs(g.coord(i)), 9.0);
  for (int pass = 0; pass < 2; ++pass)
    for (int m = 0; m <= 2; ++m) {
      std::vector<double> hm(g.size());
      for (int i = 0; i < g.N; ++i) hm[i] = eval_h(m, g.coord(i));
      double c = grid_inner(g, seed, hm) / grid_inner(g, hm, hm);
      for (size_t i = 0; i < seed.size(); ++i) seed[i] -= c * hm[i];
    }
  Field F = Field::constant(g, Frame::Similarity, 0.0, P.kappa);
  for (size_t i = 0; i < seed.size(); ++i) F.values[i] -= eps * seed[i];
  WRunOptions wo;
  wo.step.control_unstable_modes = true;
  wo.snapshot_every = 100;
  auto tr = run_w(F, P, 1e-3, 6.0, wo);
  BuildVOptions bo;
  bo.degree = 8;
  auto T = build_V(tr.snapshots, P, bo);
  auto rep = classify(T, P);
  o.require(rep.verdict == Case::III_HigherMode, "PDE run classified as case iii");
  double rel = NAN;
  if (rep.mode && rep.mode->ok && rep.mode->c.size() == 1) {
    o.require(rep.mode->m == 4, "m = 4");
    rel = std::fabs(rep.mode->c[0] / eps - 1);
    o.require(rel <= 0.10, "seed coefficient within 10%");
  } else {
    o.require(false, "single-mode fit");
  }

  // pure semigroup traces
  double syn = 0;
  {
    HermiteCoeffs C(1, 8);
    C.set(MultiIndex{4}, -0.25);
    auto M = extract_mode(semigroup_trace(C, linspace(0, 12, 121)));
    o.require(M.ok && M.m == 4 && M.c.size() == 1, "1-D synthetic m = 4");
    if (M.ok && M.c.size() == 1) syn = std::max(syn, std::fabs(M.c[0] / 0.25 - 1));
  }
  {
    HermiteCoeffs C(2, 6);
    C.set(MultiIndex{3, 1}, -0.1);
    C.set(MultiIndex{0, 4}, -0.2);
    auto M = extract_mode(semigroup_trace(C, linspace(0, 12, 121)));
    o.require(M.ok && M.m == 4 && M.c.size() == 2, "2-D synthetic m = 4");
    for (size_t i = 0; i < M.c.size(); ++i) {
      double ref = M.alphas[i] == MultiIndex{3, 1} ? 0.1 : 0.2;
      syn = std::max(syn, std::fabs(M.c[i] / ref - 1));
    }
  }
  o.require(syn <= 0.01, "synthetic coefficients within 1%");
  o.note("PDE c/eps - 1 = " + fmt("%.4f", rel) + ", synthetic max rel " + fmt("%.1e", syn));
  return o;
}

// ---------------------------------------------------------------- 9

Outcome profiles() {
  Outcome o;
  double worst = 0;
  for (double p : {1.5, 2.0, 3.0, 5.0})
    for (int n : {1, 2}) {
      if ((n - 2) * p >= n + 2) continue;
      auto P = zero(n, p);
      auto pts = ball_lattice(n, 4.0);
      for (int l = 1; l <= n; ++l) worst = std::max(worst, residual_G(ProfileSpec::quadratic_f(P, l), pts));
      std::vector<MultiIndex> a4 = n == 1 ? std::vector<MultiIndex>{MultiIndex{4}}
                                          : std::vector<MultiIndex>{MultiIndex{4, 0}, MultiIndex{2, 2}, MultiIndex{0, 4}};
      std::vector<double> c4 = n == 1 ? std::vector<double>{0.1} : std::vector<double>{0.1, 0.05, 0.2};
      worst = std::max(worst, residual_G(ProfileSpec::higher_psi(P, 4, a4, c4), pts));
      std::vector<MultiIndex> a6 = n == 1 ? std::vector<MultiIndex>{MultiIndex{6}} : std::vector<MultiIndex>{MultiIndex{6, 0}, MultiIndex{0, 6}};
      std::vector<double> c6(a6.size(), 0.01);
      worst = std::max(worst, residual_G(ProfileSpec::higher_psi(P, 6, a6, c6), pts));
    }
  o.require(worst <= 1e-12, "residual_G <= 1e-12");

  const auto& c = case_ii();
  std::vector<Field> snaps;
  for (const auto& F : c.trace.snapshots)
    if (F.time >= 1) snaps.push_back(F);
  ConvergenceOptions co;
  co.fit_from = 5;
  auto C = extended_convergence(snaps, ProfileSpec::quadratic_f(c.P, c.P.n), 1.4, co);
  o.require(C.monotone_from && *C.monotone_from <= 5, "monotone decrease after the transient (s <= 5)");
  o.require(C.fit.has_value(), "rate fit available");
  if (C.fit) {
    double order_gap = std::fabs(C.fit->measured_order / C.fit->model_order - 1);
    o.require(C.fit->rel_residual <= 0.25, "two-rate model misfit within 25%");
    o.require(order_gap <= 0.25, "measured decay order within 25% of the model");
    o.note("residual_G " + fmt("%.1e", worst) + "; error " + fmt("%.4f", C.sup_error.front()) + " -> " +
           fmt("%.4f", C.sup_error.back()) + ", monotone from s = " + fmt("%.2f", *C.monotone_from) + ", c1 = " +
           fmt("%.4f", C.fit->c1) + ", c2 = " + fmt("%.4f", C.fit->c2) + ", misfit " + fmt("%.3f", C.fit->rel_residual) +
           ", order " + fmt("%.3f", C.fit->measured_order) + " vs " + fmt("%.3f", C.fit->model_order));
  }
  return o;
}

// ---------------------------------------------------------------- 10

Outcome alpha() {
  Outcome o;
  const double sb = 20, se = 1e4;
  int global = 0, runs = 0;
  double worst = 0;
  for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    std::vector<double> starts{-2 / sb, -1 / sb, -0.5 / sb, small_order_seed(3, c, sb, se)};
    for (double a0 : starts) {
      ++runs;
      try {
        auto R = alpha_dichotomy(3, c, a0, sb, se);
        ++global;
        o.require(R.branch != AlphaBranch::Inconclusive, "classified run");
        worst = std::max(worst, R.fit_residual);
      } catch (const BlowupBranch&) {
      }
    }
  }
  o.require(runs == 20, "20 runs");
  o.require(worst < 0.10, "fit residual < 10%");
  auto E = alpha_dichotomy(3, 0.0, -1 / sb, sb, se);
  double exact = 0;
  for (size_t i = 0; i < E.s.size(); ++i) exact = std::max(exact, std::fabs(E.s[i] * E.alpha[i] + 1));
  o.require(exact <= 1e-9, "alpha = -1/s to integrator tolerance");
  o.note(std::to_string(global) + "/" + std::to_string(runs) + " global, max residual " + fmt("%.1e", worst) +
         ", max |s alpha + 1| " + fmt("%.1e", exact));
  return o;
}

// ---------------------------------------------------------------- 11

Outcome bounds() {
  Outcome o;
  double worst_ratio = 0;
  for (double mu : {1.0, -1.0})
    for (double p : {1.5, 2.0, 3.0}) {
      auto P = logd(p, mu);
      // denser than the derivation grid, same box
      double r = check_perturbation_bound(P, symmetric_grid(P.sweep.w_max, 1201),
                                          logspace(P.s0, P.sweep.s_max, 1200));
      worst_ratio = std::max(worst_ratio, r / P.C0);
      o.require(check_growth_bound(P, logspace(1e-3, 1e6, 2000)) <= P.M, "growth bound <= M");
    }
  o.require(worst_ratio <= 1.0, "perturbation ratio <= C0");

  // Fbar constants: coarse derivation sweep with 10% inflation, then a dense check
  double worst_fbar = 0;
  for (double p : {2.0, 3.0}) {
    auto P = logd(p);
    auto phi = solve_phi(P, 19, 1001);
    auto sweep = [&](int nv, int ns) {
      FbarRatios m;
      for (double s : logspace(20, 1000, ns)) {
        auto r = check_Fbar_bound(symmetric_grid(0.3, nv), P, s, phi.at(s), 1.0);
        m.quadratic = std::max(m.quadratic, r.quadratic);
        m.expansion = std::max(m.expansion, r.expansion);
      }
      return m;
    };
    auto derived = sweep(101, 20), dense = sweep(801, 120);
    worst_fbar = std::max({worst_fbar, dense.quadratic / (1.1 * derived.quadratic), dense.expansion / (1.1 * derived.expansion)});
  }
  o.require(worst_fbar <= 1.0, "Fbar ratios within derived constants");

  auto Z = zero(1, 2);
  double ident = 0;
  for (double v : linspace(-0.5, 0.5, 1001)) ident = std::max(ident, std::fabs(Fbar(v, Z, 10.0, 1.0, 1.0) - v * v));
  auto R = check_Fbar_bound(linspace(-0.5, 0.5, 1001), Z, 10.0, 1.0, 1.0);
  o.require(ident <= 4 * DBL_EPSILON, "Fbar = v^2 to round-off");
  o.note("max ratio/C0 " + fmt("%.4f", worst_ratio) + ", Fbar dense/derived " + fmt("%.4f", worst_fbar) +
         ", |Fbar - v^2| " + fmt("%.1e", ident) + ", expansion residual " + fmt("%.1e", R.expansion));
  return o;
}

}  // namespace

// optional arguments select criteria by number
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ODE blow-up rate", ode_rate},
      {"phi series", phi_series},
      {"Hermite suite", hermite_suite},
      {"Lyapunov decrease", lyapunov},
      {"blow-up criterion", criterion_sweep},
      {"PDE blow-up rate", pde_rate},
      {"case ii law", case_ii_law},
      {"case iii recovery", case_iii},
      {"profile identities", profiles},
      {"alpha dichotomy", alpha},
      {"perturbation and Fbar bounds", bounds},
  };
  int failed = 0, k = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    ++k;
    if (!only.empty() && std::find(only.begin(), only.end(), k) == only.end()) continue;
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.pass;
    ++ran;
    std::printf("%s %2d %s: %s\n", r.pass ? "PASS" : "FAIL", k, name.c_str(), r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
