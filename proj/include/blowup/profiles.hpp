#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blowup/hermite.hpp"
#include "blowup/params.hpp"
#include "blowup/pde.hpp"

namespace blowup {

enum class ProfileKind { QuadraticF, HigherPsi };

struct ProfileSpec {
  ProfileKind kind = ProfileKind::QuadraticF;
  int n = 1;
  double p = 2, a = 2, kappa = 1;
  int l = 1;                      // QuadraticF
  int m = 0;                      // HigherPsi
  std::vector<MultiIndex> alphas;
  std::vector<double> c;

  static ProfileSpec quadratic_f(const ProblemParams& P, int l) {
    if (l < 1 || l > P.n) throw InvalidArgument("f_l needs 1 <= l <= n");
    ProfileSpec S;
    S.kind = ProfileKind::QuadraticF;
    S.n = P.n;
    S.p = P.p;
    S.a = P.a;
    S.kappa = P.kappa;
    S.l = l;
    return S;
  }

  static ProfileSpec higher_psi(const ProblemParams& P, int m, std::vector<MultiIndex> alphas, std::vector<double> c) {
    if (m < 4 || m % 2 != 0) throw InvalidArgument("psi_m needs an even m >= 4");
    if (alphas.size() != c.size()) throw InvalidArgument("psi_m: one coefficient per multi-index");
    for (const auto& al : alphas)
      if (al.total() != m || al.dim() != P.n) throw InvalidArgument("psi_m: multi-indices must have |alpha| = m");
    ProfileSpec S;
    S.kind = ProfileKind::HigherPsi;
    S.n = P.n;
    S.p = P.p;
    S.a = P.a;
    S.kappa = P.kappa;
    S.m = m;
    S.alphas = std::move(alphas);
    S.c = std::move(c);
    return S;
  }

  double order() const { return kind == ProfileKind::QuadraticF ? 2.0 : double(m); }
};

namespace detail {

// bracket B(xi) and its gradient; the profile is kappa B^{-1/(p-1)}
inline double profile_bracket(const ProfileSpec& S, const std::vector<double>& xi, std::vector<double>* grad) {
  if (static_cast<int>(xi.size()) != S.n) throw InvalidArgument("profile: dimension mismatch");
  if (grad) grad->assign(S.n, 0.0);
  if (S.kind == ProfileKind::QuadraticF) {
    double k = (S.p - 1) / (4 * S.p), B = 1;
    for (int j = 0; j < S.l; ++j) {
      B += k * xi[j] * xi[j];
      if (grad) (*grad)[j] = 2 * k * xi[j];
    }
    return B;
  }
  double kp = std::pow(S.kappa, -S.p), B = 1;
  for (size_t t = 0; t < S.alphas.size(); ++t) {
    const auto& al = S.alphas[t];
    double mono = 1;
    for (int j = 0; j < S.n; ++j) mono *= std::pow(xi[j], al[j]);
    B += kp * S.c[t] * mono;
    if (grad)
      for (int i = 0; i < S.n; ++i) {
        if (al[i] == 0) continue;
        double d = al[i];
        for (int j = 0; j < S.n; ++j) d *= std::pow(xi[j], j == i ? al[j] - 1 : al[j]);
        (*grad)[i] += kp * S.c[t] * d;
      }
  }
  return B;
}

}  // namespace detail

inline double eval_profile(const ProfileSpec& S, const std::vector<double>& xi) {
  double B = detail::profile_bracket(S, xi, nullptr);
  if (!(B > 0)) throw InvalidArgument("profile bracket is not positive at this point");
  return S.kappa * std::pow(B, -1 / (S.p - 1));
}

inline std::vector<double> profile_gradient(const ProfileSpec& S, const std::vector<double>& xi) {
  std::vector<double> g;
  double B = detail::profile_bracket(S, xi, &g);
  if (!(B > 0)) throw InvalidArgument("profile bracket is not positive at this point");
  double f = -S.kappa / (S.p - 1) * std::pow(B, -1 / (S.p - 1) - 1);
  for (double& v : g) v *= f;
  return g;
}

// max |-(xi/m).grad G + G^p - G/(p-1)|, m = 2 for f_l
inline double residual_G(const ProfileSpec& S, const std::vector<std::vector<double>>& points) {
  double r = 0, m = S.order();
  for (const auto& xi : points) {
    double G = eval_profile(S, xi);
    auto g = profile_gradient(S, xi);
    double drift = 0;
    for (int j = 0; j < S.n; ++j) drift += xi[j] * g[j];
    r = std::max(r, std::fabs(-drift / m + std::pow(G, S.p) - G / (S.p - 1)));
  }
  return r;
}

// lattice of points in the ball |xi| <= K0, side^n points of the cube kept
inline std::vector<std::vector<double>> ball_lattice(int n, double K0, int side = 64) {
  std::vector<std::vector<double>> pts;
  auto ax = linspace(-K0, K0, side);
  if (n == 1) {
    for (double x : ax) pts.push_back({x});
  } else {
    for (double x : ax)
      for (double y : ax)
        if (x * x + y * y <= K0 * K0 * (1 + 1e-12)) pts.push_back({x, y});
  }
  return pts;
}

struct ProfileRateFit {
  double c1 = 0, c2 = 0;       // error ~ c1 s^{1-a} + c2 log s / s
  double rel_residual = NAN;   // relative RMS misfit
  double measured_order = NAN; // -d log e / d log s over the fit range
  double model_order = NAN;    // same quantity for the fitted model
};

struct ErrorCurve {
  std::vector<double> s, sup_error;
  std::optional<double> monotone_from;  // first s after which the error never increases
  std::optional<ProfileRateFit> fit;
};

inline double profile_scale(const ProfileSpec& S, double s) {
  return S.kind == ProfileKind::QuadraticF ? std::sqrt(s) : std::exp((0.5 - 1.0 / S.m) * s);
}

// nonnegative least squares for two columns by enumerating the active set
inline ProfileRateFit fit_rates(const std::vector<double>& s, const std::vector<double>& e, double a) {
  const size_t N = s.size();
  Eigen::MatrixXd A(N, 2);
  Eigen::VectorXd y(N);
  for (size_t i = 0; i < N; ++i) {
    A(i, 0) = std::pow(s[i], 1 - a);
    A(i, 1) = std::log(s[i]) / s[i];
    y(i) = e[i];
  }
  double best = INFINITY;
  Eigen::Vector2d cbest(0, 0);
  auto consider = [&](const Eigen::Vector2d& c) {
    if (c(0) < 0 || c(1) < 0) return;
    double r = (A * c - y).squaredNorm();
    if (r < best) {
      best = r;
      cbest = c;
    }
  };
  consider(A.colPivHouseholderQr().solve(y));
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d c(0, 0);
    double den = A.col(j).squaredNorm();
    if (den > 0) c(j) = std::max(0.0, A.col(j).dot(y) / den);
    consider(c);
  }
  ProfileRateFit F;
  F.c1 = cbest(0);
  F.c2 = cbest(1);
  F.rel_residual = std::sqrt(best / y.squaredNorm());
  auto model = [&](double t) { return F.c1 * std::pow(t, 1 - a) + F.c2 * std::log(t) / t; };
  double l0 = std::log(s.front()), l1 = std::log(s.back());
  F.measured_order = -(std::log(e.back()) - std::log(e.front())) / (l1 - l0);
  F.model_order = -(std::log(model(s.back())) - std::log(model(s.front()))) / (l1 - l0);
  return F;
}

struct ConvergenceOptions {
  int lattice = 64;
  bool fit = true;
  double fit_from = 0;  // fit only s >= fit_from (after the transient)
};

inline ErrorCurve extended_convergence(const std::vector<Field>& snaps, const ProfileSpec& S, double K0,
                                       const ConvergenceOptions& o = {}) {
  if (snaps.empty()) throw InvalidArgument("extended_convergence needs snapshots");
  ErrorCurve C;
  auto pts = ball_lattice(S.n, K0, o.lattice);
  // coverage: K0 * scale(s) must stay inside the grid
  double max_s = -INFINITY;
  bool covered = true;
  for (const auto& F : snaps) {
    if (F.frame != Frame::Similarity || F.grid.dim != S.n) throw InvalidArgument("extended_convergence: bad snapshot");
    if (K0 * profile_scale(S, F.time) > F.grid.L) covered = false;
    else max_s = std::max(max_s, F.time);
  }
  if (!covered)
    throw InvalidArgument("grid does not cover |y| <= K0 scale(s); maximal usable s = " + std::to_string(max_s));
  for (const auto& F : snaps) {
    double sc = profile_scale(S, F.time), err = 0;
    for (const auto& xi : pts) {
      std::vector<double> y(xi);
      for (double& v : y) v *= sc;
      err = std::max(err, std::fabs(interpolate(F, y) - eval_profile(S, xi)));
    }
    C.s.push_back(F.time);
    C.sup_error.push_back(err);
  }
  size_t k = C.s.size() - 1;
  while (k > 0 && C.sup_error[k - 1] >= C.sup_error[k]) --k;
  C.monotone_from = C.s[k];
  if (o.fit && S.kind == ProfileKind::QuadraticF) {
    std::vector<double> ss, ee;
    for (size_t i = 0; i < C.s.size(); ++i)
      if (C.s[i] >= std::max(o.fit_from, 1.0 + 1e-12) && C.sup_error[i] > 0) {
        ss.push_back(C.s[i]);
        ee.push_back(C.sup_error[i]);
      }
    if (ss.size() >= 3) C.fit = fit_rates(ss, ee, S.a);
  }
  return C;
}

}  // namespace blowup
