#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "blowup/params.hpp"

namespace blowup {

namespace odeint = boost::numeric::odeint;

struct RateFit {
  double C = 0.0;
  double exponent = 0.0;
};

struct OdeSolution {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> slopes;  // dv/dt at times, when available
  std::vector<double> remaining;  // T - t, accumulated from step sizes
  std::optional<double> blowup_time;
  std::optional<RateFit> rate_fit;

  bool empty() const { return times.empty(); }
  double front_time() const { return times.front(); }
  double back_time() const { return times.back(); }

  // cubic Hermite when slopes are present, linear otherwise
  double at(double t) const {
    if (times.empty()) throw InvalidArgument("empty solution");
    if (t < times.front() || t > times.back()) throw InvalidArgument("evaluation time outside the trajectory");
    size_t k = std::upper_bound(times.begin(), times.end(), t) - times.begin();
    if (k == 0) k = 1;
    if (k >= times.size()) k = times.size() - 1;
    double t0 = times[k - 1], t1 = times[k], h = t1 - t0, x = (t - t0) / h;
    if (slopes.size() != times.size())
      return values[k - 1] + x * (values[k] - values[k - 1]);
    double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
    double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
    return h00 * values[k - 1] + h10 * h * slopes[k - 1] + h01 * values[k] + h11 * h * slopes[k];
  }
};

struct LinearFit {
  double slope = 0.0, intercept = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n < 2 || y.size() != n) throw InvalidArgument("line fit needs at least two points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

// ---------------------------------------------------------------- v' = v^p + h(v)

struct BlowupOdeOptions {
  double v_stop = 1e8;
  double rtol = 1e-10;
  double horizon = 1e6;
  double rate_floor = 1e4;  // rate_fit uses v >= rate_floor
  long max_steps = 2000000;
};

inline double blowup_rhs(const ProblemParams& P, double v) {
  return std::pow(std::fabs(v), P.p - 1) * v + P.h(v);
}

// T from the last two points of v^{1-p}, linear in t near T
inline double extrapolate_blowup_time(const std::vector<double>& t, const std::vector<double>& v, double p) {
  size_t n = t.size();
  if (n < 2) throw InvalidArgument("need two points to extrapolate");
  double g1 = std::pow(v[n - 1], 1 - p), g0 = std::pow(v[n - 2], 1 - p);
  double slope = (g1 - g0) / (t[n - 1] - t[n - 2]);
  if (!(slope < 0)) throw InvalidArgument("v^{1-p} is not decreasing at the end of the run");
  return t[n - 1] - g1 / slope;
}

inline OdeSolution solve_blowup_ode(const ProblemParams& P, double v0, double t0, const BlowupOdeOptions& o = {}) {
  if (!(v0 > 0)) throw InvalidArgument("v0 must be positive");
  using State = std::array<double, 1>;
  auto sys = [&](const State& x, State& dx, double) { dx[0] = blowup_rhs(P, x[0]); };
  auto stepper = odeint::make_controlled(0.0, o.rtol, odeint::runge_kutta_dopri5<State>());

  OdeSolution sol;
  State x{v0};
  double t = t0;
  double f0 = std::fabs(blowup_rhs(P, v0));
  double dt = std::min(1e-3, 1e-3 * v0 / std::max(f0, 1e-300));
  sol.times.push_back(t);
  sol.values.push_back(v0);
  std::vector<double> taken{0.0};
  long steps = 0;
  while (x[0] < o.v_stop && t - t0 < o.horizon && steps < o.max_steps) {
    if (!std::isfinite(x[0]) || x[0] <= 0) break;
    double attempt = dt;
    if (odeint::controlled_step_result::success == stepper.try_step(sys, x, t, dt)) {
      ++steps;
      sol.times.push_back(t);
      sol.values.push_back(x[0]);
      taken.push_back(attempt);
    }
    if (dt < 1e-300) break;
  }
  sol.slopes.resize(sol.times.size());
  for (size_t i = 0; i < sol.times.size(); ++i) sol.slopes[i] = blowup_rhs(P, sol.values[i]);

  const size_t n = sol.times.size();
  if (sol.values.back() < o.v_stop || n < 3) return sol;
  // near T the absolute times lose all digits of T - t, step sizes do not
  double g1 = std::pow(sol.values[n - 1], 1 - P.p), g0 = std::pow(sol.values[n - 2], 1 - P.p);
  double slope = (g1 - g0) / taken[n - 1];
  if (!(slope < 0)) return sol;
  sol.remaining.assign(n, 0.0);
  sol.remaining[n - 1] = -g1 / slope;
  for (size_t i = n - 1; i-- > 0;) sol.remaining[i] = sol.remaining[i + 1] + taken[i + 1];
  sol.blowup_time = sol.times[n - 1] + sol.remaining[n - 1];
  std::vector<double> lx, ly;
  for (size_t i = 0; i < n; ++i)
    if (sol.values[i] >= o.rate_floor) {
      lx.push_back(-std::log(sol.remaining[i]));
      ly.push_back(std::log(sol.values[i]));
    }
  if (lx.size() >= 2) {
    auto f = fit_line(lx, ly);
    sol.rate_fit = RateFit{std::exp(f.intercept), f.slope};
  }
  return sol;
}

// (T-t)^{1/(p-1)} v(t) along the trajectory
inline std::vector<double> rate_constants(const OdeSolution& s, double p) {
  std::vector<double> r;
  if (!s.blowup_time) return r;
  for (size_t i = 0; i < s.times.size(); ++i) r.push_back(std::pow(s.remaining[i], 1.0 / (p - 1)) * s.values[i]);
  return r;
}

// ---------------------------------------------------------------- phi

struct PhiSeries {
  double a = 0.0;
  double C0_series = 0.0;
  std::vector<double> b;  // b_1..b_K
  int K = 0;
};

inline PhiSeries make_phi_series(const ProblemParams& P, int K) {
  if (K < 0) throw InvalidArgument("K must be nonnegative");
  PhiSeries S;
  S.a = P.a;
  S.K = K;
  S.C0_series = P.kind() == PerturbationKind::LogDamped ? P.mu * std::pow((P.p - 1) / 2.0, P.a) : 0.0;
  double prod = 1.0;
  for (int j = 1; j <= K; ++j) {
    prod *= -(P.a + j - 1);
    S.b.push_back(prod);
  }
  return S;
}

inline double phi_series_eta(const ProblemParams& P, double s, int K) {
  if (P.unperturbed()) return 0.0;
  if (P.kind() != PerturbationKind::LogDamped)
    throw InvalidArgument("the phi series is only available for the log-damped perturbation");
  if (!(s > 0)) throw InvalidArgument("series needs s > 0");
  auto S = make_phi_series(P, K);
  double sum = 1.0, prev = 1.0;
  for (int j = 1; j <= K; ++j) {
    double term = S.b[j - 1] / std::pow(s, j);
    if (std::fabs(term) >= std::fabs(prev))
      throw InvalidArgument("phi series diverges at s = " + std::to_string(s) + " with K = " + std::to_string(K));
    sum += term;
    prev = term;
  }
  return S.C0_series / std::pow(s, P.a) * sum;
}

inline double eval_phi_series(const ProblemParams& P, double s, int K = 3) {
  if (P.unperturbed()) return P.kappa;
  double eta = phi_series_eta(P, s, K);
  return P.kappa * std::pow(1.0 + eta, -1.0 / (P.p - 1));
}

inline double phi_rhs(const ProblemParams& P, double s, double phi) {
  return -phi / (P.p - 1) + std::pow(std::fabs(phi), P.p - 1) * phi + P.scaled_h(0, s, phi);
}

struct PhiOptions {
  double anchor_gap = 30.0;  // series anchor at s_end + anchor_gap
  double sample_ds = 0.05;
  double rtol = 1e-11;
  int K = 3;
};

// Anchor value at large s. Log-damped: truncated series. Other kinds:
// eta(s) = int_0^inf e^{-u} kappa^{-p} g(s+u, kappa) du.
inline double phi_anchor(const ProblemParams& P, double s, int K) {
  if (P.unperturbed()) return P.kappa;
  if (P.kind() == PerturbationKind::LogDamped) return eval_phi_series(P, s, K);
  auto f = [&](double u) { return std::exp(-u) * P.scaled_h(0, s + u, P.kappa) / std::pow(P.kappa, P.p); };
  double eta = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 60.0, 10, 1e-13);
  return P.kappa * std::pow(1.0 + eta, -1.0 / (P.p - 1));
}

// Integrates backward from the anchor; forward integration of this ODE
// amplifies errors like e^{s}.
inline OdeSolution solve_phi(const ProblemParams& P, double s_start, double s_end, const PhiOptions& o = {}) {
  if (!(s_start >= P.s0)) throw InvalidArgument("s_start must be at least s0");
  if (!(s_end > s_start)) throw InvalidArgument("s_end must exceed s_start");
  OdeSolution sol;
  int m = std::max(2, static_cast<int>(std::ceil((s_end - s_start) / o.sample_ds)) + 1);
  sol.times = linspace(s_start, s_end, m);
  if (P.unperturbed()) {
    sol.values.assign(m, P.kappa);
    sol.slopes.assign(m, 0.0);
    return sol;
  }
  double s_anchor = s_end + o.anchor_gap;
  using State = std::array<double, 1>;
  // sigma = -s
  auto sys = [&](const State& x, State& dx, double sigma) { dx[0] = -phi_rhs(P, -sigma, x[0]); };
  std::vector<double> sigmas;
  sigmas.push_back(-s_anchor);
  for (int i = m - 1; i >= 0; --i) sigmas.push_back(-sol.times[i]);
  State x{phi_anchor(P, s_anchor, o.K)};
  std::vector<double> out;
  auto obs = [&](const State& y, double) { out.push_back(y[0]); };
  odeint::integrate_times(odeint::make_dense_output(1e-14, o.rtol, odeint::runge_kutta_dopri5<State>()), sys, x,
                          sigmas.begin(), sigmas.end(), 0.01, obs);
  if (out.size() != sigmas.size()) throw std::runtime_error("phi integration stopped early");
  sol.values.resize(m);
  sol.slopes.resize(m);
  for (int i = 0; i < m; ++i) {
    sol.values[i] = out[m - i];
    sol.slopes[i] = phi_rhs(P, sol.times[i], sol.values[i]);
  }
  return sol;
}

// Forward integration of the phi ODE from (s0, phi0); short spans only.
inline double integrate_phi_forward(const ProblemParams& P, double s0, double phi0, double s1, double rtol = 1e-12) {
  using State = std::array<double, 1>;
  auto sys = [&](const State& x, State& dx, double s) { dx[0] = phi_rhs(P, s, x[0]); };
  State x{phi0};
  odeint::integrate_adaptive(odeint::make_controlled(1e-15, rtol, odeint::runge_kutta_dopri5<State>()), sys, x, s0,
                             s1, 1e-3);
  return x[0];
}

// ---------------------------------------------------------------- alpha' = alpha^2 + c s^{-q}

enum class AlphaBranch { MinusOneOverS, SmallOrder, Inconclusive };

inline const char* to_string(AlphaBranch b) {
  switch (b) {
    case AlphaBranch::MinusOneOverS: return "MinusOneOverS";
    case AlphaBranch::SmallOrder: return "SmallOrder";
    case AlphaBranch::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct BlowupBranch : std::runtime_error {
  double s_blowup;
  explicit BlowupBranch(double s)
      : std::runtime_error("alpha blows up in finite time near s = " + std::to_string(s)), s_blowup(s) {}
};

struct AlphaOptions {
  double rtol = 1e-11;
  double slope_tol = 0.1;  // |s alpha + 1| at the end
  double growth_limit = 4.0;  // bounded-order test
  int samples = 400;
};

struct AlphaResult {
  AlphaBranch branch = AlphaBranch::Inconclusive;
  std::vector<double> s, alpha;
  double s_alpha_end = 0.0;
  double fit_residual = 0.0;
  std::vector<double> fit_coeffs;
  double growth_ratio = 0.0;
};

inline double alpha_forcing(double c, double q, double s) { return c * std::pow(s, -q); }

// alpha at s_to from (s_from, alpha_from), either direction
inline double integrate_alpha(double q, double c, double alpha_from, double s_from, double s_to, double rtol = 1e-12) {
  using State = std::array<double, 1>;
  double dir = s_to >= s_from ? 1.0 : -1.0;
  auto sys = [&](const State& x, State& dx, double u) {
    double s = dir * u;
    dx[0] = dir * (x[0] * x[0] + alpha_forcing(c, q, s));
  };
  State x{alpha_from};
  odeint::integrate_adaptive(odeint::make_controlled(1e-18, rtol, odeint::runge_kutta_dopri5<State>()), sys, x,
                             dir * s_from, dir * s_to, 1e-3 * std::fabs(s_to - s_from));
  return x[0];
}

// Initial value of the O(s^{1-q}) solution: backward integration from s_end
// seeded with the leading-order tail -c s^{1-q}/(q-1).
inline double small_order_seed(double q, double c, double s_begin, double s_end) {
  double tail = -c / ((q - 1) * std::pow(s_end, q - 1));
  return integrate_alpha(q, c, tail, s_end, s_begin);
}

inline std::vector<double> least_squares(const std::vector<std::vector<double>>& cols, const std::vector<double>& y) {
  const size_t n = y.size(), k = cols.size();
  Eigen::MatrixXd A(n, k);
  Eigen::VectorXd b(n);
  for (size_t i = 0; i < n; ++i) {
    b(i) = y[i];
    for (size_t j = 0; j < k; ++j) A(i, j) = cols[j][i];
  }
  Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  return std::vector<double>(x.data(), x.data() + k);
}

inline AlphaResult alpha_dichotomy(double q, double c, double alpha0, double s_begin, double s_end,
                                   const AlphaOptions& o = {}) {
  if (!(q > 2 && q <= 3)) throw InvalidArgument("q must lie in (2, 3]");
  if (!(s_begin > 0 && s_end > s_begin)) throw InvalidArgument("need 0 < s_begin < s_end");
  AlphaResult R;
  using State = std::array<double, 1>;
  auto sys = [&](const State& x, State& dx, double s) { dx[0] = x[0] * x[0] + alpha_forcing(c, q, s); };
  R.s = logspace(s_begin, s_end, o.samples);
  State x{alpha0};
  double last = s_begin;
  auto obs = [&](const State& y, double s) {
    if (!std::isfinite(y[0]) || y[0] > 1e6) throw BlowupBranch(s);
    R.alpha.push_back(y[0]);
    last = s;
  };
  try {
    odeint::integrate_times(odeint::make_dense_output(1e-18, o.rtol, odeint::runge_kutta_dopri5<State>()), sys, x,
                            R.s.begin(), R.s.end(), 1e-4, obs);
  } catch (const odeint::odeint_error&) {
    throw BlowupBranch(last);
  }
  // a positive alpha with alpha * (s_end - s) > 1 cannot survive alpha' >= alpha^2 - |c| s^{-q}
  double ae = R.alpha.back();
  if (ae > 0 && ae * s_end > 1.0 + std::fabs(c) * std::pow(s_end, 1 - q)) throw BlowupBranch(s_end + 1.0 / ae);

  size_t w0 = R.s.size() / 2;
  std::vector<double> ws(R.s.begin() + w0, R.s.end()), wa(R.alpha.begin() + w0, R.alpha.end());
  R.s_alpha_end = s_end * ae;
  double m = std::min(q, 2.0);
  auto scaled = [&](size_t i) { return std::fabs(wa[i]) * std::pow(ws[i], m); };
  double first = 0, second = 0;
  for (size_t i = 0; i < ws.size(); ++i) {
    double& slot = i < ws.size() / 2 ? first : second;
    slot = std::max(slot, scaled(i));
  }
  R.growth_ratio = first > 0 ? second / first : (second > 0 ? INFINITY : 0.0);

  double norm = 0;
  for (double v : wa) norm += v * v;
  norm = std::sqrt(norm / wa.size());
  auto residual = [&](const std::vector<double>& model) {
    double e = 0;
    for (size_t i = 0; i < wa.size(); ++i) e += (wa[i] - model[i]) * (wa[i] - model[i]);
    e = std::sqrt(e / wa.size());
    return norm > 0 ? e / norm : e;
  };

  if (std::fabs(R.s_alpha_end + 1.0) <= o.slope_tol) {
    std::vector<double> y(ws.size()), c1(ws.size()), c2(ws.size());
    for (size_t i = 0; i < ws.size(); ++i) {
      y[i] = wa[i] + 1.0 / ws[i];
      c1[i] = std::log(ws[i]) / (ws[i] * ws[i]);
      c2[i] = 1.0 / (ws[i] * ws[i]);
    }
    R.fit_coeffs = least_squares({c1, c2}, y);
    std::vector<double> model(ws.size());
    for (size_t i = 0; i < ws.size(); ++i) model[i] = -1.0 / ws[i] + R.fit_coeffs[0] * c1[i] + R.fit_coeffs[1] * c2[i];
    R.fit_residual = residual(model);
    R.branch = AlphaBranch::MinusOneOverS;
  } else if (R.growth_ratio <= o.growth_limit) {
    std::vector<double> c1(ws.size()), c2(ws.size());
    for (size_t i = 0; i < ws.size(); ++i) {
      c1[i] = std::pow(ws[i], -m);
      c2[i] = std::pow(ws[i], -m - 1);
    }
    R.fit_coeffs = norm > 0 ? least_squares({c1, c2}, wa) : std::vector<double>{0.0, 0.0};
    std::vector<double> model(ws.size());
    for (size_t i = 0; i < ws.size(); ++i) model[i] = R.fit_coeffs[0] * c1[i] + R.fit_coeffs[1] * c2[i];
    R.fit_residual = residual(model);
    R.branch = AlphaBranch::SmallOrder;
  }
  return R;
}

}  // namespace blowup
