#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace blowup {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class PerturbationKind { Zero, LogDamped, PowerSub, Custom };

inline const char* to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::Zero: return "zero";
    case PerturbationKind::LogDamped: return "log_damped";
    case PerturbationKind::PowerSub: return "power_sub";
    case PerturbationKind::Custom: return "custom";
  }
  return "?";
}

inline PerturbationKind perturbation_kind_from_string(const std::string& s) {
  if (s == "zero") return PerturbationKind::Zero;
  if (s == "log_damped") return PerturbationKind::LogDamped;
  if (s == "power_sub") return PerturbationKind::PowerSub;
  if (s == "custom") return PerturbationKind::Custom;
  throw InvalidArgument("unknown perturbation kind '" + s + "'");
}

// User-supplied h. Scaled evaluation goes through z = e^{s/(p-1)} w directly,
// so large s may overflow for these.
struct CustomPerturbation {
  std::function<double(double)> h, dh, d2h, H;
  double C0 = 0.0;
  double s0 = 1.0;
};

struct Perturbation {
  PerturbationKind kind = PerturbationKind::Zero;
  double q = 0.0;  // PowerSub exponent
  std::shared_ptr<const CustomPerturbation> custom;

  static Perturbation zero() { return {}; }
  static Perturbation log_damped() { return {PerturbationKind::LogDamped, 0.0, nullptr}; }
  static Perturbation power_sub(double q) { return {PerturbationKind::PowerSub, q, nullptr}; }
  static Perturbation from_custom(CustomPerturbation c) {
    return {PerturbationKind::Custom, 0.0, std::make_shared<const CustomPerturbation>(std::move(c))};
  }
};

// Sampling grid used to fix C0. |w| <= w_max, s in [s0, s_max].
struct BoundSweep {
  double w_max = 10.0;
  double s_max = 1e3;
  int points = 400;
  double inflation = 1.1;
};

namespace detail {

inline double sgn(double x) { return (x > 0) - (x < 0); }

// log(2 + z^2) and z^2/(2+z^2) given t = log z^2
inline void log_terms(double t, double& L, double& r) {
  if (t > 0) {
    double e = std::exp(-t);
    L = t + std::log1p(2.0 * e);
    r = 1.0 / (1.0 + 2.0 * e);
  } else {
    double e = std::exp(t);
    L = std::log(2.0) + std::log1p(0.5 * e);
    r = e / (2.0 + e);
  }
}

}  // namespace detail

class ProblemParams {
 public:
  int n = 1;
  double p = 2.0;
  double a = 2.0;
  double M = 10.0;
  double mu = 1.0;
  double kappa = 1.0;
  double gamma = 0.0;
  double theta = 0.0;
  double C0 = 0.0;
  double s0 = 1.0;
  Perturbation perturbation;
  BoundSweep sweep;

  PerturbationKind kind() const { return perturbation.kind; }
  bool unperturbed() const { return perturbation.kind == PerturbationKind::Zero; }

  // h^{(j)}(z), j = 0, 1, 2
  double h(double z, int j = 0) const { return scaled_h(j, 0.0, z); }
  double H(double z) const { return scaled_H(0.0, z); }

  // e^{-(p-j)s/(p-1)} h^{(j)}(e^{s/(p-1)} w)
  double scaled_h(int j, double s, double w) const {
    switch (perturbation.kind) {
      case PerturbationKind::Zero: return 0.0;
      case PerturbationKind::LogDamped: return log_damped(j, s, w);
      case PerturbationKind::PowerSub: return power_sub(j, s, w);
      case PerturbationKind::Custom: {
        const auto& c = *perturbation.custom;
        double z = std::exp(s / (p - 1)) * w;
        double f = std::exp(-(p - j) * s / (p - 1));
        const auto& fn = j == 0 ? c.h : j == 1 ? c.dh : c.d2h;
        return f * fn(z);
      }
    }
    return 0.0;
  }

  // e^{-(p+1)s/(p-1)} H(e^{s/(p-1)} w)
  double scaled_H(double s, double w) const {
    switch (perturbation.kind) {
      case PerturbationKind::Zero: return 0.0;
      case PerturbationKind::LogDamped: {
        if (w == 0.0) return 0.0;
        double base = 2.0 * s / (p - 1) + 2.0 * std::log(std::fabs(w));
        // int_0^1 u^p L^{-a} du with u = e^{-t}
        auto f = [&](double t) {
          double L, r;
          detail::log_terms(base - 2.0 * t, L, r);
          return std::exp(-(p + 1) * t) * std::pow(L, -a);
        };
        double I = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 40.0 / (p + 1), 10, 1e-13);
        return mu * std::pow(std::fabs(w), p + 1) * I;
      }
      case PerturbationKind::PowerSub: {
        double q = perturbation.q;
        return std::exp(-(p - q) * s / (p - 1)) * detail::sgn(w) * std::pow(std::fabs(w), q + 1) / (q + 1);
      }
      case PerturbationKind::Custom: {
        double z = std::exp(s / (p - 1)) * w;
        return std::exp(-(p + 1) * s / (p - 1)) * perturbation.custom->H(z);
      }
    }
    return 0.0;
  }

 private:
  double log_damped(int j, double s, double w) const {
    if (w == 0.0) return 0.0;
    double aw = std::fabs(w);
    double L, r;
    detail::log_terms(2.0 * s / (p - 1) + 2.0 * std::log(aw), L, r);
    double La = std::pow(L, -a);
    double q = r / L;
    switch (j) {
      case 0: return mu * detail::sgn(w) * std::pow(aw, p) * La;
      case 1: return mu * std::pow(aw, p - 1) * La * (p - 2.0 * a * q);
      default:
        return mu * detail::sgn(w) * std::pow(aw, p - 2) * La *
               (p * (p - 1) - 2.0 * p * a * q - 2.0 * a * q * ((p + 1) - 2.0 * (a + 1) * q - 2.0 * r));
    }
  }

  double power_sub(int j, double s, double w) const {
    double q = perturbation.q;
    double f = std::exp(-(p - q) * s / (p - 1));
    if (w == 0.0) return 0.0;
    double aw = std::fabs(w);
    switch (j) {
      case 0: return f * std::pow(aw, q);
      case 1: return f * q * std::pow(aw, q - 1) * detail::sgn(w);
      default: return f * q * (q - 1) * std::pow(aw, q - 2);
    }
  }
};

inline double kappa_of(double p) { return std::pow(p - 1, -1.0 / (p - 1)); }

inline double gamma_of(double C0, double p) {
  double r = (p + 1) / (p - 1);
  return 8.0 * C0 * r * r;
}

// Smallest s >= 1 (step 0.01) past which log s / s <= p/(a(p-1)) and
// e^{-(p-j)s/(p-1)} <= s^{-a} hold for j = 0, 1 up to s_max.
inline double onset_time(double p, double a, double s_max) {
  auto ok = [&](double s) {
    if (std::log(s) / s > p / (a * (p - 1))) return false;
    for (int j = 0; j <= 1; ++j)
      if (-(p - j) * s / (p - 1) > -a * std::log(s)) return false;
    return true;
  };
  const double ds = 0.01;
  int steps = static_cast<int>(std::ceil((s_max - 1.0) / ds));
  double found = s_max;
  for (int k = steps; k >= 0; --k) {
    double s = 1.0 + k * ds;
    if (!ok(s)) break;
    found = s;
  }
  return found;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return v;
}

inline std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  v.front() = lo;
  if (n > 1) v.back() = hi;
  return v;
}

// sup over the grids of e^{-(p-j)s/(p-1)}|h^{(j)}(e^{s/(p-1)}w)| / (s^{-a}(|w|^{p-j}+1)), j = 0, 1
inline double check_perturbation_bound(const ProblemParams& P, const std::vector<double>& w_grid,
                                       const std::vector<double>& s_grid) {
  if (P.unperturbed()) return 0.0;
  double best = 0.0;
  for (double s : s_grid) {
    double sa = std::pow(s, P.a);
    for (double w : w_grid)
      for (int j = 0; j <= 1; ++j) {
        double num = std::fabs(P.scaled_h(j, s, w));
        double den = std::pow(std::fabs(w), P.p - j) + 1.0;
        best = std::max(best, num * sa / den);
      }
  }
  return best;
}

// sup |h^{(j)}(z)| / (|z|^{p-j}/log^a(2+z^2) + [j<2])
inline double check_growth_bound(const ProblemParams& P, const std::vector<double>& z_grid) {
  double best = 0.0;
  for (double z : z_grid) {
    if (z == 0.0) continue;
    double La = std::pow(std::log(2.0 + z * z), P.a);
    for (int j = 0; j <= 2; ++j) {
      double den = std::pow(std::fabs(z), P.p - j) / La + (j < 2 ? 1.0 : 0.0);
      best = std::max(best, std::fabs(P.h(z, j)) / den);
    }
  }
  return best;
}

// n uniform points plus n geometric points per side down to 1e-8 w_max, sorted
inline std::vector<double> symmetric_grid(double w_max, int n) {
  auto v = linspace(-w_max, w_max, n);
  for (double w : logspace(1e-8 * w_max, w_max, n)) {
    v.push_back(w);
    v.push_back(-w);
  }
  v.push_back(0.0);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline ProblemParams derive_constants(int n, double p, double a, double M, double mu, const Perturbation& pert,
                                      const BoundSweep& sweep = {}, double theta = 0.0) {
  if (n < 1) throw InvalidArgument("n must be a positive integer");
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  if (!((n - 2) * p < n + 2)) throw InvalidArgument("p is outside the subcritical range (n-2)p < n+2");
  if (!(a > 1.0)) throw InvalidArgument("a must exceed 1");
  if (!(M > 0.0)) throw InvalidArgument("M must be positive");
  if (!(theta >= 0.0)) throw InvalidArgument("theta must be nonnegative");
  if (!(sweep.w_max > 0.0) || !(sweep.s_max > 1.0) || sweep.points < 2 || !(sweep.inflation >= 1.0))
    throw InvalidArgument("invalid bound sweep settings");
  if (pert.kind == PerturbationKind::PowerSub && !(pert.q > 1.0 && pert.q < p))
    throw InvalidArgument("power_sub exponent q must lie in (1, p)");
  if (pert.kind == PerturbationKind::Custom && !pert.custom)
    throw InvalidArgument("custom perturbation without evaluators");

  ProblemParams P;
  P.n = n;
  P.p = p;
  P.a = a;
  P.M = M;
  P.mu = mu;
  P.theta = theta;
  P.perturbation = pert;
  P.sweep = sweep;
  P.kappa = kappa_of(p);

  if (pert.kind == PerturbationKind::Custom) {
    P.C0 = pert.custom->C0;
    P.s0 = pert.custom->s0;
    if (!(P.C0 > 0.0) || !(P.s0 > 0.0)) throw InvalidArgument("custom perturbation must supply C0 > 0 and s0 > 0");
  } else {
    P.s0 = onset_time(p, a, sweep.s_max);
  }

  if (!P.unperturbed()) {
    auto z = logspace(1e-3, 1e6, sweep.points);
    double g = check_growth_bound(P, z);
    if (g > M) throw InvalidArgument("perturbation violates its growth bound: need M >= " + std::to_string(g));
  }

  auto w_grid = symmetric_grid(sweep.w_max, sweep.points);
  auto s_grid = logspace(P.s0, sweep.s_max, sweep.points);
  double ratio = check_perturbation_bound(P, w_grid, s_grid);
  if (pert.kind == PerturbationKind::Custom) {
    if (ratio > P.C0)
      throw InvalidArgument("custom perturbation fails its own bound: ratio " + std::to_string(ratio) + " > C0");
  } else {
    P.C0 = sweep.inflation * ratio;
  }
  P.gamma = gamma_of(P.C0, p);
  return P;
}

inline ProblemParams rederive(const ProblemParams& P) {
  return derive_constants(P.n, P.p, P.a, P.M, P.mu, P.perturbation, P.sweep, P.theta);
}

inline ProblemParams with_theta(ProblemParams P, double theta) {
  if (!(theta >= 0.0)) throw InvalidArgument("theta must be nonnegative");
  P.theta = theta;
  return P;
}

}  // namespace blowup
