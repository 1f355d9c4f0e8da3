#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blowup/hermite.hpp"
#include "blowup/ode.hpp"
#include "blowup/params.hpp"

namespace blowup {

enum class Frame { Physical, Similarity };

inline const char* to_string(Frame f) { return f == Frame::Physical ? "physical" : "similarity"; }

struct BlowupReached : std::runtime_error {
  double time;
  explicit BlowupReached(double t, const std::string& what = "overflow")
      : std::runtime_error("blow-up reached (" + what + ") at time " + std::to_string(t)), time(t) {}
};

// Uniform tensor grid on [-L, L]^dim with N nodes per axis; N odd so the
// origin is a node. Node index is row-major with the last axis fastest.
struct Grid {
  int dim = 1;
  double L = 1.0;
  int N = 3;

  static Grid make(int dim, double L, double spacing) {
    if (dim < 1 || dim > 2) throw InvalidArgument("grids are 1-D or 2-D");
    if (!(L > 0) || !(spacing > 0)) throw InvalidArgument("grid needs L > 0 and spacing > 0");
    int half = static_cast<int>(std::lround(L / spacing));
    if (half < 2) throw InvalidArgument("grid spacing too coarse for the domain");
    if (std::fabs(half * spacing - L) > 1e-9 * L) throw InvalidArgument("L must be a multiple of the spacing");
    return Grid{dim, L, 2 * half + 1};
  }

  double h() const { return 2.0 * L / (N - 1); }
  double coord(int k) const { return -L + k * h(); }
  size_t size() const { return dim == 1 ? size_t(N) : size_t(N) * N; }
  size_t index(int i) const { return i; }
  size_t index(int i, int j) const { return size_t(i) * N + j; }
  std::vector<double> point(size_t k) const {
    if (dim == 1) return {coord(int(k))};
    return {coord(int(k / N)), coord(int(k % N))};
  }
  double cell_volume() const { return std::pow(h(), dim); }
  bool operator==(const Grid& o) const { return dim == o.dim && N == o.N && L == o.L; }
};

inline double rho1(double y) { return std::exp(-y * y / 4.0) / std::sqrt(4.0 * M_PI); }

inline double rho(const std::vector<double>& y) {
  double r = 1.0;
  for (double v : y) r *= rho1(v);
  return r;
}

struct Field {
  Grid grid;
  std::vector<double> values;
  double time = 0.0;
  Frame frame = Frame::Similarity;
  long frame_index = 0;

  static Field sample(const Grid& g, Frame f, double time, const std::function<double(const std::vector<double>&)>& fn) {
    Field F{g, std::vector<double>(g.size()), time, f, 0};
    for (size_t k = 0; k < g.size(); ++k) F.values[k] = fn(g.point(k));
    return F;
  }
  static Field constant(const Grid& g, Frame f, double time, double c) {
    return Field{g, std::vector<double>(g.size(), c), time, f, 0};
  }

  double sup_norm() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
  }
  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
  double at(int i) const { return values[i]; }
  double at(int i, int j) const { return values[grid.index(i, j)]; }
};

// ---------------------------------------------------------------- axis operators

// (A f)_i = lo_i f_{i-1} + di_i f_i + up_i f_{i+1}, homogeneous Neumann ends
struct AxisOperator {
  std::vector<double> lo, di, up;
};

// (1/rho) d/dy (rho d/dy) in flux form with rho taken exactly at faces.
// Symmetric under the node weights rho(y_i) h.
inline AxisOperator weighted_axis(const Grid& g) {
  const int N = g.N;
  const double h = g.h(), h2 = h * h;
  AxisOperator A{std::vector<double>(N, 0.0), std::vector<double>(N, 0.0), std::vector<double>(N, 0.0)};
  for (int i = 0; i < N; ++i) {
    double y = g.coord(i);
    if (i > 0) {
      double yf = y - 0.5 * h;
      A.lo[i] = std::exp(-(yf * yf - y * y) / 4.0) / h2;
    }
    if (i < N - 1) {
      double yf = y + 0.5 * h;
      A.up[i] = std::exp(-(yf * yf - y * y) / 4.0) / h2;
    }
    A.di[i] = -(A.lo[i] + A.up[i]);
  }
  return A;
}

inline AxisOperator flat_axis(const Grid& g) {
  const int N = g.N;
  const double h2 = g.h() * g.h();
  AxisOperator A{std::vector<double>(N, 0.0), std::vector<double>(N, 0.0), std::vector<double>(N, 0.0)};
  for (int i = 0; i < N; ++i) {
    if (i > 0) A.lo[i] = 1.0 / h2;
    if (i < N - 1) A.up[i] = 1.0 / h2;
    A.di[i] = -(A.lo[i] + A.up[i]);
  }
  return A;
}

// out += A applied along every axis
inline void apply_operator(const AxisOperator& A, const Grid& g, const std::vector<double>& f, std::vector<double>& out) {
  const int N = g.N;
  auto line = [&](size_t base, size_t stride) {
    // difference form: exactly zero on constants
    for (int i = 0; i < N; ++i) {
      double fi = f[base + i * stride], v = 0.0;
      if (i > 0) v += A.lo[i] * (f[base + (i - 1) * stride] - fi);
      if (i < N - 1) v += A.up[i] * (f[base + (i + 1) * stride] - fi);
      out[base + i * stride] += v;
    }
  };
  if (g.dim == 1) {
    line(0, 1);
  } else {
    for (int j = 0; j < N; ++j) line(j, N);               // axis 0
    for (int i = 0; i < N; ++i) line(size_t(i) * N, 1);   // axis 1
  }
}

inline std::vector<double> apply_operator(const AxisOperator& A, const Grid& g, const std::vector<double>& f) {
  std::vector<double> out(f.size(), 0.0);
  apply_operator(A, g, f, out);
  return out;
}

// Thomas factorization of (I - c A)
class TridiagSolver {
 public:
  TridiagSolver() = default;
  TridiagSolver(const AxisOperator& A, double c) {
    const size_t N = A.di.size();
    a_.resize(N);
    cp_.resize(N);
    inv_.resize(N);
    for (size_t i = 0; i < N; ++i) {
      double a = -c * A.lo[i], b = 1.0 - c * A.di[i], cc = -c * A.up[i];
      double den = i == 0 ? b : b - a * cp_[i - 1];
      inv_[i] = 1.0 / den;
      cp_[i] = cc * inv_[i];
      a_[i] = a;
    }
  }

  void solve_line(double* x, size_t stride) const {
    const size_t N = a_.size();
    x[0] *= inv_[0];
    for (size_t i = 1; i < N; ++i) x[i * stride] = (x[i * stride] - a_[i] * x[(i - 1) * stride]) * inv_[i];
    for (size_t i = N - 1; i-- > 0;) x[i * stride] -= cp_[i] * x[(i + 1) * stride];
  }

  // solves along all lines of the given axis, in place
  void solve(const Grid& g, std::vector<double>& x, int axis) const {
    const int N = g.N;
    if (g.dim == 1) {
      solve_line(x.data(), 1);
    } else if (axis == 0) {
      for (int j = 0; j < N; ++j) solve_line(x.data() + j, N);
    } else {
      for (int i = 0; i < N; ++i) solve_line(x.data() + size_t(i) * N, 1);
    }
  }

 private:
  std::vector<double> a_, cp_, inv_;
};

// <f, g>_rho on the grid with node weights rho(y_i) h^n
inline double grid_inner(const Grid& g, const std::vector<double>& f, const std::vector<double>& q) {
  double s = 0.0, vol = g.cell_volume();
  for (size_t k = 0; k < g.size(); ++k) s += rho(g.point(k)) * f[k] * q[k];
  return s * vol;
}

inline Quadrature grid_rule(const Grid& g) { return grid_quadrature(g.dim, g.L, g.N); }

// ---------------------------------------------------------------- similarity stepper

inline double w_reaction(const ProblemParams& P, double s, double w) {
  return -w / (P.p - 1) + std::pow(std::fabs(w), P.p - 1) * w + P.scaled_h(0, s, w);
}

struct WStepOptions {
  // Remove the rho-projection of w - phi(s) onto H_alpha, |alpha| <= 1,
  // after each step (re-choosing T and x0).
  bool control_unstable_modes = false;
  std::function<double(double)> phi;  // reference profile for mode control; kappa when empty
};

class WStepper {
 public:
  WStepper(const Grid& g, const ProblemParams& P, double ds, WStepOptions o = {})
      : g_(g), P_(P), ds_(ds), opt_(std::move(o)), A_(weighted_axis(g)), solve_(A_, ds) {
    if (!(ds > 0)) throw InvalidArgument("ds must be positive");
    if (g.dim != 1 && g.dim != P.n) throw InvalidArgument("grid dimension differs from params.n");
    if (opt_.control_unstable_modes) build_modes();
  }

  const Grid& grid() const { return g_; }
  double ds() const { return ds_; }
  const AxisOperator& op() const { return A_; }

  // A w + R(w, s)
  std::vector<double> rhs(const Field& F) const {
    std::vector<double> out(F.values.size());
    for (size_t k = 0; k < out.size(); ++k) out[k] = w_reaction(P_, F.time, F.values[k]);
    apply_operator(A_, g_, F.values, out);
    return out;
  }

  void step(Field& F) const {
    if (F.frame != Frame::Similarity) throw InvalidArgument("step_w needs a similarity-frame field");
    if (!(F.grid == g_)) throw InvalidArgument("field grid differs from the stepper grid");
    auto& w = F.values;
    // increment form: (I - ds A) dw = ds (A w + R(w))
    auto dw = rhs(F);
    for (double& v : dw) v *= ds_;
    solve_.solve(g_, dw, 0);
    if (g_.dim == 2) solve_.solve(g_, dw, 1);
    for (size_t k = 0; k < w.size(); ++k) w[k] += dw[k];
    F.time += ds_;
    ++F.frame_index;
    for (double v : w)
      if (!std::isfinite(v) || std::fabs(v) > 1e150) throw BlowupReached(F.time, "w overflow or NaN");
    if (opt_.control_unstable_modes) remove_modes(F);
  }

 private:
  void build_modes() {
    const size_t n = g_.size();
    weights_.resize(n);
    for (size_t k = 0; k < n; ++k) weights_[k] = rho(g_.point(k)) * g_.cell_volume();
    modes_.clear();
    modes_.push_back(std::vector<double>(n, 1.0));
    for (int d = 0; d < g_.dim; ++d) {
      std::vector<double> m(n);
      for (size_t k = 0; k < n; ++k) m[k] = g_.point(k)[d];
      modes_.push_back(m);
    }
    norms_.clear();
    for (auto& m : modes_) {
      double s = 0;
      for (size_t k = 0; k < n; ++k) s += weights_[k] * m[k] * m[k];
      norms_.push_back(s);
    }
  }

  void remove_modes(Field& F) const {
    double ref = opt_.phi ? opt_.phi(F.time) : P_.kappa;
    for (size_t m = 0; m < modes_.size(); ++m) {
      double c = 0;
      for (size_t k = 0; k < F.values.size(); ++k) c += weights_[k] * (F.values[k] - ref) * modes_[m][k];
      c /= norms_[m];
      for (size_t k = 0; k < F.values.size(); ++k) F.values[k] -= c * modes_[m][k];
    }
  }

  Grid g_;
  ProblemParams P_;
  double ds_;
  WStepOptions opt_;
  AxisOperator A_;
  TridiagSolver solve_;
  std::vector<double> weights_, norms_;
  std::vector<std::vector<double>> modes_;
};

inline Field step_w(const Field& F, const ProblemParams& P, double ds) {
  Field out = F;
  WStepper(F.grid, P, ds).step(out);
  return out;
}

// ---------------------------------------------------------------- physical stepper

inline double u_reaction(const ProblemParams& P, double u) { return std::pow(std::fabs(u), P.p - 1) * u + P.h(u); }

// u' = |u|^{p-1}u + h(u) over dt by RK4 sub-steps with dt_sub |f'(u)| <= 0.1
inline double react(const ProblemParams& P, double u, double dt) {
  double rate = P.p * std::pow(std::fabs(u), P.p - 1) + std::fabs(P.h(u, 1));
  int nsub = std::max(1, static_cast<int>(std::ceil(dt * rate / 0.1)));
  nsub = std::min(nsub, 10000);
  double h = dt / nsub;
  for (int i = 0; i < nsub; ++i) {
    double k1 = u_reaction(P, u), k2 = u_reaction(P, u + 0.5 * h * k1), k3 = u_reaction(P, u + 0.5 * h * k2),
           k4 = u_reaction(P, u + h * k3);
    u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return u;
}

// Strang splitting: half reaction, backward-Euler diffusion, half reaction.
inline void step_u_inplace(Field& F, const ProblemParams& P, double dt, const AxisOperator& lap) {
  if (F.frame != Frame::Physical) throw InvalidArgument("step_u needs a physical-frame field");
  if (!(dt > 0)) throw InvalidArgument("dt must be positive");
  auto& u = F.values;
  for (double& v : u) v = react(P, v, 0.5 * dt);
  TridiagSolver S(lap, dt);
  auto du = apply_operator(lap, F.grid, u);
  for (double& v : du) v *= dt;
  S.solve(F.grid, du, 0);
  if (F.grid.dim == 2) S.solve(F.grid, du, 1);
  for (size_t k = 0; k < u.size(); ++k) u[k] += du[k];
  for (double& v : u) v = react(P, v, 0.5 * dt);
  F.time += dt;
  ++F.frame_index;
  for (double v : u)
    if (!std::isfinite(v) || std::fabs(v) > 1e150) throw BlowupReached(F.time);
}

inline Field step_u(const Field& F, const ProblemParams& P, double dt) {
  Field out = F;
  step_u_inplace(out, P, dt, flat_axis(F.grid));
  return out;
}

// ---------------------------------------------------------------- traces

struct SolveTrace {
  std::vector<Field> snapshots;
  std::vector<double> times;      // sup-norm series
  std::vector<double> sup_norms;
  std::optional<double> blowup_time;
  std::string stop_reason;
};

struct UBlowupOptions {
  double cfl = 0.005;       // dt = cfl / ||u||^{p-1}
  double dt_max = 1e-3;
  double t_max = 10.0;
  double u_stop = 1e8;
  double resolution = 4.0;  // stop once sqrt(T-t) < resolution * dx
  std::vector<double> snapshot_norms;  // store a snapshot when ||u|| first passes each value
};

// Advances u until ||u|| >= u_stop, the peak is under-resolved, or t_max.
// sqrt(T-t) is estimated from kappa/||u|| = (T-t)^{1/(p-1)}.
inline SolveTrace run_u(Field u, const ProblemParams& P, const UBlowupOptions& o = {}) {
  SolveTrace tr;
  auto lap = flat_axis(u.grid);
  std::vector<double> marks = o.snapshot_norms;
  std::sort(marks.begin(), marks.end());
  size_t next_mark = 0;
  tr.snapshots.push_back(u);
  tr.times.push_back(u.time);
  tr.sup_norms.push_back(u.sup_norm());
  const double dx = u.grid.h();
  while (true) {
    double m = tr.sup_norms.back();
    if (m >= o.u_stop) {
      tr.stop_reason = "u_stop";
      break;
    }
    double ttg = std::pow(P.kappa / std::max(m, 1e-300), P.p - 1);
    if (std::sqrt(ttg) < o.resolution * dx) {
      tr.stop_reason = "resolution";
      break;
    }
    if (u.time >= o.t_max) {
      tr.stop_reason = "t_max";
      break;
    }
    double dt = std::min(o.dt_max, o.cfl / std::pow(std::max(m, 1.0), P.p - 1));
    dt = std::min(dt, o.t_max - u.time);
    try {
      step_u_inplace(u, P, dt, lap);
    } catch (const BlowupReached&) {
      tr.stop_reason = "overflow";
      break;
    }
    tr.times.push_back(u.time);
    tr.sup_norms.push_back(u.sup_norm());
    while (next_mark < marks.size() && tr.sup_norms.back() >= marks[next_mark]) {
      tr.snapshots.push_back(u);
      ++next_mark;
    }
  }
  if (tr.snapshots.back().time != u.time) tr.snapshots.push_back(u);
  return tr;
}

struct WRunOptions {
  WStepOptions step;
  int snapshot_every = 0;  // steps between stored snapshots; 0 stores first and last
  std::function<void(const Field&)> observer;  // called after every step
};

inline SolveTrace run_w(Field w, const ProblemParams& P, double ds, double s_end, const WRunOptions& o = {}) {
  WStepper st(w.grid, P, ds, o.step);
  SolveTrace tr;
  tr.snapshots.push_back(w);
  tr.times.push_back(w.time);
  tr.sup_norms.push_back(w.sup_norm());
  if (o.observer) o.observer(w);
  long steps = std::lround((s_end - w.time) / ds);
  for (long k = 1; k <= steps; ++k) {
    st.step(w);
    tr.times.push_back(w.time);
    tr.sup_norms.push_back(w.sup_norm());
    if (o.observer) o.observer(w);
    if ((o.snapshot_every > 0 && k % o.snapshot_every == 0) || k == steps) tr.snapshots.push_back(w);
  }
  tr.stop_reason = "s_end";
  return tr;
}

// rho-weighted one-sided gradient at the truncation boundary
inline double boundary_flux(const Field& F) {
  const Grid& g = F.grid;
  const int N = g.N;
  const double h = g.h();
  double flux = 0.0;
  auto edge = [&](size_t b, size_t in) {
    flux += rho(g.point(b)) * std::fabs(F.values[b] - F.values[in]) / h;
  };
  if (g.dim == 1) {
    edge(0, 1);
    edge(N - 1, N - 2);
  } else {
    for (int j = 0; j < N; ++j) {
      edge(g.index(0, j), g.index(1, j));
      edge(g.index(N - 1, j), g.index(N - 2, j));
      edge(g.index(j, 0), g.index(j, 1));
      edge(g.index(j, N - 1), g.index(j, N - 2));
    }
  }
  return flux;
}

// ---------------------------------------------------------------- blow-up detection

enum class BlowupStatus { Detected, Inconclusive };

struct BlowupDetection {
  BlowupStatus status = BlowupStatus::Inconclusive;
  std::string reason;
  double T = NAN;
  double rate_constant = NAN;
  bool lower_bound_ok = false;
  double lower_bound_min_ratio = NAN;  // min over the series of (T - t) / tau(||u||)
};

// tau(m) = int_m^inf dv / (v^p + h(v)), the blow-up time of the constant solution
inline double ode_blowup_time_from(const ProblemParams& P, double m) {
  auto f = [&](double x) {
    if (x <= 0) return 0.0;
    double v = m / x;
    return m / (x * x * u_reaction(P, v));
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-12);
}

struct DetectOptions {
  double floor = 1e2;
  int min_points = 10;
  int fit_points = 10;
  double lower_bound_tol = 1e-3;
};

inline BlowupDetection detect_blowup(const SolveTrace& tr, const ProblemParams& P, const DetectOptions& o = {}) {
  BlowupDetection D;
  std::vector<size_t> idx;
  for (size_t i = 0; i < tr.times.size(); ++i)
    if (tr.sup_norms[i] >= o.floor) idx.push_back(i);
  if (static_cast<int>(idx.size()) < o.min_points) {
    D.reason = "fewer than " + std::to_string(o.min_points) + " samples above the floor";
    return D;
  }
  size_t tail = std::max<size_t>(idx.size() / 2, 2);
  for (size_t k = idx.size() - tail + 1; k < idx.size(); ++k)
    if (tr.sup_norms[idx[k]] <= tr.sup_norms[idx[k - 1]]) {
      D.reason = "sup norm is not monotone over the tail";
      return D;
    }
  size_t nf = std::min<size_t>(o.fit_points, idx.size());
  std::vector<double> x, y;
  for (size_t k = idx.size() - nf; k < idx.size(); ++k) {
    x.push_back(tr.times[idx[k]]);
    y.push_back(std::pow(tr.sup_norms[idx[k]], 1 - P.p));
  }
  auto f = fit_line(x, y);
  if (!(f.slope < 0)) {
    D.reason = "||u||^{1-p} is not decreasing";
    return D;
  }
  D.T = -f.intercept / f.slope;
  size_t last = idx.back();
  if (!(D.T > tr.times[last])) {
    D.reason = "extrapolated T precedes the last sample";
    return D;
  }
  D.status = BlowupStatus::Detected;
  D.rate_constant = std::pow(D.T - tr.times[last], 1.0 / (P.p - 1)) * tr.sup_norms[last];
  double worst = INFINITY;
  for (size_t i = 0; i < tr.times.size(); ++i) {
    double m = tr.sup_norms[i];
    if (m <= 0 || u_reaction(P, m) <= 0) continue;
    worst = std::min(worst, (D.T - tr.times[i]) / ode_blowup_time_from(P, m));
  }
  D.lower_bound_min_ratio = worst;
  D.lower_bound_ok = worst >= 1.0 - o.lower_bound_tol;
  return D;
}

// ---------------------------------------------------------------- frames

// 4-point Lagrange interpolation, tensor product; error outside [-L, L]^n
inline double interpolate(const Field& F, const std::vector<double>& y) {
  const Grid& g = F.grid;
  if (static_cast<int>(y.size()) != g.dim) throw InvalidArgument("interpolate: dimension mismatch");
  const double h = g.h();
  int base[2];
  double wts[2][4];
  for (int d = 0; d < g.dim; ++d) {
    if (y[d] < -g.L - 1e-12 * g.L || y[d] > g.L + 1e-12 * g.L)
      throw InvalidArgument("interpolation point outside the grid domain");
    double t = (y[d] + g.L) / h;
    int i = static_cast<int>(std::floor(t)) - 1;
    i = std::clamp(i, 0, g.N - 4);
    base[d] = i;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      for (int b = 0; b < 4; ++b)
        if (b != a) w *= (t - (i + b)) / double(a - b);
      wts[d][a] = w;
    }
  }
  if (g.dim == 1) {
    double v = 0;
    for (int a = 0; a < 4; ++a) v += wts[0][a] * F.values[base[0] + a];
    return v;
  }
  double v = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) v += wts[0][a] * wts[1][b] * F.values[g.index(base[0] + a, base[1] + b)];
  return v;
}

inline Field to_similarity(const Field& u, const std::vector<double>& x0, double T, double p, const Grid& target) {
  if (u.frame != Frame::Physical) throw InvalidArgument("to_similarity needs a physical field");
  if (!(u.time < T)) throw InvalidArgument("to_similarity needs t < T");
  if (target.dim != u.grid.dim || static_cast<int>(x0.size()) != u.grid.dim)
    throw InvalidArgument("to_similarity: dimension mismatch");
  double tau = T - u.time, sq = std::sqrt(tau), scale = std::pow(tau, 1.0 / (p - 1));
  for (int d = 0; d < u.grid.dim; ++d)
    if (std::fabs(x0[d]) + sq * target.L > u.grid.L * (1 + 1e-12))
      throw InvalidArgument("similarity grid exceeds the physical domain at this time");
  Field w{target, std::vector<double>(target.size()), -std::log(tau), Frame::Similarity, u.frame_index};
  for (size_t k = 0; k < target.size(); ++k) {
    auto y = target.point(k);
    for (int d = 0; d < target.dim; ++d) y[d] = x0[d] + sq * y[d];
    w.values[k] = scale * interpolate(u, y);
  }
  return w;
}

inline Field from_similarity(const Field& w, const std::vector<double>& x0, double T, double p, const Grid& target) {
  if (w.frame != Frame::Similarity) throw InvalidArgument("from_similarity needs a similarity field");
  if (target.dim != w.grid.dim || static_cast<int>(x0.size()) != w.grid.dim)
    throw InvalidArgument("from_similarity: dimension mismatch");
  double tau = std::exp(-w.time), sq = std::sqrt(tau), scale = std::pow(tau, -1.0 / (p - 1));
  for (int d = 0; d < target.dim; ++d)
    if ((std::fabs(x0[d]) + target.L) / sq > w.grid.L * (1 + 1e-12))
      throw InvalidArgument("physical grid exceeds the similarity domain at this time");
  Field u{target, std::vector<double>(target.size()), T - tau, Frame::Physical, w.frame_index};
  for (size_t k = 0; k < target.size(); ++k) {
    auto x = target.point(k);
    for (int d = 0; d < target.dim; ++d) x[d] = (x[d] - x0[d]) / sq;
    u.values[k] = scale * interpolate(w, x);
  }
  return u;
}

}  // namespace blowup
