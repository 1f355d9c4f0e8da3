#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "blowup/params.hpp"

namespace blowup {

// h_m(y), via h_{m+1} = y h_m - 2m h_{m-1}
inline double eval_h(int m, double y) {
  if (m < 0) throw InvalidArgument("Hermite order must be nonnegative");
  if (m == 0) return 1.0;
  double h0 = 1.0, h1 = y;
  for (int k = 1; k < m; ++k) {
    double h2 = y * h1 - 2.0 * k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

// h_0..h_m at y
inline void eval_h_table(int m, double y, double* out) {
  out[0] = 1.0;
  if (m >= 1) out[1] = y;
  for (int k = 1; k < m; ++k) out[k + 1] = y * out[k] - 2.0 * k * out[k - 1];
}

inline double hermite_norm_sq(int m) {
  double v = 1.0;
  for (int k = 1; k <= m; ++k) v *= 2.0 * k;
  return v;
}

struct MultiIndex {
  std::vector<int> m;

  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> v) : m(std::move(v)) {
    for (int x : m)
      if (x < 0) throw InvalidArgument("multi-index entries must be nonnegative");
  }
  MultiIndex(std::initializer_list<int> v) : MultiIndex(std::vector<int>(v)) {}

  int dim() const { return static_cast<int>(m.size()); }
  int total() const { return std::accumulate(m.begin(), m.end(), 0); }
  int operator[](int i) const { return m[i]; }

  static MultiIndex unit(int n, int i, int times = 1) {
    std::vector<int> v(n, 0);
    v[i] = times;
    return MultiIndex(v);
  }

  double norm_sq() const {
    double v = 1.0;
    for (int x : m) v *= hermite_norm_sq(x);
    return v;
  }

  // graded, then lexicographic with the first axis most significant (descending)
  friend bool operator<(const MultiIndex& x, const MultiIndex& y) {
    int tx = x.total(), ty = y.total();
    if (tx != ty) return tx < ty;
    return x.m > y.m;
  }
  friend bool operator==(const MultiIndex& x, const MultiIndex& y) { return x.m == y.m; }
};

inline double eval_H(const MultiIndex& alpha, const std::vector<double>& y) {
  if (static_cast<int>(y.size()) != alpha.dim()) throw InvalidArgument("eval_H: dimension mismatch");
  double v = 1.0;
  for (int i = 0; i < alpha.dim(); ++i) v *= eval_h(alpha[i], y[i]);
  return v;
}

// All multi-indices of dimension n with |alpha| <= max_degree, sorted.
class IndexSet {
 public:
  IndexSet(int n, int max_degree) : n_(n), deg_(max_degree) {
    if (n < 1) throw InvalidArgument("dimension must be positive");
    if (max_degree < 0) throw InvalidArgument("max_degree must be nonnegative");
    std::vector<int> cur(n, 0);
    enumerate(0, max_degree, cur);
    std::sort(list_.begin(), list_.end());
    for (size_t k = 0; k < list_.size(); ++k) pos_[list_[k].m] = k;
  }

  int dim() const { return n_; }
  int max_degree() const { return deg_; }
  size_t size() const { return list_.size(); }
  const MultiIndex& operator[](size_t k) const { return list_[k]; }
  const std::vector<MultiIndex>& list() const { return list_; }

  std::ptrdiff_t find(const MultiIndex& a) const {
    auto it = pos_.find(a.m);
    return it == pos_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }

  static std::shared_ptr<const IndexSet> make(int n, int d) { return std::make_shared<const IndexSet>(n, d); }

 private:
  void enumerate(int axis, int left, std::vector<int>& cur) {
    if (axis == n_) {
      list_.emplace_back(cur);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      cur[axis] = k;
      enumerate(axis + 1, left - k, cur);
    }
    cur[axis] = 0;
  }

  int n_, deg_;
  std::vector<MultiIndex> list_;
  std::map<std::vector<int>, size_t> pos_;
};

class HermiteCoeffs {
 public:
  HermiteCoeffs() = default;
  HermiteCoeffs(int n, int max_degree)
      : idx_(IndexSet::make(n, max_degree)), c_(idx_->size(), 0.0) {}
  explicit HermiteCoeffs(std::shared_ptr<const IndexSet> idx) : idx_(std::move(idx)), c_(idx_->size(), 0.0) {}

  int dim() const { return idx_->dim(); }
  int max_degree() const { return idx_->max_degree(); }
  size_t size() const { return c_.size(); }
  const IndexSet& indices() const { return *idx_; }
  std::shared_ptr<const IndexSet> index_set() const { return idx_; }
  const MultiIndex& index(size_t k) const { return (*idx_)[k]; }

  double& operator[](size_t k) { return c_[k]; }
  double operator[](size_t k) const { return c_[k]; }
  std::vector<double>& values() { return c_; }
  const std::vector<double>& values() const { return c_; }

  double get(const MultiIndex& a) const {
    auto k = idx_->find(a);
    return k < 0 ? 0.0 : c_[k];
  }
  void set(const MultiIndex& a, double v) {
    auto k = idx_->find(a);
    if (k < 0) throw InvalidArgument("multi-index outside the truncation");
    c_[k] = v;
  }

  // ||f||^2_rho of the represented function
  double norm_sq() const {
    double s = 0.0;
    for (size_t k = 0; k < c_.size(); ++k) s += c_[k] * c_[k] * index(k).norm_sq();
    return s;
  }
  double norm() const { return std::sqrt(norm_sq()); }

  double evaluate(const std::vector<double>& y) const {
    double v = 0.0;
    for (size_t k = 0; k < c_.size(); ++k)
      if (c_[k] != 0.0) v += c_[k] * eval_H(index(k), y);
    return v;
  }

 private:
  std::shared_ptr<const IndexSet> idx_;
  std::vector<double> c_;
};

// Tensor rule for int f rho dy. Nodes are the product of per-axis nodes,
// last axis fastest.
struct Quadrature {
  int dim = 1;
  int order = 0;  // 1-D node count
  int exact_degree = 0;  // per-axis polynomial degree integrated exactly
  std::vector<double> axis_nodes;
  std::vector<double> axis_weights;

  size_t size() const {
    size_t s = 1;
    for (int d = 0; d < dim; ++d) s *= axis_nodes.size();
    return s;
  }
  std::vector<double> node(size_t k) const {
    std::vector<double> y(dim);
    size_t m = axis_nodes.size();
    for (int d = dim - 1; d >= 0; --d) {
      y[d] = axis_nodes[k % m];
      k /= m;
    }
    return y;
  }
  double weight(size_t k) const {
    double w = 1.0;
    size_t m = axis_nodes.size();
    for (int d = dim - 1; d >= 0; --d) {
      w *= axis_weights[k % m];
      k /= m;
    }
    return w;
  }
  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (size_t k = 0; k < size(); ++k) s += weight(k) * f(node(k));
    return s;
  }
};

namespace detail {

// Gauss-Hermite for e^{-x^2}: Golub-Welsch start, Newton polish on the
// orthonormal recurrence, Christoffel weights.
inline void gauss_hermite_physicists(int N, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N, N);
  for (int k = 1; k < N; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  x.assign(es.eigenvalues().data(), es.eigenvalues().data() + N);
  w.assign(N, 0.0);
  const double c0 = std::pow(M_PI, -0.25);
  for (int i = 0; i < N; ++i) {
    for (int it = 0; it < 3; ++it) {
      double p0 = c0, p1 = 0.0;
      for (int k = 0; k < N; ++k) {
        double p2 = std::sqrt(2.0 / (k + 1)) * x[i] * p0 - std::sqrt(double(k) / (k + 1)) * p1;
        p1 = p0;
        p0 = p2;
      }
      // p0 = psi_N, p1 = psi_{N-1}; psi_N' = sqrt(2N) psi_{N-1}
      double dx = p0 / (std::sqrt(2.0 * N) * p1);
      x[i] -= dx;
      if (std::fabs(dx) < 1e-16 * (1.0 + std::fabs(x[i]))) break;
    }
    double s = 0.0, p0 = c0, p1 = 0.0;
    for (int k = 0; k < N; ++k) {
      s += p0 * p0;
      double p2 = std::sqrt(2.0 / (k + 1)) * x[i] * p0 - std::sqrt(double(k) / (k + 1)) * p1;
      p1 = p0;
      p0 = p2;
    }
    w[i] = 1.0 / s;
  }
  for (int i = 0; i < N / 2; ++i) {
    double m = 0.5 * (x[N - 1 - i] - x[i]);
    x[i] = -m;
    x[N - 1 - i] = m;
    double ww = 0.5 * (w[i] + w[N - 1 - i]);
    w[i] = w[N - 1 - i] = ww;
  }
  if (N % 2) x[N / 2] = 0.0;
}

}  // namespace detail

inline Quadrature build_quadrature(int n, int order) {
  if (n < 1) throw InvalidArgument("dimension must be positive");
  if (order < 2) throw InvalidArgument("quadrature order must be at least 2");
  if (order > 200) throw InvalidArgument("quadrature order above 200 per axis is not supported");
  Quadrature Q;
  Q.dim = n;
  Q.order = order;
  Q.exact_degree = 2 * order - 1;
  std::vector<double> x, w;
  detail::gauss_hermite_physicists(order, x, w);
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  Q.axis_nodes.resize(order);
  Q.axis_weights.resize(order);
  for (int i = 0; i < order; ++i) {
    Q.axis_nodes[i] = 2.0 * x[i];
    Q.axis_weights[i] = w[i] / total;
  }
  return Q;
}

// Rule on uniform grid nodes y_k = -L + k dy with weights rho(y_k) dy.
inline Quadrature grid_quadrature(int n, double L, int points_per_axis) {
  if (points_per_axis < 3) throw InvalidArgument("grid rule needs at least 3 points");
  Quadrature Q;
  Q.dim = n;
  Q.order = points_per_axis;
  Q.exact_degree = -1;
  double dy = 2.0 * L / (points_per_axis - 1);
  Q.axis_nodes.resize(points_per_axis);
  Q.axis_weights.resize(points_per_axis);
  for (int k = 0; k < points_per_axis; ++k) {
    double y = -L + k * dy;
    Q.axis_nodes[k] = y;
    Q.axis_weights[k] = std::exp(-y * y / 4.0) / std::sqrt(4.0 * M_PI) * dy;
  }
  return Q;
}

namespace detail {

// table[d][j * (deg+1) + k] = h_k(axis node j)
inline std::vector<double> axis_table(const Quadrature& Q, int deg) {
  size_t m = Q.axis_nodes.size();
  std::vector<double> T(m * (deg + 1));
  for (size_t j = 0; j < m; ++j) eval_h_table(deg, Q.axis_nodes[j], &T[j * (deg + 1)]);
  return T;
}

}  // namespace detail

inline HermiteCoeffs project(const Quadrature& Q, const std::vector<double>& values, int max_degree) {
  if (values.size() != Q.size()) throw InvalidArgument("project: values do not match quadrature nodes");
  if (Q.exact_degree >= 0 && 2 * max_degree > Q.exact_degree)
    throw InvalidArgument("project: max_degree exceeds quadrature exactness");
  HermiteCoeffs C(Q.dim, max_degree);
  const int deg = max_degree, n = Q.dim;
  const size_t m = Q.axis_nodes.size();
  auto T = detail::axis_table(Q, deg);
  std::vector<size_t> sub(n, 0);
  std::vector<double> acc(C.size(), 0.0);
  for (size_t k = 0; k < Q.size(); ++k) {
    size_t r = k;
    double w = 1.0;
    for (int d = n - 1; d >= 0; --d) {
      sub[d] = r % m;
      r /= m;
      w *= Q.axis_weights[sub[d]];
    }
    double f = w * values[k];
    if (f == 0.0) continue;
    for (size_t c = 0; c < C.size(); ++c) {
      const auto& al = C.index(c);
      double h = 1.0;
      for (int d = 0; d < n; ++d) h *= T[sub[d] * (deg + 1) + al[d]];
      acc[c] += f * h;
    }
  }
  for (size_t c = 0; c < C.size(); ++c) C[c] = acc[c] / C.index(c).norm_sq();
  return C;
}

// values at the quadrature nodes
inline std::vector<double> reconstruct(const HermiteCoeffs& C, const Quadrature& Q) {
  if (C.dim() != Q.dim) throw InvalidArgument("reconstruct: dimension mismatch");
  const int deg = C.max_degree(), n = Q.dim;
  const size_t m = Q.axis_nodes.size();
  auto T = detail::axis_table(Q, deg);
  std::vector<double> out(Q.size(), 0.0);
  std::vector<size_t> sub(n);
  for (size_t k = 0; k < Q.size(); ++k) {
    size_t r = k;
    for (int d = n - 1; d >= 0; --d) {
      sub[d] = r % m;
      r /= m;
    }
    double v = 0.0;
    for (size_t c = 0; c < C.size(); ++c) {
      if (C[c] == 0.0) continue;
      const auto& al = C.index(c);
      double h = 1.0;
      for (int d = 0; d < n; ++d) h *= T[sub[d] * (deg + 1) + al[d]];
      v += C[c] * h;
    }
    out[k] = v;
  }
  return out;
}

struct SpectralSplit {
  HermiteCoeffs plus, null, minus;
  double Z = 0.0, X = 0.0, Y = 0.0;
};

inline SpectralSplit split(const HermiteCoeffs& C) {
  SpectralSplit S{HermiteCoeffs(C.index_set()), HermiteCoeffs(C.index_set()), HermiteCoeffs(C.index_set())};
  for (size_t k = 0; k < C.size(); ++k) {
    int t = C.index(k).total();
    (t <= 1 ? S.plus : t == 2 ? S.null : S.minus)[k] = C[k];
  }
  S.Z = S.plus.norm();
  S.X = S.null.norm();
  S.Y = S.minus.norm();
  return S;
}

inline double eigenvalue_of(const MultiIndex& a) { return 1.0 - 0.5 * a.total(); }

inline HermiteCoeffs semigroup_apply(const HermiteCoeffs& C, double s) {
  if (!(s >= 0.0)) throw InvalidArgument("semigroup time must be nonnegative");
  HermiteCoeffs out = C;
  for (size_t k = 0; k < C.size(); ++k) {
    int t = C.index(k).total();
    if (t != 2) out[k] = C[k] * std::exp((1.0 - 0.5 * t) * s);
  }
  return out;
}

inline HermiteCoeffs apply_L(const HermiteCoeffs& C) {
  HermiteCoeffs out = C;
  for (size_t k = 0; k < C.size(); ++k) out[k] = C[k] * eigenvalue_of(C.index(k));
  return out;
}

// Matrix view of the degree-2 part: V_null = y^T A y - 2 tr A.
// a_{2e_i} multiplies h_2(y_i) (norm^2 8), a_{e_i+e_j} multiplies
// h_1(y_i)h_1(y_j) (norm^2 4) and is split evenly over A_ij and A_ji.
inline Eigen::MatrixXd a_matrix(const HermiteCoeffs& C) {
  int n = C.dim();
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::vector<int> al(n, 0);
      al[i] += 1;
      al[j] += 1;
      double c = C.get(MultiIndex(al));
      A(i, j) = i == j ? c : 0.5 * c;
    }
  return A;
}

inline void set_a_matrix(HermiteCoeffs& C, const Eigen::MatrixXd& A) {
  int n = C.dim();
  if (A.rows() != n || A.cols() != n) throw InvalidArgument("set_a_matrix: shape mismatch");
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      std::vector<int> al(n, 0);
      al[i] += 1;
      al[j] += 1;
      C.set(MultiIndex(al), i == j ? A(i, i) : A(i, j) + A(j, i));
    }
}

// f(Q y) re-projected; Q orthogonal. Degree-m content maps into degree m.
inline HermiteCoeffs rotate(const HermiteCoeffs& C, const Eigen::MatrixXd& R) {
  int n = C.dim();
  Quadrature Qd = build_quadrature(n, C.max_degree() + 2);
  std::vector<double> vals(Qd.size());
  for (size_t k = 0; k < Qd.size(); ++k) {
    auto y = Qd.node(k);
    Eigen::Map<Eigen::VectorXd> yv(y.data(), n);
    Eigen::VectorXd z = R * yv;
    vals[k] = C.evaluate(std::vector<double>(z.data(), z.data() + n));
  }
  return project(Qd, vals, C.max_degree());
}

}  // namespace blowup
