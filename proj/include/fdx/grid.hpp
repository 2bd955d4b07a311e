#pragma once

// Discretized domains at desk scale: the unit interval and the unit radial
// ball, reduced to nodes on [0,1] with a radial measure factor.  Composite
// trapezoidal quadrature on (possibly graded) nodes, weighted inner products,
// second-order finite-difference gradients and the Hardy-ratio diagnostic.

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdx {

enum class DomainKind { Interval, RadialBall };

inline std::string to_string(DomainKind k) {
  return k == DomainKind::Interval ? "interval" : "radial-ball";
}

inline DomainKind domain_kind_from(const std::string& s) {
  if (s == "interval") return DomainKind::Interval;
  if (s == "radial-ball" || s == "ball" || s == "radial_ball") return DomainKind::RadialBall;
  throw std::invalid_argument("unknown domain kind: '" + s + "'");
}

struct Grid {
  DomainKind kind = DomainKind::Interval;
  int dimension = 1;              // N
  std::vector<double> x;          // nodes, strictly increasing, x.back() == 1
  std::vector<double> q;          // trapezoid weights, positive
  std::vector<double> mu;         // measure factor x^{N-1} (1 on the interval)

  int n() const { return static_cast<int>(x.size()); }
  double measure() const {
    double s = 0.0;
    for (int i = 0; i < n(); ++i) s += q[i] * mu[i];
    return s;
  }
  /// Distance to the domain boundary.
  double dist(int i) const {
    return kind == DomainKind::Interval ? std::min(x[i], 1.0 - x[i]) : 1.0 - x[i];
  }
  bool is_boundary(int i) const {
    if (kind == DomainKind::Interval) return i == 0 || i == n() - 1;
    return i == n() - 1;
  }
};

using GridPtr = std::shared_ptr<const Grid>;

/// Real-valued grid function; the universal carrier for V, h, v and
/// eigenfields.
struct Field {
  GridPtr grid;
  std::vector<double> v;

  Field() = default;
  Field(GridPtr g, double fill = 0.0) : grid(std::move(g)), v(grid->n(), fill) {}
  Field(GridPtr g, std::vector<double> vals) : grid(std::move(g)), v(std::move(vals)) {
    if (static_cast<int>(v.size()) != grid->n())
      throw std::invalid_argument("Field: length does not match grid node count");
  }

  int n() const { return static_cast<int>(v.size()); }
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }

  Field& operator+=(const Field& o) {
    for (int i = 0; i < n(); ++i) v[i] += o.v[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (int i = 0; i < n(); ++i) v[i] -= o.v[i];
    return *this;
  }
  Field& operator*=(double a) {
    for (double& t : v) t *= a;
    return *this;
  }
  /// this += a*o
  Field& axpy(double a, const Field& o) {
    for (int i = 0; i < n(); ++i) v[i] += a * o.v[i];
    return *this;
  }
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }

inline bool same_grid(const Field& a, const Field& b) {
  if (a.grid == b.grid) return true;
  if (!a.grid || !b.grid) return false;
  return a.grid->kind == b.grid->kind && a.grid->x == b.grid->x;
}

/// Builds a grid on [0,1].  grading = 1 is uniform; grading > 1 clusters the
/// nodes at the boundary x = 1 via x_i = 1 - (1 - i/(n-1))^grading.
inline GridPtr build_grid(DomainKind kind, int N, int n, double grading = 1.0) {
  if (n < 5) throw std::invalid_argument("build_grid: n too small (need n >= 5)");
  if (grading < 1.0) throw std::invalid_argument("build_grid: grading must be >= 1");
  if (kind == DomainKind::Interval && N != 1)
    throw std::invalid_argument("build_grid: interval forces N = 1");
  if (kind == DomainKind::RadialBall && N < 1)
    throw std::invalid_argument("build_grid: dimension must be positive");

  auto g = std::make_shared<Grid>();
  g->kind = kind;
  g->dimension = N;
  g->x.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / (n - 1);
    g->x[i] = (grading == 1.0) ? t : 1.0 - std::pow(1.0 - t, grading);
  }
  g->x[0] = 0.0;
  g->x[n - 1] = 1.0;

  g->q.assign(n, 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    double half = 0.5 * (g->x[i + 1] - g->x[i]);
    g->q[i] += half;
    g->q[i + 1] += half;
  }

  g->mu.resize(n);
  for (int i = 0; i < n; ++i)
    g->mu[i] = (kind == DomainKind::Interval) ? 1.0 : std::pow(g->x[i], N - 1);
  return g;
}

/// Weighted pairing  sum_i q_i mu_i u_i v_i V_i^sigma, the discrete
/// counterpart of the L^2_sigma inner product against the weight V^sigma.
inline double weighted_inner(const Field& u, const Field& v, const Field& V, double sigma) {
  if (!same_grid(u, v) || !same_grid(u, V))
    throw std::invalid_argument("weighted_inner: grid mismatch");
  const Grid& g = *u.grid;
  const int n = g.n();
  if (sigma != 0.0) {
    for (int i = 0; i < n; ++i) {
      if (V[i] < 0.0 || (!g.is_boundary(i) && V[i] == 0.0))
        throw std::invalid_argument("weighted_inner: weight V must be positive at interior nodes");
    }
  }
  double s = 0.0;
  if (sigma == 0.0) {
    for (int i = 0; i < n; ++i) s += g.q[i] * g.mu[i] * u[i] * v[i];
  } else {
    for (int i = 0; i < n; ++i) s += g.q[i] * g.mu[i] * u[i] * v[i] * std::pow(V[i], sigma);
  }
  return s;
}

inline double norm_weighted(const Field& u, const Field& V, double sigma) {
  return std::sqrt(std::max(0.0, weighted_inner(u, u, V, sigma)));
}

inline double norm_inf(const Field& u) {
  double m = 0.0;
  for (double t : u.v) m = std::max(m, std::abs(t));
  return m;
}

/// Nodal derivative: second-order three-point formulas on nonuniform nodes,
/// one-sided at the endpoints.
inline Field gradient(const Field& h) {
  const Grid& g = *h.grid;
  const int n = g.n();
  if (n < 3) throw std::invalid_argument("gradient: need at least 3 nodes");
  Field out(h.grid);
  {
    double h1 = g.x[1] - g.x[0], h2 = g.x[2] - g.x[1];
    out[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * h[0] + (h1 + h2) / (h1 * h2) * h[1] -
             h1 / (h2 * (h1 + h2)) * h[2];
  }
  for (int i = 1; i + 1 < n; ++i) {
    double hm = g.x[i] - g.x[i - 1], hp = g.x[i + 1] - g.x[i];
    out[i] = -hp / (hm * (hm + hp)) * h[i - 1] + (hp - hm) / (hm * hp) * h[i] +
             hm / (hp * (hm + hp)) * h[i + 1];
  }
  {
    double h1 = g.x[n - 1] - g.x[n - 2], h2 = g.x[n - 2] - g.x[n - 3];
    out[n - 1] = (2.0 * h1 + h2) / (h1 * (h1 + h2)) * h[n - 1] -
                 (h1 + h2) / (h1 * h2) * h[n - 2] + h1 / (h2 * (h1 + h2)) * h[n - 3];
  }
  return out;
}

/// sup_i |V_i (grad h)_i|, the boundary-weighted gradient amplitude.
inline double sup_weighted_grad(const Field& h, const Field& V) {
  Field dh = gradient(h);
  double m = 0.0;
  for (int i = 0; i < h.n(); ++i) m = std::max(m, std::abs(V[i] * dh[i]));
  return m;
}

/// ||h||_{L^2} / (||h||_{L^2_{p+1}} + ||grad h||_{L^2_2}).  The boundedness of
/// this ratio under refinement is the content of the Hardy-type inequality.
inline double hardy_ratio(const Field& h, const Field& V, double p) {
  double num = norm_weighted(h, V, 0.0);
  if (num == 0.0) throw std::invalid_argument("hardy_ratio: undefined ratio for zero field");
  Field dh = gradient(h);
  double den = norm_weighted(h, V, p + 1.0) + norm_weighted(dh, V, 2.0);
  return num / den;
}

/// CSV with columns index,x,q,mu.
inline void write_grid_csv(const Grid& g, std::ostream& os) {
  os << "index,x,q,mu\n";
  os.precision(17);
  for (int i = 0; i < g.n(); ++i)
    os << i << ',' << g.x[i] << ',' << g.q[i] << ',' << g.mu[i] << '\n';
}

}  // namespace fdx
