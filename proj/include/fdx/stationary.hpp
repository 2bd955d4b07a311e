#pragma once

// Stationary states of the rescaled flow: positive solutions of
//   -div(mu grad V) = mu V^p,   V = 0 on the boundary,
// on the interval (mu = 1) or the radial ball (mu = x^{N-1}).  A shooting
// scan brackets the boundary value, bisection locates it, and a damped Newton
// iteration on the discrete divergence-form system polishes the profile so
// that every downstream module sees grid-consistent residuals.

#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "fdx/grid.hpp"
#include "fdx/linalg.hpp"
#include "fdx/util.hpp"

namespace fdx {

struct StationaryState {
  GridPtr grid;
  Field V;          // positive at interior nodes, 0 at Dirichlet boundary nodes
  double p = 2.0;
  double s = 0.0;   // shooting parameter: V'(0) on the interval, V(0) on the ball
  double residual = 0.0;  // scaled max residual of the discrete system
};

namespace detail {

// RHS of the radial ODE V'' = -V^p - (N-1)/x V', with the removable
// singularity at x = 0 handled by the symmetric limit V''(0) = -V(0)^p / N.
inline double ode_rhs(double x, double y, double z, double p, int N) {
  double f = -sign_pow(y, p);
  if (N > 1) {
    if (x > 0.0)
      f -= (N - 1) * z / x;
    else
      f = -sign_pow(y, p) / N;
  }
  return f;
}

}  // namespace detail

/// Integrates the shooting ODE across the grid nodes with classic RK4 and
/// returns the (signed) endpoint value V(1).  Interval: V(0)=0, V'(0)=s.
/// Ball: V(0)=s, V'(0)=0.  The nonlinearity is continued oddly through zero
/// so the return value changes sign across the shooting root.
inline double shoot(double p, double s, const Grid& grid, std::vector<double>* profile = nullptr,
                    std::vector<double>* slope = nullptr) {
  if (!(s > 0.0)) throw std::invalid_argument("shoot: shooting parameter s must be positive");
  const int N = grid.dimension;
  const bool ball = grid.kind == DomainKind::RadialBall;
  double y = ball ? s : 0.0;
  double z = ball ? 0.0 : s;
  if (profile) {
    profile->assign(grid.n(), 0.0);
    (*profile)[0] = y;
  }
  if (slope) {
    slope->assign(grid.n(), 0.0);
    (*slope)[0] = z;
  }
  for (int i = 0; i + 1 < grid.n(); ++i) {
    double x = grid.x[i];
    double h = grid.x[i + 1] - x;
    double k1y = z, k1z = detail::ode_rhs(x, y, z, p, N);
    double k2y = z + 0.5 * h * k1z,
           k2z = detail::ode_rhs(x + 0.5 * h, y + 0.5 * h * k1y, z + 0.5 * h * k1z, p, N);
    double k3y = z + 0.5 * h * k2z,
           k3z = detail::ode_rhs(x + 0.5 * h, y + 0.5 * h * k2y, z + 0.5 * h * k2z, p, N);
    double k4y = z + h * k3z, k4z = detail::ode_rhs(x + h, y + h * k3y, z + h * k3z, p, N);
    y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    if (profile) (*profile)[i + 1] = y;
    if (slope) (*slope)[i + 1] = z;
  }
  return y;
}

namespace detail {

// Face weights mu_f / dx_f of the plain weighted Laplacian -(mu V')'.
inline std::vector<double> laplace_faces(const Grid& g) {
  const int n = g.n();
  std::vector<double> w(n - 1);
  for (int f = 0; f + 1 < n; ++f) {
    double xm = 0.5 * (g.x[f] + g.x[f + 1]);
    double muf = g.kind == DomainKind::Interval ? 1.0 : std::pow(xm, g.dimension - 1);
    w[f] = muf / (g.x[f + 1] - g.x[f]);
  }
  return w;
}

// Residual of the discrete stationary system.  Dirichlet rows at boundary
// nodes carry the value itself; the ball center keeps its natural flux row.
inline void stationary_residual(const Grid& g, const std::vector<double>& w,
                                const std::vector<double>& V, double p, std::vector<double>& F) {
  const int n = g.n();
  F.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (g.is_boundary(i)) {
      F[i] = V[i];
      continue;
    }
    double a = 0.0;
    if (i > 0) a += w[i - 1] * (V[i] - V[i - 1]);
    if (i + 1 < n) a += w[i] * (V[i] - V[i + 1]);
    F[i] = a - g.q[i] * g.mu[i] * sign_pow(V[i], p);
  }
}

}  // namespace detail

/// Solves the stationary problem on the given grid: bisection on the shooting
/// parameter, then damped Newton on the full discrete nonlinear system.
inline StationaryState solve_stationary(double p, GridPtr grid, double tol = 1e-10) {
  const Grid& g = *grid;
  const int N = g.dimension;
  if (N >= 3) {
    double pc = static_cast<double>(N + 2) / (N - 2);
    if (!(p > 1.0 && p < pc))
      throw std::invalid_argument("solve_stationary: p outside admissible range (1,(N+2)/(N-2))");
  } else if (!(p > 1.0)) {
    throw std::invalid_argument("solve_stationary: p must exceed 1");
  }

  // Bracket by doubling; the endpoint value is positive for small s
  // (diffusion dominates) and first turns negative once the nonlinearity
  // kills the profile.  The first crossing is the positive ground state;
  // later sign changes of the oddly continued shot belong to sign-changing
  // profiles and are ignored.
  const double s_min = 1e-3, s_max = 1e3;
  double lo = s_min, hi = 0.0;
  double prev_f = shoot(p, lo, g);
  if (prev_f <= 0.0) throw std::runtime_error("solve_stationary: bracketing failure at s = 1e-3");
  double prev_s = lo;
  for (double s = 2.0 * s_min; s <= s_max; s *= 2.0) {
    double f = shoot(p, s, g);
    if (f <= 0.0) {
      lo = prev_s;
      hi = s;
      break;
    }
    prev_s = s;
    prev_f = f;
  }
  if (hi == 0.0)
    throw std::runtime_error("solve_stationary: bracketing failure, no sign change for s in [1e-3,1e3]");

  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shoot(p, mid, g) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  double s_star = 0.5 * (lo + hi);
  // transversality at the root: the endpoint strictly decreases across s*
  if (!(shoot(p, s_star * (1.0 - 1e-5), g) > 0.0 && shoot(p, s_star * (1.0 + 1e-5), g) < 0.0))
    throw std::runtime_error("solve_stationary: shooting root is not a transversal sign change");

  std::vector<double> V;
  shoot(p, s_star, g, &V);
  for (int i = 0; i < g.n(); ++i) {
    if (g.is_boundary(i))
      V[i] = 0.0;
    else
      V[i] = std::max(V[i], 1e-14);
  }

  // Newton with positive-part damping on the interior values.
  auto w = detail::laplace_faces(g);
  const int n = g.n();
  std::vector<double> F, dV;
  double resid = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int it = 0; it < 50; ++it) {
    detail::stationary_residual(g, w, V, p, F);
    // relative strong-form residual: |F_i| against the local source magnitude
    resid = 0.0;
    for (int i = 0; i < n; ++i) {
      if (g.is_boundary(i)) continue;
      double scale = g.q[i] * g.mu[i] * (1.0 + std::pow(std::abs(V[i]), p));
      resid = std::max(resid, scale > 0.0 ? std::abs(F[i]) / scale : std::abs(F[i]));
    }
    if (resid <= tol) {
      converged = true;
      break;
    }
    // Tridiagonal Jacobian rows; Dirichlet rows are the identity.
    std::vector<double> sub(n - 1, 0.0), diag(n, 0.0), sup(n - 1, 0.0), rhs(n);
    for (int i = 0; i < n; ++i) {
      rhs[i] = -F[i];
      if (g.is_boundary(i)) {
        diag[i] = 1.0;
        continue;
      }
      double dsum = 0.0;
      if (i > 0) {
        dsum += w[i - 1];
        sub[i - 1] = -w[i - 1];
      }
      if (i + 1 < n) {
        dsum += w[i];
        sup[i] = -w[i];
      }
      diag[i] = dsum - g.q[i] * g.mu[i] * p * std::pow(std::max(V[i], 1e-300), p - 1.0);
    }
    // zero the couplings out of Dirichlet rows
    for (int i = 0; i < n; ++i) {
      if (!g.is_boundary(i)) continue;
      if (i > 0) sub[i - 1] = 0.0;
      if (i + 1 < n) sup[i] = 0.0;
    }
    dV = tridiag_solve(sub, diag, sup, rhs);
    double alpha = 1.0;
    auto positive_after = [&](double a) {
      for (int i = 0; i < n; ++i)
        if (!g.is_boundary(i) && V[i] + a * dV[i] <= 0.0) return false;
      return true;
    };
    while (!positive_after(alpha) && alpha > 1e-8) alpha *= 0.5;
    if (alpha <= 1e-8) throw std::runtime_error("solve_stationary: Newton damping failed to keep V positive");
    for (int i = 0; i < n; ++i) V[i] = g.is_boundary(i) ? 0.0 : V[i] + alpha * dV[i];
  }
  if (!converged) throw std::runtime_error("solve_stationary: Newton stagnation after 50 iterations");

  StationaryState st;
  st.grid = grid;
  st.V = Field(grid, std::move(V));
  st.p = p;
  st.s = s_star;
  st.residual = resid;
  return st;
}

struct BoundaryComparability {
  double c_low = 0.0;
  double c_high = 0.0;
};

/// min and max over interior nodes of V_i / dist(x_i, boundary); bounded above
/// and below because the stationary state decays linearly toward the boundary.
inline BoundaryComparability boundary_comparability(const StationaryState& st) {
  const Grid& g = *st.grid;
  BoundaryComparability c;
  c.c_low = std::numeric_limits<double>::infinity();
  c.c_high = 0.0;
  for (int i = 0; i < g.n(); ++i) {
    if (g.is_boundary(i)) continue;
    double d = g.dist(i);
    if (d <= 0.0) continue;
    double r = st.V[i] / d;
    c.c_low = std::min(c.c_low, r);
    c.c_high = std::max(c.c_high, r);
  }
  return c;
}

inline double max_value(const StationaryState& st) {
  double m = 0.0;
  for (double t : st.V.v) m = std::max(m, t);
  return m;
}

/// One-sided second-order estimate of V'(1) from the discrete profile.
inline double boundary_slope(const StationaryState& st) {
  Field dV = gradient(st.V);
  return dV[st.grid->n() - 1];
}

/// CSV with columns x,V.
inline void write_state_csv(const StationaryState& st, std::ostream& os) {
  os << "x,V\n";
  os.precision(17);
  for (int i = 0; i < st.grid->n(); ++i) os << st.grid->x[i] << ',' << st.V[i] << '\n';
}

}  // namespace fdx
