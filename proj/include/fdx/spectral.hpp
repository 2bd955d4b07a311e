#pragma once

// The weighted linearized operator around a stationary state,
//   L h = -V^{-1-p} div(V^2 grad h) - (p-1) h,
// assembled in divergence form so the constant field is an exact discrete
// eigenfunction with eigenvalue 1-p.  Spectrum and projections come from a
// dense symmetric eigensolve of the spectrally transformed problem; the
// split semigroups and the Lambda ladder of gap parameters live here too.
//
// The weak form is  <L h, g>_{p+1} = A[h,g] - (p-1) B[h,g]  with
//   A[h,g] = sum_f w_f (h_{i+1}-h_i)(g_{i+1}-g_i),   w_f = mu_f V_f^2 / dx_f,
//   B[h,g] = sum_i q_i mu_i V_i^{p+1} h_i g_i,
// V_f the geometric mean of the nodal values.  No Dirichlet rows are imposed:
// the degenerate weight enforces the natural closure, and nodes with zero
// B-weight (boundary, ball center) are slaved to their nearest interior
// neighbour when a pointwise operator value is requested.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "fdx/grid.hpp"
#include "fdx/linalg.hpp"
#include "fdx/stationary.hpp"

namespace fdx {

struct OperatorAssembly {
  GridPtr grid;
  std::shared_ptr<const StationaryState> state;
  double p = 2.0;
  std::vector<double> face_w;  // w_f, size n-1
  std::vector<double> b;       // B_ii, size n
  int ilo = 0, ihi = 0;        // contiguous range of nodes with B_ii > 0

  double shift() const { return p - 1.0; }
  int n() const { return grid->n(); }

  /// (A h)_i of the stiffness form; exact zero on constants by telescoping.
  void apply_A(const std::vector<double>& h, std::vector<double>& out) const {
    const int nn = n();
    out.assign(nn, 0.0);
    for (int i = 0; i < nn; ++i) {
      double a = 0.0;
      if (i > 0) a += face_w[i - 1] * (h[i] - h[i - 1]);
      if (i + 1 < nn) a += face_w[i] * (h[i] - h[i + 1]);
      out[i] = a;
    }
  }

  double form_A(const Field& u, const Field& v) const {
    double s = 0.0;
    for (int f = 0; f + 1 < n(); ++f)
      s += face_w[f] * ((u[f + 1] - u[f]) * (v[f + 1] - v[f]));
    return s;
  }

  double form_B(const Field& u, const Field& v) const {
    double s = 0.0;
    for (int i = 0; i < n(); ++i) s += b[i] * u[i] * v[i];
    return s;
  }

  /// <L u, v>_{p+1} through the forms.
  double form_L(const Field& u, const Field& v) const {
    return form_A(u, v) - shift() * form_B(u, v);
  }

  /// Pointwise action (L h)_i; values at zero-weight nodes are the natural
  /// closure (copied from the nearest node carrying weight).
  Field apply_L(const Field& h) const {
    std::vector<double> Ah;
    apply_A(h.v, Ah);
    Field out(h.grid);
    for (int i = ilo; i <= ihi; ++i) out[i] = Ah[i] / b[i] - shift() * h[i];
    for (int i = 0; i < ilo; ++i) out[i] = out[ilo];
    for (int i = ihi + 1; i < n(); ++i) out[i] = out[ihi];
    return out;
  }
};

/// Builds the divergence-form assembly around a solved stationary state.
inline OperatorAssembly assemble(std::shared_ptr<const StationaryState> state, GridPtr grid) {
  if (!state || state->grid != grid)
    throw std::invalid_argument("assemble: state does not live on the given grid");
  const Grid& g = *grid;
  const int n = g.n();
  for (int i = 0; i < n; ++i) {
    bool bnd = g.is_boundary(i);
    if (!bnd && !(state->V[i] > 0.0))
      throw std::invalid_argument("assemble: unsolved state (V not positive at an interior node)");
    if (bnd && state->V[i] != 0.0)
      throw std::invalid_argument("assemble: unsolved state (V nonzero at a boundary node)");
  }

  OperatorAssembly a;
  a.grid = grid;
  a.state = std::move(state);
  a.p = a.state->p;
  a.face_w.resize(n - 1);
  for (int f = 0; f + 1 < n; ++f) {
    double xm = 0.5 * (g.x[f] + g.x[f + 1]);
    double muf = g.kind == DomainKind::Interval ? 1.0 : std::pow(xm, g.dimension - 1);
    double vf = std::sqrt(std::max(0.0, a.state->V[f] * a.state->V[f + 1]));
    a.face_w[f] = muf * vf * vf / (g.x[f + 1] - g.x[f]);
  }
  a.b.resize(n);
  for (int i = 0; i < n; ++i) a.b[i] = g.q[i] * g.mu[i] * std::pow(a.state->V[i], a.p + 1.0);

  int lo = 0;
  while (lo < n && a.b[lo] <= 0.0) ++lo;
  int hi = n - 1;
  while (hi >= 0 && a.b[hi] <= 0.0) --hi;
  if (lo > hi) throw std::runtime_error("assemble: no nodes carry weight");
  for (int i = lo; i <= hi; ++i)
    if (a.b[i] <= 0.0) throw std::runtime_error("assemble: weighted node set not contiguous");
  a.ilo = lo;
  a.ihi = hi;
  return a;
}

struct SpectralDecomposition {
  GridPtr grid;
  std::shared_ptr<const StationaryState> state;
  double p = 2.0;
  int kmax = 0;
  std::vector<double> lambda;  // ascending
  std::vector<Field> phi;      // B-orthonormal eigenfields
  std::vector<double> bw;      // B_ii quadrature weights of the eigenbasis
  double residual_max = 0.0;   // worst relative eigenpair residual
  double merge_tol = 1e-9;     // multiplicity-merging tolerance

  // contiguous copies of phi_k and B phi_k (row k holds one field)
  std::vector<double> flat_phi;
  std::vector<double> flat_bphi;

  void build_flat() {
    const int n = grid->n();
    flat_phi.assign(static_cast<std::size_t>(kmax) * n, 0.0);
    flat_bphi.assign(static_cast<std::size_t>(kmax) * n, 0.0);
    for (int k = 0; k < kmax; ++k)
      for (int i = 0; i < n; ++i) {
        flat_phi[static_cast<std::size_t>(k) * n + i] = phi[k][i];
        flat_bphi[static_cast<std::size_t>(k) * n + i] = bw[i] * phi[k][i];
      }
  }

  // four-lane dot: breaks the summation latency chain, fixed order
  static double dot4(const double* __restrict a, const double* __restrict b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
      s0 += a[i] * b[i];
      s1 += a[i + 1] * b[i + 1];
      s2 += a[i + 2] * b[i + 2];
      s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
  }

  double inner_b(const Field& u, const Field& v) const {
    const int n = u.n();
    const double* __restrict bp = bw.data();
    const double* __restrict uv = u.v.data();
    const double* __restrict vv = v.v.data();
    double s0 = 0.0, s1 = 0.0;
    int i = 0;
    for (; i + 2 <= n; i += 2) {
      s0 += bp[i] * uv[i] * vv[i];
      s1 += bp[i + 1] * uv[i + 1] * vv[i + 1];
    }
    for (; i < n; ++i) s0 += bp[i] * uv[i] * vv[i];
    return s0 + s1;
  }
  double norm_b(const Field& u) const { return std::sqrt(std::max(0.0, inner_b(u, u))); }

  double coef_k(const Field& h, int k) const {
    const int n = h.n();
    return dot4(flat_bphi.data() + static_cast<std::size_t>(k) * n, h.v.data(), n);
  }

  void coef_into(const Field& h, double* __restrict c) const {
    for (int k = 0; k < kmax; ++k) c[k] = coef_k(h, k);
  }

  std::vector<double> coef(const Field& h) const {
    std::vector<double> c(kmax);
    coef_into(h, c.data());
    return c;
  }

  /// out += sum_k c_k phi_k
  void add_recon(const double* __restrict c, int count, Field& out) const {
    const int n = out.n();
    double* __restrict ov = out.v.data();
    for (int k = 0; k < count; ++k) {
      if (c[k] == 0.0) continue;
      const double* __restrict pk = flat_phi.data() + static_cast<std::size_t>(k) * n;
      double ck = c[k];
      for (int i = 0; i < n; ++i) ov[i] += ck * pk[i];
    }
  }

  Field reconstruct(const std::vector<double>& c) const {
    Field out(grid);
    add_recon(c.data(), static_cast<int>(c.size()), out);
    return out;
  }

  /// Removes the resolved component in place (leaves the spectral tail).
  void deflate(Field& f) const {
    std::vector<double> c(kmax);
    coef_into(f, c.data());
    for (double& t : c) t = -t;
    add_recon(c.data(), kmax, f);
  }

  /// Component of h outside the resolved eigenbasis window.
  Field tail(const Field& h) const {
    Field t = h;
    deflate(t);
    return t;
  }

  /// Distinct eigenvalues after merging within merge_tol.
  std::vector<double> distinct_eigenvalues() const {
    std::vector<double> out;
    for (double l : lambda) {
      if (out.empty() || l - out.back() > merge_tol * std::max(1.0, std::abs(out.back())))
        out.push_back(l);
    }
    return out;
  }
};

/// Solves the generalized symmetric problem A phi = nu B phi restricted to the
/// weighted nodes and returns the k_max lowest eigenpairs of L with
/// lambda_k = nu_k - (p-1).  The exactly known kernel pair of A (constant
/// field, nu = 0, i.e. lambda = 1-p) is deflated structurally and returned as
/// the first pair; the rest come from a dense symmetric eigensolve of
///   H = B^{1/2} (A + B)^{-1} B^{1/2},
/// whose top of spectrum maps to the bottom of nu with near-machine accuracy.
inline SpectralDecomposition eigen(const OperatorAssembly& a, int k_max) {
  const int n = a.n();
  if (k_max < 1 || k_max > n - 2)
    throw std::invalid_argument("eigen: require 1 <= k_max <= n-2");
  const int m = a.ihi - a.ilo + 1;
  if (k_max > m) throw std::invalid_argument("eigen: k_max exceeds weighted node count");

  // Reduced stiffness over faces interior to the weighted range (this is the
  // Schur complement of the slaved zero-weight nodes).
  SymTridiag ab;  // A_red + B_red
  ab.d.assign(m, 0.0);
  ab.e.assign(m - 1, 0.0);
  for (int f = a.ilo; f < a.ihi; ++f) {
    int j = f - a.ilo;
    ab.d[j] += a.face_w[f];
    ab.d[j + 1] += a.face_w[f];
    ab.e[j] -= a.face_w[f];
  }
  std::vector<double> bred(m), bsqrt(m);
  for (int j = 0; j < m; ++j) {
    bred[j] = a.b[a.ilo + j];
    bsqrt[j] = std::sqrt(bred[j]);
    ab.d[j] += bred[j];
  }
  auto chol = TridiagCholesky::factor(ab);

  DenseSym H(m);
  {
    std::vector<double> col(m);
    for (int j = 0; j < m; ++j) {
      std::fill(col.begin(), col.end(), 0.0);
      col[j] = bsqrt[j];
      chol.solve(col);
      for (int i = 0; i < m; ++i) H.at(i, j) = bsqrt[i] * col[i];
    }
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        double s = 0.5 * (H.at(i, j) + H.at(j, i));
        H.at(i, j) = s;
        H.at(j, i) = s;
      }
  }

  // Deflate the exact constant-mode eigenvector u = B^{1/2} 1 (H u = u).
  std::vector<double> u(m);
  {
    double nrm = 0.0;
    for (int j = 0; j < m; ++j) nrm += bred[j];
    nrm = std::sqrt(nrm);
    for (int j = 0; j < m; ++j) u[j] = bsqrt[j] / nrm;
    std::vector<double> Hu(m, 0.0);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += H.at(i, j) * u[j];
      Hu[i] = s;
    }
    double uHu = 0.0;
    for (int i = 0; i < m; ++i) uHu += u[i] * Hu[i];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        H.at(i, j) += -u[i] * Hu[j] - Hu[i] * u[j] + uHu * u[i] * u[j];
  }

  std::vector<double> gval;
  sym_eigen(H, gval);
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return gval[i] > gval[j]; });

  SpectralDecomposition dec;
  dec.grid = a.grid;
  dec.state = a.state;
  dec.p = a.p;
  dec.kmax = k_max;
  dec.bw = a.b;
  dec.lambda.reserve(k_max);
  dec.phi.reserve(k_max);

  {  // exact structural pair: constant eigenfield, lambda = 1 - p
    double btot = 0.0;
    for (double t : a.b) btot += t;
    Field c(a.grid, 1.0 / std::sqrt(btot));
    dec.lambda.push_back(1.0 - a.p);
    dec.phi.push_back(std::move(c));
  }

  for (int r = 0; r < m && static_cast<int>(dec.phi.size()) < k_max; ++r) {
    double g = gval[order[r]];
    if (!(g > 1e-14)) break;  // deflated direction / numerical zeros
    double nu = 1.0 / g - 1.0;
    Field f(a.grid);
    for (int j = 0; j < m; ++j) f[a.ilo + j] = H.at(j, order[r]) / bsqrt[j];
    for (int i = 0; i < a.ilo; ++i) f[i] = f[a.ilo];
    for (int i = a.ihi + 1; i < n; ++i) f[i] = f[a.ihi];
    dec.lambda.push_back(nu - (a.p - 1.0));
    dec.phi.push_back(std::move(f));
  }
  if (static_cast<int>(dec.phi.size()) < k_max)
    throw std::runtime_error("eigen: fewer usable eigenpairs than requested k_max");

  // B-orthonormalize (two MGS passes) in ascending order.
  for (int k = 0; k < k_max; ++k) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < k; ++j) dec.phi[k].axpy(-dec.inner_b(dec.phi[k], dec.phi[j]), dec.phi[j]);
    double nrm = dec.norm_b(dec.phi[k]);
    if (!(nrm > 0.0)) throw std::runtime_error("eigen: degenerate eigenfield");
    dec.phi[k] *= 1.0 / nrm;
  }

  // Relative residuals of the generalized problem.
  double worst = 0.0;
  std::vector<double> Ah;
  for (int k = 0; k < k_max; ++k) {
    a.apply_A(dec.phi[k].v, Ah);
    double nu = dec.lambda[k] + (a.p - 1.0);
    double rnum = 0.0, rden = 0.0;
    for (int j = a.ilo; j <= a.ihi; ++j) {
      double res = Ah[j] - nu * a.b[j] * dec.phi[k][j];
      rnum += res * res;
      double sc = std::abs(Ah[j]) + std::abs(nu) * a.b[j] * std::abs(dec.phi[k][j]);
      rden += sc * sc;
    }
    worst = std::max(worst, std::sqrt(rnum) / (std::sqrt(rden) + 1e-300));
  }
  dec.residual_max = worst;
  if (!(worst <= 1e-8)) throw std::runtime_error("eigen: eigenpair residual exceeds 1e-8");

  for (int k = 0; k + 1 < k_max; ++k)
    if (!(dec.lambda[k] <= dec.lambda[k + 1]))
      throw std::runtime_error("eigen: eigenvalues not sorted");
  dec.build_flat();
  return dec;
}

/// Orthogonal split h = h_c + h_s against the cut index K (1-based count of
/// center modes).  The spectral tail beyond k_max lives in h_s.
struct ProjectionSplit {
  Field h_c;
  Field h_s;
};

inline ProjectionSplit project(const SpectralDecomposition& dec, int K, const Field& h) {
  if (K < 1 || K >= dec.kmax) throw std::invalid_argument("project: require 1 <= K < k_max");
  ProjectionSplit out{Field(h.grid), h};
  for (int k = 0; k < K; ++k) {
    double c = dec.coef_k(h, k);
    out.h_c.axpy(c, dec.phi[k]);
    out.h_s.axpy(-c, dec.phi[k]);
  }
  return out;
}

namespace detail {
inline void warn_semigroup_tail(double rel) {
  static std::atomic<int> count{0};
  if (count.fetch_add(1) < 3)
    std::cerr << "fdx warning: semigroup input has unresolved spectral tail (rel " << rel << ")\n";
}
}  // namespace detail

/// e^{-L t} h through the eigenbasis: sum_k e^{-lambda_k t} <h,phi_k> phi_k.
/// The component outside the basis is dropped (warned about when sizable).
inline Field semigroup(const SpectralDecomposition& dec, double t, const Field& h) {
  if (t < 0.0)
    throw std::invalid_argument("semigroup: negative time rejected (use invert_center on E_c)");
  std::vector<double> c = dec.coef(h);
  Field recon = dec.reconstruct(c);
  {
    Field tl = h;
    tl -= recon;
    double hn = dec.norm_b(h);
    double tn = dec.norm_b(tl);
    if (tn > 1e-8 * std::max(hn, 1e-30)) detail::warn_semigroup_tail(tn / std::max(hn, 1e-30));
  }
  Field out(h.grid);
  for (int k = 0; k < dec.kmax; ++k) {
    double ek = std::exp(-dec.lambda[k] * t) * c[k];
    if (ek != 0.0) out.axpy(ek, dec.phi[k]);
  }
  return out;
}

/// L_c^{-1} f for f in the center subspace E_c (stable component must vanish).
inline Field invert_center(const SpectralDecomposition& dec, int K, const Field& f) {
  if (K < 1 || K >= dec.kmax) throw std::invalid_argument("invert_center: require 1 <= K < k_max");
  ProjectionSplit sp = project(dec, K, f);
  double stable = dec.norm_b(sp.h_s);
  if (stable > 1e-10 * std::max(1.0, dec.norm_b(f)))
    throw std::invalid_argument("invert_center: input has nontrivial stable component");
  Field out(f.grid);
  for (int k = 0; k < K; ++k) {
    if (dec.lambda[k] > 700.0) throw std::runtime_error("invert_center: exponent overflow");
    out.axpy(std::exp(dec.lambda[k]) * dec.coef_k(f, k), dec.phi[k]);
  }
  return out;
}

/// The Lambda ladder and the contraction budget of the gap inequality.
struct GapParameters {
  int K = 1;                 // cut index
  double lambda_plus = 0.0;  // < lambda_1
  double lambda_minus = 0.0; // in (lambda_K, lambda_{K+1})
  double Lambda_plus = 0.0, Lambda_max = 0.0, Lambda_c = 0.0, Lambda_minus = 0.0, Lambda_s = 0.0;
  double eps_gap = 0.0;
  double K_contr = 0.0;  // max of the three gap ratios, < 1

  /// Ladder ordering Lambda_s < Lambda_- < Lambda_c <= Lambda_max < Lambda_+.
  /// The middle link is an equality exactly when K = 1 (lambda_K = lambda_1).
  bool ladder_ok() const {
    bool mid = (K == 1) ? (Lambda_c <= Lambda_max) : (Lambda_c < Lambda_max);
    return Lambda_s < Lambda_minus && Lambda_minus < Lambda_c && mid && Lambda_max < Lambda_plus;
  }
};

/// max of the three gap ratios at a given eps; the contraction constant of
/// the sequence-space fixed-point maps.
inline double kcontr_at(const GapParameters& g, double eps) {
  double r1 = (g.Lambda_max + eps) / g.Lambda_plus;
  double r2 = (g.Lambda_s + eps) / g.Lambda_minus;
  double r3 = (g.Lambda_minus + eps) / g.Lambda_c;
  return std::max(r1, std::max(r2, r3));
}

/// Chooses lambda_- as the gap midpoint (overridable inside the gap: steep
/// gaps need a smaller lambda_- or the backward ladder weights amplify
/// rounding noise past the data), lambda_+ = lambda_1 - 1, and solves the gap
/// inequality in closed form for the largest eps_gap whose contraction
/// constant does not exceed the target.
inline GapParameters gap_parameters(const SpectralDecomposition& dec, int K, double target_Kcontr,
                                    double lambda_minus_override = std::nan("")) {
  if (K < 1 || K >= dec.kmax) throw std::invalid_argument("gap_parameters: require 1 <= K < k_max");
  if (!(target_Kcontr > 0.0 && target_Kcontr < 1.0))
    throw std::invalid_argument("gap_parameters: target contraction must lie in (0,1)");
  double lK = dec.lambda[K - 1], lK1 = dec.lambda[K];
  if (!(lK1 - lK >= 1e-6))
    throw std::invalid_argument("gap_parameters: degenerate gap (eigenvalue multiplicity at the cut)");

  GapParameters g;
  g.K = K;
  g.lambda_minus = 0.5 * (lK + lK1);
  if (!std::isnan(lambda_minus_override)) {
    if (!(lambda_minus_override > lK && lambda_minus_override < lK1))
      throw std::invalid_argument("gap_parameters: lambda_- must lie in (lambda_K, lambda_{K+1})");
    g.lambda_minus = lambda_minus_override;
  }
  g.lambda_plus = dec.lambda[0] - 1.0;
  g.Lambda_plus = std::exp(-g.lambda_plus);
  g.Lambda_max = std::exp(-dec.lambda[0]);
  g.Lambda_c = std::exp(-lK);
  g.Lambda_minus = std::exp(-g.lambda_minus);
  g.Lambda_s = std::exp(-lK1);

  double e1 = target_Kcontr * g.Lambda_plus - g.Lambda_max;
  double e2 = target_Kcontr * g.Lambda_minus - g.Lambda_s;
  double e3 = target_Kcontr * g.Lambda_c - g.Lambda_minus;
  g.eps_gap = std::min(e1, std::min(e2, e3));
  if (!(g.eps_gap > 0.0))
    throw std::runtime_error("gap_parameters: target contraction below the zero-eps ratio");
  g.K_contr = kcontr_at(g, g.eps_gap);
  if (!(g.K_contr < 1.0)) throw std::runtime_error("gap_parameters: contraction constant not below 1");
  if (!g.ladder_ok()) throw std::runtime_error("gap_parameters: Lambda ladder ordering violated");
  return g;
}

/// CSV with columns k,lambda_k.
inline void write_spectrum_csv(const SpectralDecomposition& dec, std::ostream& os) {
  os << "k,lambda_k\n";
  os.precision(17);
  for (int k = 0; k < dec.kmax; ++k) os << (k + 1) << ',' << dec.lambda[k] << '\n';
}

/// CSV with columns x,phi_1,...,phi_kmax.
inline void write_eigenfields_csv(const SpectralDecomposition& dec, std::ostream& os) {
  os << "x";
  for (int k = 0; k < dec.kmax; ++k) os << ",phi_" << (k + 1);
  os << '\n';
  os.precision(17);
  for (int i = 0; i < dec.grid->n(); ++i) {
    os << dec.grid->x[i];
    for (int k = 0; k < dec.kmax; ++k) os << ',' << dec.phi[k][i];
    os << '\n';
  }
}

}  // namespace fdx
