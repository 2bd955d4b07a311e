#pragma once

// Time integration of the truncated and untruncated relative-error flows.
//
// The workhorse is an exponential midpoint integrator in the eigenbasis of L:
// the resolved coefficients are advanced by the exact semigroup plus a
// phi1-weighted source, and the spectral tail (beyond k_max) by implicit
// Euler, which is exactly compatible with the eigenbasis so the two
// components never mix.  A Picard/Duhamel fixed-point solver reproduces the
// existence proof of the truncated problem and serves as an independent
// oracle for the stepping scheme.  The module also carries the time-one map
// S^eps, its remainder R^eps = S^eps - e^{-L}, the demo solver for the
// original fast-diffusion flow, and small fitting/monitoring helpers.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "fdx/grid.hpp"
#include "fdx/linalg.hpp"
#include "fdx/nonlinearity.hpp"
#include "fdx/spectral.hpp"
#include "fdx/util.hpp"

namespace fdx {

struct FlowError : std::runtime_error {
  double t;
  FlowError(const std::string& what, double t_) : std::runtime_error(what), t(t_) {}
};

struct FlowOptions {
  double dt = 1.0 / 256;
  bool truncated = true;
  TruncationConfig trunc{};
};

namespace detail {

// Implicit Euler system ((1-(p-1)dt) B + dt A) on the weighted nodes, with
// natural closure outside.  Exact on the eigenbasis complement.
struct TailSolve {
  const OperatorAssembly* a = nullptr;
  double dt = 0.0;
  TridiagCholesky chol;

  TailSolve() = default;
  TailSolve(const OperatorAssembly& asmb, double dt_) : a(&asmb), dt(dt_) {
    double c = 1.0 - (asmb.p - 1.0) * dt;
    if (!(c > 0.0)) throw std::invalid_argument("step_truncated: dt too large for the tail solve");
    const int m = asmb.ihi - asmb.ilo + 1;
    SymTridiag t;
    t.d.assign(m, 0.0);
    t.e.assign(m - 1, 0.0);
    for (int f = asmb.ilo; f < asmb.ihi; ++f) {
      int j = f - asmb.ilo;
      t.d[j] += dt * asmb.face_w[f];
      t.d[j + 1] += dt * asmb.face_w[f];
      t.e[j] -= dt * asmb.face_w[f];
    }
    for (int j = 0; j < m; ++j) t.d[j] += c * asmb.b[asmb.ilo + j];
    chol = TridiagCholesky::factor(t);
  }

  // solves ((1-(p-1)dt)B + dt A) x = B r
  Field apply(const Field& r) const {
    const int m = a->ihi - a->ilo + 1;
    std::vector<double> rhs(m);
    for (int j = 0; j < m; ++j) rhs[j] = a->b[a->ilo + j] * r[a->ilo + j];
    chol.solve(rhs);
    Field x(r.grid);
    for (int j = 0; j < m; ++j) x[a->ilo + j] = rhs[j];
    for (int i = 0; i < a->ilo; ++i) x[i] = x[a->ilo];
    for (int i = a->ihi + 1; i < r.n(); ++i) x[i] = x[a->ihi];
    return x;
  }
};

}  // namespace detail

/// One-step integrator for  dh/dt + L h = M^eps[h]  (or the untruncated M).
class Stepper {
 public:
  Stepper(std::shared_ptr<const SpectralDecomposition> dec,
          std::shared_ptr<const OperatorAssembly> asmb, FlowOptions opt)
      : dec_(std::move(dec)), asmb_(std::move(asmb)), nl_(asmb_), opt_(opt) {
    if (!(opt_.dt > 0.0 && opt_.dt <= 0.1))
      throw std::invalid_argument("step_truncated: dt must lie in (0, 0.1]");
    if (opt_.truncated) opt_.trunc.validate();
    prepare(opt_.dt, exp_full_, ph1_full_);
    prepare(0.5 * opt_.dt, exp_half_, ph1_half_);
    tail_full_ = detail::TailSolve(*asmb_, opt_.dt);
    tail_half_ = detail::TailSolve(*asmb_, 0.5 * opt_.dt);
  }

  const FlowOptions& options() const { return opt_; }
  const SpectralDecomposition& decomposition() const { return *dec_; }
  const OperatorAssembly& assembly() const { return *asmb_; }
  const Nonlinearity& nonlinearity() const { return nl_; }

  Field rhs(const Field& h) const {
    return opt_.truncated ? nl_.eval_M_trunc(h, opt_.trunc) : nl_.eval_M(h);
  }

  /// One step of size dt (exponential midpoint on the resolved coefficients,
  /// implicit Euler on the tail).
  Field step(const Field& h) const {
    const int K = dec_->kmax;
    std::vector<double> c(K), cm(K), work(K);

    dec_->coef_into(h, c.data());
    Field tail = h;
    for (int k = 0; k < K; ++k) work[k] = -c[k];
    dec_->add_recon(work.data(), K, tail);

    Field m = rhs(h);
    check_finite(m);
    dec_->coef_into(m, cm.data());
    for (int k = 0; k < K; ++k) work[k] = -cm[k];
    dec_->add_recon(work.data(), K, m);  // m is now the tail part of the source

    // midpoint predictor (the tail solve leaves only rounding-level residue
    // on the resolved modes, which the next coefficient pass re-absorbs)
    Field hmid = tail;
    hmid.axpy(0.5 * opt_.dt, m);
    hmid = tail_half_.apply(hmid);
    for (int k = 0; k < K; ++k)
      work[k] = exp_half_[k] * c[k] + 0.5 * opt_.dt * ph1_half_[k] * cm[k];
    dec_->add_recon(work.data(), K, hmid);

    Field mmid = rhs(hmid);
    check_finite(mmid);
    dec_->coef_into(mmid, cm.data());
    for (int k = 0; k < K; ++k) work[k] = -cm[k];
    dec_->add_recon(work.data(), K, mmid);  // tail part of the midpoint source

    Field out = tail;
    out.axpy(opt_.dt, mmid);
    out = tail_full_.apply(out);
    for (int k = 0; k < K; ++k) work[k] = exp_full_[k] * c[k] + opt_.dt * ph1_full_[k] * cm[k];
    dec_->add_recon(work.data(), K, out);
    return out;
  }

  /// Flow over time t >= 0 by composing fixed-dt steps (plus one smaller
  /// closing step when t is not a multiple of dt).
  Field flow(Field h, double t) const {
    if (t < 0.0) throw std::invalid_argument("flow: negative time");
    long nsteps = std::lround(t / opt_.dt);
    if (std::abs(nsteps * opt_.dt - t) < 1e-12) {
      for (long s = 0; s < nsteps; ++s) h = step(h);
      return h;
    }
    nsteps = static_cast<long>(t / opt_.dt);
    for (long s = 0; s < nsteps; ++s) h = step(h);
    double rem = t - nsteps * opt_.dt;
    if (rem > 1e-14) {
      Stepper closing(dec_, asmb_, FlowOptions{rem, opt_.truncated, opt_.trunc});
      h = closing.step(h);
    }
    return h;
  }

 private:
  std::shared_ptr<const SpectralDecomposition> dec_;
  std::shared_ptr<const OperatorAssembly> asmb_;
  Nonlinearity nl_;
  FlowOptions opt_;
  std::vector<double> exp_full_, ph1_full_, exp_half_, ph1_half_;
  detail::TailSolve tail_full_, tail_half_;

  void prepare(double dt, std::vector<double>& ex, std::vector<double>& p1) {
    const int K = dec_->kmax;
    ex.resize(K);
    p1.resize(K);
    for (int k = 0; k < K; ++k) {
      double z = -dec_->lambda[k] * dt;
      ex[k] = std::exp(z);
      p1[k] = phi1(z);
    }
  }

  static void check_finite(const Field& f) {
    for (double t : f.v)
      if (!std::isfinite(t)) throw std::runtime_error("step_truncated: NaN/Inf in nonlinearity");
  }
};

/// Time-one map of the truncated flow.
inline Field time_one_map(const Stepper& S, const Field& h0) { return S.flow(h0, 1.0); }

/// R^eps(h0) = S^eps(h0) - e^{-L} h0.
inline Field remainder_R(const Stepper& S, const Field& h0) {
  Field out = S.flow(h0, 1.0);
  out.axpy(-1.0, semigroup(S.decomposition(), 1.0, h0));
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryRecord {
  std::shared_ptr<const StationaryState> state;
  double eps_flag = 0.0;  // cutoff scale used for the truncation-active flag
  std::vector<double> t;
  std::vector<Field> h;
  std::vector<double> norm_p1;
  std::vector<double> norm_inf_v;
  std::vector<double> sup_vgrad;
  std::vector<char> trunc_active;

  int size() const { return static_cast<int>(t.size()); }

  void push(double time, const Field& f, const SpectralDecomposition& dec) {
    t.push_back(time);
    h.push_back(f);
    norm_p1.push_back(dec.norm_b(f));
    double ni = norm_inf(f);
    norm_inf_v.push_back(ni);
    double sg = sup_weighted_grad(f, state->V);
    sup_vgrad.push_back(sg);
    trunc_active.push_back(eps_flag > 0.0 && (ni > eps_flag || sg > eps_flag) ? 1 : 0);
  }
};

/// CSV with columns t,norm_p1,norm_inf,sup_VgradH,trunc_active.
inline void write_trajectory_csv(const TrajectoryRecord& r, std::ostream& os) {
  os << "t,norm_p1,norm_inf,sup_VgradH,trunc_active\n";
  os.precision(17);
  for (int j = 0; j < r.size(); ++j)
    os << r.t[j] << ',' << r.norm_p1[j] << ',' << r.norm_inf_v[j] << ',' << r.sup_vgrad[j] << ','
       << static_cast<int>(r.trunc_active[j]) << '\n';
}

/// Evolves the relative-error flow (truncated per the stepper options) and
/// records snapshots every snap_dt.  Untruncated runs abort with a FlowError
/// when 1+h leaves the admissible range; either flavor aborts on blow-up.
inline TrajectoryRecord solve_relative_error(const Stepper& S, const Field& h0, double T,
                                             double snap_dt = 1.0 / 16) {
  const SpectralDecomposition& dec = S.decomposition();
  TrajectoryRecord rec;
  rec.state = S.assembly().state;
  rec.eps_flag = S.options().trunc.eps;
  Field h = h0;
  rec.push(0.0, h, dec);
  long per = std::max(1L, std::lround(snap_dt / S.options().dt));
  long total = std::lround(T / S.options().dt);
  for (long s = 1; s <= total; ++s) {
    double tnow = s * S.options().dt;
    try {
      h = S.step(h);
    } catch (const std::invalid_argument& e) {
      throw FlowError(std::string(e.what()) + " at t = " + std::to_string(tnow), tnow);
    }
    if (norm_inf(h) > 10.0)
      throw FlowError("solve_relative_error: blow-up (norm_inf > 10) at t = " + std::to_string(tnow),
                      tnow);
    if (s % per == 0 || s == total) rec.push(tnow, h, dec);
  }
  return rec;
}

/// Evolves the rescaled flow for v = V(1+h) through the relative error.
/// Returns the h-record; v snapshots are V(1+h).
inline TrajectoryRecord solve_rescaled_v(const Stepper& S, const Field& v0, double T,
                                         double snap_dt = 1.0 / 16) {
  const StationaryState& st = *S.assembly().state;
  const Grid& g = *st.grid;
  Field h0(v0.grid);
  int lo = S.assembly().ilo, hi = S.assembly().ihi;
  for (int i = 0; i < g.n(); ++i) {
    if (st.V[i] > 0.0) {
      if (!(v0[i] > 0.0))
        throw std::invalid_argument("solve_rescaled_v: v0 must be positive at interior nodes");
      h0[i] = v0[i] / st.V[i] - 1.0;
    }
  }
  for (int i = 0; i < lo; ++i) h0[i] = h0[lo];
  for (int i = hi + 1; i < g.n(); ++i) h0[i] = h0[hi];
  return solve_relative_error(S, h0, T, snap_dt);
}

inline Field rescaled_v_field(const StationaryState& st, const Field& h) {
  Field v(h.grid);
  for (int i = 0; i < h.n(); ++i) v[i] = st.V[i] * (1.0 + h[i]);
  return v;
}

// ---------------------------------------------------------------------------
// Picard / Duhamel fixed point (the existence proof as an algorithm)

struct PicardResult {
  TrajectoryRecord traj;  // snapshots at every substep
  int sweeps = 0;
  double contraction = 0.0;  // measured per-sweep factor
  double final_increment = 0.0;
};

/// Iterates g -> h(h0, g), where h solves the linear problem
/// dh/dt + L h = M^eps[g], h(0) = h0, by exact Duhamel quadrature in the
/// eigenbasis (trapezoidal source) and implicit Euler on the tail.
inline PicardResult picard_solve(const Stepper& S, const Field& h0, double T, double tol) {
  if (!(T > 0.0 && T <= 1.0)) throw std::invalid_argument("picard_solve: require 0 < T <= 1");
  const SpectralDecomposition& dec = S.decomposition();
  const OperatorAssembly& a = S.assembly();
  const double dt = S.options().dt;
  const int J = std::max(1L, std::lround(T / dt));
  const int K = dec.kmax;

  std::vector<double> ex(K), f1(K), f2(K);
  for (int k = 0; k < K; ++k) {
    double z = -dec.lambda[k] * dt;
    ex[k] = std::exp(z);
    f1[k] = phi1(z) - phi2(z);
    f2[k] = phi2(z);
  }
  detail::TailSolve tail_ie(a, dt);

  // seed: linear evolution of h0
  std::vector<Field> g;
  g.reserve(J + 1);
  {
    std::vector<double> c = dec.coef(h0);
    Field tail = h0;
    tail.axpy(-1.0, dec.reconstruct(c));
    g.push_back(h0);
    for (int j = 1; j <= J; ++j) {
      for (int k = 0; k < K; ++k) c[k] *= ex[k];
      tail = tail_ie.apply(tail);
      dec.deflate(tail);
      Field hj = dec.reconstruct(c);
      hj += tail;
      g.push_back(hj);
    }
  }

  PicardResult out;
  double prev_incr = 0.0;
  for (int sweep = 1; sweep <= 100; ++sweep) {
    std::vector<std::vector<double>> cm(J + 1);
    std::vector<Field> mt(J + 1);
    for (int j = 0; j <= J; ++j) {
      Field m = S.rhs(g[j]);
      cm[j] = dec.coef(m);
      mt[j] = m;
      mt[j].axpy(-1.0, dec.reconstruct(cm[j]));
    }
    std::vector<Field> hnew;
    hnew.reserve(J + 1);
    hnew.push_back(h0);
    std::vector<double> c = dec.coef(h0);
    Field tail = h0;
    tail.axpy(-1.0, dec.reconstruct(c));
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < K; ++k)
        c[k] = ex[k] * c[k] + dt * (f1[k] * cm[j][k] + f2[k] * cm[j + 1][k]);
      Field trhs = tail;
      trhs.axpy(0.5 * dt, mt[j]);
      trhs.axpy(0.5 * dt, mt[j + 1]);
      tail = tail_ie.apply(trhs);
      dec.deflate(tail);
      Field hj = dec.reconstruct(c);
      hj += tail;
      hnew.push_back(hj);
    }
    double incr = 0.0;
    for (int j = 0; j <= J; ++j) {
      Field d = hnew[j];
      d.axpy(-1.0, g[j]);
      incr = std::max(incr, dec.norm_b(d));
    }
    g = std::move(hnew);
    out.sweeps = sweep;
    out.final_increment = incr;
    if (prev_incr > 0.0) out.contraction = std::max(out.contraction, incr / prev_incr);
    prev_incr = incr;
    if (incr <= tol) break;
    if (sweep == 100)
      throw std::runtime_error("picard_solve: no contraction after 100 sweeps (factor " +
                               std::to_string(out.contraction) + ")");
  }

  out.traj.state = a.state;
  out.traj.eps_flag = S.options().trunc.eps;
  for (int j = 0; j <= J; ++j) out.traj.push(j * dt, g[j], dec);
  return out;
}

// ---------------------------------------------------------------------------
// Original fast-diffusion flow (demo grade, first order)

struct ExtinctionResult {
  TrajectoryRecord traj;  // snapshots of w (norms are plain sup/quadrature)
  double T_extinction = 0.0;
  std::vector<double> mass;  // sum q mu w per snapshot
};

/// Implicit-Euler march of  dw/dtau = div(mu grad w^m)/mu,  m = 1/p, with
/// Dirichlet boundary rows and inner Newton solves.  Extinction is declared
/// when the sup norm first drops below the threshold.
inline ExtinctionResult solve_original_w(std::shared_ptr<const StationaryState> state,
                                         const Field& w0, double dtau, double tau_max,
                                         double threshold = 1e-6, int snap_every = 8) {
  const Grid& g = *w0.grid;
  const int n = g.n();
  const double m = 1.0 / state->p;
  for (double t : w0.v)
    if (t < 0.0) throw std::invalid_argument("solve_original_w: w0 must be nonnegative");
  if (norm_inf(w0) == 0.0)
    throw std::invalid_argument("solve_original_w: w0 must not vanish identically");

  auto faces = detail::laplace_faces(g);
  std::vector<double> w = w0.v;
  for (int i = 0; i < n; ++i)
    if (g.is_boundary(i)) w[i] = 0.0;

  ExtinctionResult out;
  out.traj.state = state;
  out.traj.eps_flag = 0.0;

  auto record = [&](double tau) {
    Field f(w0.grid, w);
    out.traj.t.push_back(tau);
    out.traj.h.push_back(f);
    out.traj.norm_p1.push_back(0.0);
    out.traj.norm_inf_v.push_back(norm_inf(f));
    out.traj.sup_vgrad.push_back(0.0);
    out.traj.trunc_active.push_back(0);
    double mass = 0.0;
    for (int i = 0; i < n; ++i) mass += g.q[i] * g.mu[i] * w[i];
    out.mass.push_back(mass);
  };
  record(0.0);

  const long max_steps = std::lround(tau_max / dtau);
  double tau = 0.0;
  bool extinct = false;
  for (long s = 1; s <= max_steps && !extinct; ++s) {
    std::vector<double> wprev = w;
    // Newton on F(w) = q mu (w - wprev) + dtau * A_mu w^m  (Dirichlet rows)
    bool done = false;
    for (int it = 0; it < 60 && !done; ++it) {
      std::vector<double> u(n), F(n, 0.0);
      for (int i = 0; i < n; ++i) u[i] = std::pow(std::max(w[i], 0.0), m);
      double fmax = 0.0, fscale = 0.0;
      std::vector<double> sub(n - 1, 0.0), diag(n, 0.0), sup(n - 1, 0.0), rhs(n, 0.0);
      for (int i = 0; i < n; ++i) {
        if (g.is_boundary(i)) {
          F[i] = w[i];
          diag[i] = 1.0;
          continue;
        }
        double flux = 0.0, fabs2 = 0.0;
        if (i > 0) {
          flux += faces[i - 1] * (u[i] - u[i - 1]);
          fabs2 += faces[i - 1] * (u[i] + u[i - 1]);
        }
        if (i + 1 < n) {
          flux += faces[i] * (u[i] - u[i + 1]);
          fabs2 += faces[i] * (u[i] + u[i + 1]);
        }
        F[i] = g.q[i] * g.mu[i] * (w[i] - wprev[i]) + dtau * flux;
        double dudw = m * std::pow(std::max(w[i], 1e-14), m - 1.0);
        double dsum = g.q[i] * g.mu[i];
        if (i > 0) {
          double duL = m * std::pow(std::max(w[i - 1], 1e-14), m - 1.0);
          dsum += dtau * faces[i - 1] * dudw;
          if (!g.is_boundary(i - 1)) sub[i - 1] = -dtau * faces[i - 1] * duL;
        }
        if (i + 1 < n) {
          double duR = m * std::pow(std::max(w[i + 1], 1e-14), m - 1.0);
          dsum += dtau * faces[i] * dudw;
          if (!g.is_boundary(i + 1)) sup[i] = -dtau * faces[i] * duR;
        }
        diag[i] = dsum;
        fmax = std::max(fmax, std::abs(F[i]));
        fscale = std::max(fscale, g.q[i] * g.mu[i] * (w[i] + wprev[i]) + dtau * fabs2);
      }
      if (fmax <= 1e-12 * fscale + 1e-300) break;
      for (int i = 0; i < n; ++i) rhs[i] = -F[i];
      std::vector<double> dw = tridiag_solve(sub, diag, sup, rhs);
      double alpha = 1.0;
      auto ok = [&](double a2) {
        for (int i = 0; i < n; ++i)
          if (!g.is_boundary(i) && w[i] + a2 * dw[i] < 0.0) return false;
        return true;
      };
      while (!ok(alpha) && alpha > 1e-10) alpha *= 0.5;
      if (alpha <= 1e-10) throw std::runtime_error("solve_original_w: Newton failure");
      double stepsz = 0.0, wmax = 0.0;
      for (int i = 0; i < n; ++i) {
        w[i] = std::max(0.0, w[i] + alpha * dw[i]);
        stepsz = std::max(stepsz, std::abs(alpha * dw[i]));
        wmax = std::max(wmax, w[i]);
      }
      done = stepsz <= 1e-12 * (wmax + threshold);
      if (it == 59) throw std::runtime_error("solve_original_w: Newton failure (no convergence)");
    }
    tau = s * dtau;
    double wmax = 0.0;
    for (double t : w) wmax = std::max(wmax, t);
    if (s % snap_every == 0 || wmax < threshold) record(tau);
    if (wmax < threshold) {
      out.T_extinction = tau;
      extinct = true;
    }
  }
  if (!extinct)
    throw std::runtime_error("solve_original_w: no extinction before tau_max");
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct GradBoundReport {
  double eps = 0.0;
  double sup_vgrad_after_1 = 0.0;  // sup over recorded t >= 1 of |V grad h|
  bool verdict = false;            // sup <= eps
  double eps_star = 0.0;           // smallest amplitude bound that held on the record
};

inline GradBoundReport grad_bound_monitor(const TrajectoryRecord& traj, double eps) {
  GradBoundReport r;
  r.eps = eps;
  for (int j = 0; j < traj.size(); ++j) {
    r.eps_star = std::max(r.eps_star, traj.norm_inf_v[j]);
    if (traj.t[j] >= 1.0) r.sup_vgrad_after_1 = std::max(r.sup_vgrad_after_1, traj.sup_vgrad[j]);
  }
  r.verdict = r.sup_vgrad_after_1 <= eps;
  return r;
}

struct RateFit {
  double rate = 0.0;  // |slope| of the log-linear fit
  double r2 = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least squares on (t, log y) over the trailing window (fraction of the
/// points, at least 5).  All y must be positive.
inline RateFit fit_decay_rate(const std::vector<double>& ts, const std::vector<double>& ys,
                              double trailing_fraction = 0.5) {
  const int N = static_cast<int>(ts.size());
  if (N < 5 || ys.size() != ts.size())
    throw std::invalid_argument("fit_decay_rate: need at least 5 points");
  int take = std::max(5, static_cast<int>(std::ceil(trailing_fraction * N)));
  take = std::min(take, N);
  int start = N - take;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j = start; j < N; ++j) {
    if (!(ys[j] > 0.0)) throw std::invalid_argument("fit_decay_rate: nonpositive value in series");
    double x = ts[j], y = std::log(ys[j]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double nn = take;
  double det = nn * sxx - sx * sx;
  RateFit f;
  f.slope = (nn * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / nn;
  f.rate = std::abs(f.slope);
  double ss_res = 0, ss_tot = 0, ybar = sy / nn;
  for (int j = start; j < N; ++j) {
    double y = std::log(ys[j]);
    double e = y - (f.intercept + f.slope * ts[j]);
    ss_res += e * e;
    ss_tot += (y - ybar) * (y - ybar);
  }
  f.r2 = (ss_tot <= 1e-300) ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

}  // namespace fdx
