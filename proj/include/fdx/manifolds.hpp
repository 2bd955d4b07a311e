#pragma once

// Invariant manifolds of the truncated time-one map S = L + R.
//
// Center manifold: the operator J on bi-directed orbit windows,
//   J_k = S(h_{k-1})                                   k >= 1
//   J_0 = P_s S(h_{-1}) + h_c                          k  = 0
//   J_k = P_s S(h_{k-1}) + L_c^{-1} P_c(h_{k+1}-R(h_k)) k <= -1,
// iterated to its fixed point on the window [-M_w, M_w] with zero closure
// below the window.  theta(h_c) is the stable part of the zero slice and
// W_c = graph(theta).
//
// Stable manifolds: the shifted operator I around a base orbit {S^i(g)},
// iterated on [0, M_w] with zero closure above; psi_g(g_s) is the center
// part of the zero slice and M_g the translated graph.  The leaf through g
// meets W_c in the unique fixed point of chi(q_s) = theta(psi_g(q_s-P_s g)
// + P_c g), which defines the shadow datum of the finite-dimensional
// approximation.

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdx/semiflow.hpp"
#include "fdx/spectral.hpp"
#include "fdx/util.hpp"

namespace fdx {

/// max(|P_c h|, |P_s h|) in the weighted norm; equivalent to |h|_{p+1}
/// within a factor sqrt(2).
inline double trinorm(const SpectralDecomposition& dec, int K, const Field& h) {
  if (K < 1 || K >= dec.kmax) throw std::invalid_argument("trinorm: require 1 <= K < k_max");
  double c2 = 0.0;
  for (int k = 0; k < K; ++k) {
    double c = dec.coef_k(h, k);
    c2 += c * c;
  }
  double full = dec.inner_b(h, h);
  double s2 = std::max(0.0, full - c2);
  return std::sqrt(std::max(c2, s2));
}

/// A finite window of fields indexed by discrete time.
struct OrbitSequence {
  int kmin = 0;
  std::vector<Field> h;

  int kmax_idx() const { return kmin + static_cast<int>(h.size()) - 1; }
  Field& at(int k) { return h[k - kmin]; }
  const Field& at(int k) const { return h[k - kmin]; }
};

/// Bi-directed ladder norm sup_k max(Lambda_+^{-k} |h_k|, Lambda_-^{k} |h_{-k}|).
inline double ladder_norm_bi(const OrbitSequence& seq, const SpectralDecomposition& dec,
                             const GapParameters& gap) {
  double s = 0.0;
  for (int k = seq.kmin; k <= seq.kmax_idx(); ++k) {
    double w = k >= 0 ? std::pow(gap.Lambda_plus, -k) : std::pow(gap.Lambda_minus, -k);
    s = std::max(s, w * trinorm(dec, gap.K, seq.at(k)));
  }
  return s;
}

/// Forward ladder norm sup_{k>=0} Lambda_-^{-k} |h_k|.
inline double ladder_norm_fwd(const OrbitSequence& seq, const SpectralDecomposition& dec,
                              const GapParameters& gap) {
  double s = 0.0;
  for (int k = seq.kmin; k <= seq.kmax_idx(); ++k)
    s = std::max(s, std::pow(gap.Lambda_minus, -k) * trinorm(dec, gap.K, seq.at(k)));
  return s;
}

struct FixedPointOptions {
  int window = 8;
  double tol = 1e-8;
  int max_sweeps = 200;
  int threads = 0;  // S evaluations across the window run in parallel
  bool polish_forward = true;  // re-evaluate the forward branch after convergence
};

struct JResult {
  OrbitSequence seq;  // fixed point on [-M_w, M_w]
  int sweeps = 0;
  double final_increment = 0.0;
  double max_ratio = 0.0;  // measured per-sweep contraction
  std::vector<double> increments;
};

namespace detail {

inline Field center_part(const SpectralDecomposition& dec, int K, const Field& f) {
  Field out(f.grid);
  for (int k = 0; k < K; ++k) out.axpy(dec.coef_k(f, k), dec.phi[k]);
  return out;
}

inline Field stable_part(const SpectralDecomposition& dec, int K, const Field& f) {
  Field out = f;
  for (int k = 0; k < K; ++k) out.axpy(-dec.coef_k(f, k), dec.phi[k]);
  return out;
}

// L_c^{-1} P_c f, done directly in coefficients.
inline Field invert_center_proj(const SpectralDecomposition& dec, int K, const Field& f) {
  Field out(f.grid);
  for (int k = 0; k < K; ++k) out.axpy(std::exp(dec.lambda[k]) * dec.coef_k(f, k), dec.phi[k]);
  return out;
}

}  // namespace detail

/// Iterates J(h_c, .) to its fixed point.  h_c is given by its center
/// coordinates in the eigenbasis (length K).  warm, when provided, seeds the
/// iteration (slots outside its window start at zero).
inline JResult iterate_J(const Stepper& S, const GapParameters& gap,
                         const std::vector<double>& hc_coords, const FixedPointOptions& opt,
                         const OrbitSequence* warm = nullptr) {
  if (!S.options().truncated)
    throw std::invalid_argument("iterate_J: the sequence maps need the truncated flow");
  if (opt.window < 5) throw std::invalid_argument("iterate_J: window must be >= 5");
  const SpectralDecomposition& dec = S.decomposition();
  const int K = gap.K;
  if (static_cast<int>(hc_coords.size()) != K)
    throw std::invalid_argument("iterate_J: coordinate count must equal K");
  const int Mw = opt.window;

  Field fc(dec.grid);
  for (int k = 0; k < K; ++k) fc.axpy(hc_coords[k], dec.phi[k]);
  const double hc_norm = trinorm(dec, K, fc);

  OrbitSequence seq;
  seq.kmin = -Mw;
  seq.h.assign(2 * Mw + 1, Field(dec.grid));
  if (warm) {
    for (int k = std::max(seq.kmin, warm->kmin); k <= std::min(seq.kmax_idx(), warm->kmax_idx()); ++k)
      seq.at(k) = warm->at(k);
  }
  const double seed_norm = ladder_norm_bi(seq, dec, gap);

  JResult out;
  std::vector<Field> Sh(2 * Mw + 1, Field());  // S(h_k) for k in [-Mw, Mw-1]
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    parallel_for(2 * Mw, opt.threads, [&](int idx) {
      int k = seq.kmin + idx;  // k in [-Mw, Mw-1]
      Sh[idx] = S.flow(seq.at(k), 1.0);
    });
    auto S_of = [&](int k) -> const Field& { return Sh[k - seq.kmin]; };

    OrbitSequence next;
    next.kmin = seq.kmin;
    next.h.assign(2 * Mw + 1, Field());
    for (int k = Mw; k >= 1; --k) next.at(k) = S_of(k - 1);
    next.at(0) = detail::stable_part(dec, K, S_of(-1)) + fc;
    for (int k = -1; k >= -Mw; --k) {
      Field R_k = S_of(k);
      R_k.axpy(-1.0, semigroup(dec, 1.0, seq.at(k)));
      Field arg = seq.at(k + 1);
      arg.axpy(-1.0, R_k);
      Field nk = detail::invert_center_proj(dec, K, arg);
      if (k > seq.kmin)
        nk += detail::stable_part(dec, K, S_of(k - 1));
      // k = kmin: the closure h_{-Mw-1} = 0 makes the stable term vanish
      next.at(k) = std::move(nk);
    }

    OrbitSequence diff;
    diff.kmin = seq.kmin;
    diff.h.reserve(2 * Mw + 1);
    for (int k = seq.kmin; k <= seq.kmax_idx(); ++k) {
      Field d = next.at(k);
      d.axpy(-1.0, seq.at(k));
      diff.h.push_back(std::move(d));
    }
    double incr = ladder_norm_bi(diff, dec, gap);
    // contraction ratios are meaningful only above the stopping tolerance
    // (below it successive increments sit on the rounding floor)
    if (!out.increments.empty() && out.increments.back() > 10.0 * opt.tol)
      out.max_ratio = std::max(out.max_ratio, incr / out.increments.back());
    out.increments.push_back(incr);
    seq = std::move(next);
    out.sweeps = sweep;
    out.final_increment = incr;
    if (ladder_norm_bi(seq, dec, gap) > 10.0 * std::max(hc_norm, seed_norm) + 1e3 * opt.tol)
      throw std::runtime_error("iterate_J: sequence norm exceeded 10x the center datum (divergence)");
    if (incr <= opt.tol) break;
    if (sweep == opt.max_sweeps)
      throw std::runtime_error("iterate_J: no convergence in " + std::to_string(opt.max_sweeps) +
                               " sweeps (contraction " + std::to_string(out.max_ratio) + ")");
  }
  // polish: re-evaluate the zero slice and the forward branch as exact
  // compositions of the converged core (this is the map's own definition,
  // applied once in increasing order)
  seq.at(0) = detail::stable_part(dec, K, S.flow(seq.at(-1), 1.0)) + fc;
  if (opt.polish_forward)
    for (int k = 1; k <= Mw; ++k) seq.at(k) = S.flow(seq.at(k - 1), 1.0);
  out.seq = std::move(seq);
  return out;
}

/// Ladder-weighted residual of the orbit property S(h_{k-1}) = h_k over the
/// window interior, measured in the same norm the fixed point converged in.
inline double orbit_residual_J(const Stepper& S, const GapParameters& gap, const JResult& j) {
  const SpectralDecomposition& dec = S.decomposition();
  double worst = 0.0;
  for (int k = j.seq.kmin + 1; k <= j.seq.kmax_idx(); ++k) {
    Field r = S.flow(j.seq.at(k - 1), 1.0);
    r.axpy(-1.0, j.seq.at(k));
    double w = k >= 0 ? std::pow(gap.Lambda_plus, -k) : std::pow(gap.Lambda_minus, -k);
    worst = std::max(worst, w * trinorm(dec, gap.K, r));
  }
  return worst;
}

/// theta(h_c): stable component of the zero slice of the J fixed point.
struct ThetaResult {
  Field value;  // theta(h_c) in E_s
  JResult fixed_point;
};

inline ThetaResult theta(const Stepper& S, const GapParameters& gap,
                         const std::vector<double>& hc_coords, const FixedPointOptions& opt,
                         const OrbitSequence* warm = nullptr) {
  ThetaResult r{Field(), iterate_J(S, gap, hc_coords, opt, warm)};
  r.value = detail::stable_part(S.decomposition(), gap.K, r.fixed_point.seq.at(0));
  return r;
}

/// Assembled point on (or off) the center manifold.
struct ManifoldPoint {
  std::vector<double> center_coords;
  Field h_s;
  Field h;  // h_c + h_s
};

inline ManifoldPoint make_manifold_point(const SpectralDecomposition& dec, int K,
                                         const std::vector<double>& coords, const Field& hs) {
  ManifoldPoint p;
  p.center_coords = coords;
  p.h_s = hs;
  p.h = hs;
  for (int k = 0; k < K; ++k) p.h.axpy(coords[k], dec.phi[k]);
  return p;
}

struct InvarianceReport {
  double max_dev_t1 = 0.0;
  double max_dev_thalf = 0.0;
  int points = 0;
};

/// Checks S^eps(W_c) = W_c on sampled points: evolve a manifold point one
/// time unit (and a half unit), re-evaluate theta at the evolved center
/// coordinates and measure the stable-component mismatch.
inline InvarianceReport invariance_check(const Stepper& S, const GapParameters& gap,
                                         const std::vector<std::vector<double>>& points,
                                         const FixedPointOptions& opt) {
  const SpectralDecomposition& dec = S.decomposition();
  const int K = gap.K;
  InvarianceReport rep;
  rep.points = static_cast<int>(points.size());
  const JResult* prev = nullptr;
  JResult jprev;
  for (const auto& coords : points) {
    JResult j = iterate_J(S, gap, coords, opt, prev ? &prev->seq : nullptr);
    Field z = detail::stable_part(dec, K, j.seq.at(0));
    for (int k = 0; k < K; ++k) z.axpy(coords[k], dec.phi[k]);

    for (double tfrac : {1.0, 0.5}) {
      Field zt = S.flow(z, tfrac);
      std::vector<double> cz(K);
      for (int k = 0; k < K; ++k) cz[k] = dec.coef_k(zt, k);
      // seed with the time-translated orbit: the integer shift for t = 1, the
      // slicewise fractional flow for t = 1/2 (an orbit again by the
      // fractional-time invariance)
      OrbitSequence shifted;
      shifted.kmin = j.seq.kmin;
      shifted.h.assign(j.seq.h.size(), Field(dec.grid));
      if (tfrac == 1.0) {
        for (int k = shifted.kmin; k < j.seq.kmax_idx(); ++k) shifted.at(k) = j.seq.at(k + 1);
        shifted.at(j.seq.kmax_idx()) = j.seq.at(j.seq.kmax_idx());
      } else {
        for (int k = shifted.kmin; k <= j.seq.kmax_idx(); ++k)
          shifted.at(k) = S.flow(j.seq.at(k), tfrac);
      }
      JResult jt = iterate_J(S, gap, cz, opt, &shifted);
      Field th = detail::stable_part(dec, K, jt.seq.at(0));
      Field dev = detail::stable_part(dec, K, zt);
      dev.axpy(-1.0, th);
      double d = dec.norm_b(dev);
      if (tfrac == 1.0)
        rep.max_dev_t1 = std::max(rep.max_dev_t1, d);
      else
        rep.max_dev_thalf = std::max(rep.max_dev_thalf, d);
    }
    jprev = std::move(j);
    prev = &jprev;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Stable manifolds

struct IResult {
  OrbitSequence seq;        // fixed point on [0, M_w]
  std::vector<Field> base;  // S^i(g) for i in [0, M_w+1]
  int sweeps = 0;
  double final_increment = 0.0;
  double max_ratio = 0.0;
  std::vector<double> increments;
};

/// Iterates the shifted stable-manifold operator I_{g,g_s} to its fixed
/// point.  The base orbit is reused from warm when the caller guarantees the
/// same g.
inline IResult iterate_I(const Stepper& S, const GapParameters& gap, const Field& g,
                         const Field& g_s, const FixedPointOptions& opt,
                         const IResult* warm = nullptr) {
  if (!S.options().truncated)
    throw std::invalid_argument("iterate_I: the sequence maps need the truncated flow");
  if (opt.window < 5) throw std::invalid_argument("iterate_I: window must be >= 5");
  const SpectralDecomposition& dec = S.decomposition();
  const int K = gap.K;
  const int Mw = opt.window;

  {
    Field gc = detail::center_part(dec, K, g_s);
    if (dec.norm_b(gc) > 1e-10 * std::max(1.0, dec.norm_b(g_s)))
      throw std::invalid_argument("iterate_I: g_s must lie in the stable subspace");
  }

  IResult out;
  if (warm && static_cast<int>(warm->base.size()) == Mw + 2) {
    out.base = warm->base;
  } else {
    out.base.reserve(Mw + 2);
    out.base.push_back(g);
    for (int i = 1; i <= Mw + 1; ++i) out.base.push_back(S.flow(out.base.back(), 1.0));
  }

  Field q_s = detail::stable_part(dec, K, g) + g_s;  // P_s g + g_s
  const double gs_norm = trinorm(dec, K, g_s);

  OrbitSequence seq;
  seq.kmin = 0;
  seq.h.assign(Mw + 1, Field(dec.grid));
  if (warm) {
    for (int k = 0; k <= std::min(Mw, warm->seq.kmax_idx()); ++k) seq.at(k) = warm->seq.at(k);
  }
  const double seed_norm = ladder_norm_fwd(seq, dec, gap);

  std::vector<Field> Sy(Mw + 1), Ry(Mw + 1);
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    parallel_for(Mw + 1, opt.threads, [&](int k) {
      Field y = seq.at(k);
      y += out.base[k];
      Sy[k] = S.flow(y, 1.0);
      Ry[k] = Sy[k];
      Ry[k].axpy(-1.0, semigroup(dec, 1.0, y));
    });

    OrbitSequence next;
    next.kmin = 0;
    next.h.assign(Mw + 1, Field());
    for (int k = 0; k <= Mw; ++k) {
      Field ynext = (k + 1 <= Mw) ? seq.at(k + 1) + out.base[k + 1] : out.base[Mw + 1];
      Field arg = std::move(ynext);
      arg.axpy(-1.0, Ry[k]);
      Field nk = detail::invert_center_proj(dec, K, arg);
      if (k == 0)
        nk += q_s;
      else
        nk += detail::stable_part(dec, K, Sy[k - 1]);
      nk.axpy(-1.0, out.base[k]);
      next.at(k) = std::move(nk);
    }

    OrbitSequence diff;
    diff.kmin = 0;
    for (int k = 0; k <= Mw; ++k) {
      Field d = next.at(k);
      d.axpy(-1.0, seq.at(k));
      diff.h.push_back(std::move(d));
    }
    double incr = ladder_norm_fwd(diff, dec, gap);
    if (!out.increments.empty() && out.increments.back() > 10.0 * opt.tol)
      out.max_ratio = std::max(out.max_ratio, incr / out.increments.back());
    out.increments.push_back(incr);
    seq = std::move(next);
    out.sweeps = sweep;
    out.final_increment = incr;
    if (ladder_norm_fwd(seq, dec, gap) > 10.0 * std::max(gs_norm, seed_norm) + 1e3 * opt.tol)
      throw std::runtime_error("iterate_I: sequence norm exceeded 10x the stable datum (divergence)");
    if (incr <= opt.tol) break;
    if (sweep == opt.max_sweeps)
      throw std::runtime_error("iterate_I: no convergence in " + std::to_string(opt.max_sweeps) +
                               " sweeps (contraction " + std::to_string(out.max_ratio) + ")");
  }
  out.seq = std::move(seq);
  return out;
}

/// psi_g(g_s): center component of the zero slice of the I fixed point.
struct PsiResult {
  Field value;  // in E_c
  IResult fixed_point;
};

inline PsiResult psi(const Stepper& S, const GapParameters& gap, const Field& g, const Field& g_s,
                     const FixedPointOptions& opt, const IResult* warm = nullptr) {
  PsiResult r{Field(), iterate_I(S, gap, g, g_s, opt, warm)};
  r.value = detail::center_part(S.decomposition(), gap.K, r.fixed_point.seq.at(0));
  return r;
}

// ---------------------------------------------------------------------------
// Foliation and shadowing

struct IntersectResult {
  ManifoldPoint point;
  int iterations = 0;
  double final_increment = 0.0;
  double lip_chi_max = 0.0;  // measured ratio of successive chi increments
};

/// Unique intersection of the stable leaf through g with the center
/// manifold: fixed point of chi(q_s) = theta(psi_g(q_s - P_s g) + P_c g).
inline IntersectResult foliation_intersect(const Stepper& S, const GapParameters& gap,
                                           const Field& g, const FixedPointOptions& optJ,
                                           const FixedPointOptions& optI, double tol) {
  const SpectralDecomposition& dec = S.decomposition();
  const int K = gap.K;
  Field Psg = detail::stable_part(dec, K, g);
  Field Pcg = detail::center_part(dec, K, g);

  Field q_s = Psg;
  IntersectResult out;
  IResult iw;
  JResult jw;
  bool have_warm = false;
  double prev_incr = -1.0;
  std::vector<double> coords(K, 0.0);
  for (int it = 1; it <= 60; ++it) {
    Field gs_arg = q_s;
    gs_arg.axpy(-1.0, Psg);
    PsiResult ps = psi(S, gap, g, gs_arg, optI, have_warm ? &iw : nullptr);
    Field qc = ps.value + Pcg;
    for (int k = 0; k < K; ++k) coords[k] = dec.coef_k(qc, k);
    ThetaResult th = theta(S, gap, coords, optJ, have_warm ? &jw.seq : nullptr);
    iw = std::move(ps.fixed_point);
    jw = std::move(th.fixed_point);
    have_warm = true;

    Field d = th.value;
    d.axpy(-1.0, q_s);
    double incr = trinorm(dec, K, d);
    if (prev_incr > 0.0) {
      double ratio = incr / prev_incr;
      out.lip_chi_max = std::max(out.lip_chi_max, ratio);
      if (ratio >= 1.0 && incr > 10.0 * tol)
        throw std::runtime_error("foliation_intersect: chi is not contracting (eps_gap too large)");
    }
    prev_incr = incr > 0.0 ? incr : -1.0;
    q_s = th.value;
    out.iterations = it;
    out.final_increment = incr;
    if (incr <= tol) break;
    if (it == 60) throw std::runtime_error("foliation_intersect: no convergence in 60 iterations");
  }
  out.point = make_manifold_point(dec, K, coords, q_s);
  return out;
}

struct ShadowResult {
  double t0 = 0.0;
  double lambda_minus = 0.0;
  RateFit fit;
  double prefactor = 0.0;
  std::vector<double> ts;     // absolute times of the difference series
  std::vector<double> diffs;  // |h(t) - h~(t)|_{p+1}
  ManifoldPoint shadow_datum;
  IntersectResult intersect;
};

/// Shadowing of an untruncated trajectory by an orbit on the center
/// manifold: pick t0 where the smallness hypothesis starts to hold, take the
/// leaf-manifold intersection as the shadow datum, evolve it under the
/// truncated flow and fit the decay rate of the difference.
inline ShadowResult finite_dim_approx(const TrajectoryRecord& traj, const Stepper& S_trunc,
                                      const GapParameters& gap, const FixedPointOptions& optJ,
                                      const FixedPointOptions& optI, double tol) {
  const SpectralDecomposition& dec = S_trunc.decomposition();
  const double eps = S_trunc.options().trunc.eps;
  int j0 = -1;
  for (int j = 0; j < traj.size(); ++j) {
    if (traj.norm_inf_v[j] <= eps && traj.sup_vgrad[j] <= eps) {
      j0 = j;
      break;
    }
  }
  if (j0 < 0)
    throw std::runtime_error("finite_dim_approx: trajectory never satisfies the smallness hypothesis");

  ShadowResult out;
  out.t0 = traj.t[j0];
  out.lambda_minus = gap.lambda_minus;
  out.intersect = foliation_intersect(S_trunc, gap, traj.h[j0], optJ, optI, tol);
  out.shadow_datum = out.intersect.point;

  Field ht = out.shadow_datum.h;
  for (int j = j0; j < traj.size(); ++j) {
    if (j > j0) ht = S_trunc.flow(ht, traj.t[j] - traj.t[j - 1]);
    Field d = traj.h[j];
    d.axpy(-1.0, ht);
    out.ts.push_back(traj.t[j]);
    out.diffs.push_back(dec.norm_b(d));
  }
  std::vector<double> trel(out.ts.size()), ys(out.ts.size());
  double dmax = 0.0;
  for (double d : out.diffs) dmax = std::max(dmax, d);
  // floor the series so an exactly-shadowed trajectory (all-zero differences)
  // still fits; the floor sits below anything a genuine decay produces
  for (std::size_t j = 0; j < out.ts.size(); ++j) {
    trel[j] = out.ts[j] - out.t0;
    ys[j] = std::max(out.diffs[j], 1e-15 * dmax + 1e-300);
  }
  out.fit = fit_decay_rate(trel, ys, 1.0);
  out.prefactor = std::exp(out.fit.intercept);
  return out;
}

}  // namespace fdx
