#pragma once

// The acceptance suite: one runner per criterion, each verifying a pinned
// quantitative statement about the pipeline at desk scale and returning the
// measured values.  `verify_all` runs a selection and aggregates a summary.
//
// Configuration notes (details in the criterion bodies):
//  * criteria 1-8 and 11-14 run on the configured (default) cut K = 1;
//  * criteria 9-10 run the center/stable-manifold machinery at cut K = 2
//    with eps = 0.02 and lambda_- = 3.5, because at K = 1 the center
//    manifold is exactly the invariant constants subspace (theta == 0) and
//    the graph quantities they measure would degenerate to zero.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "fdx/io.hpp"
#include "fdx/lab.hpp"
#include "fdx/manifolds.hpp"

namespace fdx {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  json measured;

  CriterionResult() = default;
  CriterionResult(int id_, std::string name_) : id(id_), name(std::move(name_)) {}
};

namespace verify_detail {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Independent oracle for the interval at p = 2: conserved shooting energy
// turns the half length into a smooth quadrature,
//   I(s) = (2/sqrt(Vmax)) int_0^1 du / sqrt((2/3)(3 - 3u^2 + u^4)),
// with Vmax = (3 s^2 / 2)^{1/3}; the stationary root satisfies I(s*) = 1/2.
inline double half_length_integral(double s) {
  double vmax = std::cbrt(1.5 * s * s);
  const int m = 4000;
  auto f = [](double u) {
    return 1.0 / std::sqrt((2.0 / 3.0) * (3.0 - 3.0 * u * u + u * u * u * u));
  };
  double h = 1.0 / m;
  double acc = f(0.0) + f(1.0);
  for (int j = 1; j < m; ++j) acc += (j % 2 ? 4.0 : 2.0) * f(j * h);
  return 2.0 / std::sqrt(vmax) * acc * h / 3.0;
}

struct C14Checks {
  double linf_dev = 0.0;          // ||L 1 - (1-p) 1||_inf against the constant field
  double lambda1_dev = 0.0;       // |lambda_1 - (1-p)|
  double phi1_const_dev = 0.0;    // relative deviation of phi_1 from constant
  double selfadj_worst = 0.0;     // normalized self-adjointness defect
  double half_length_dev = 0.0;   // |I(s*) - 1/2|
  double c_low = 0.0, c_high = 0.0;
  bool gap_ok = false;
  double kcontr = 0.0, eps_gap = 0.0, lambda_minus = 0.0, lambda2 = 0.0;
};

// shared body of criteria 1-4, reused by criterion 13 on the fine grid
inline C14Checks run_c14_checks(const Lab& lab, std::uint64_t seed) {
  C14Checks c;
  const auto& d = *lab.decomp;
  const double p = lab.cfg.p;

  Field one(lab.grid, 1.0);
  Field L1 = lab.assembly->apply_L(one);
  for (int i = 0; i < one.n(); ++i)
    c.linf_dev = std::max(c.linf_dev, std::abs(L1[i] - (1.0 - p)));
  c.lambda1_dev = std::abs(d.lambda[0] - (1.0 - p));
  double mean = 0.0;
  for (double t : d.phi[0].v) mean += t;
  mean /= d.phi[0].n();
  for (double t : d.phi[0].v)
    c.phi1_const_dev = std::max(c.phi1_const_dev, std::abs(t - mean) / std::abs(mean));

  Rng rng(seed);
  for (int trial = 0; trial < 100; ++trial) {
    Field u = random_smooth_field(d, rng, rng.uniform(0.1, 2.0));
    Field v = random_smooth_field(d, rng, rng.uniform(0.1, 2.0));
    Field Lu = lab.assembly->apply_L(u), Lv = lab.assembly->apply_L(v);
    double defect = std::abs(d.inner_b(Lu, v) - d.inner_b(u, Lv));
    c.selfadj_worst = std::max(c.selfadj_worst, defect / (d.norm_b(u) * d.norm_b(v)));
  }

  if (lab.grid->kind == DomainKind::Interval && p == 2.0)
    c.half_length_dev = std::abs(half_length_integral(lab.state->s) - 0.5);
  auto bc = boundary_comparability(*lab.state);
  c.c_low = bc.c_low;
  c.c_high = bc.c_high;

  c.gap_ok = lab.gap.ladder_ok();
  c.kcontr = lab.gap.K_contr;
  c.eps_gap = lab.gap.eps_gap;
  c.lambda_minus = lab.gap.lambda_minus;
  c.lambda2 = d.lambda[1];
  return c;
}

inline GapParameters manifold_gap(const Lab& lab) {
  // cut K = 2 with lambda_- = lambda_2 + 0.5: the graph theta is genuinely
  // curved there, and the reduced lambda_- keeps the backward ladder weights
  // of the stable-manifold recursion inside double precision
  return gap_parameters(*lab.decomp, 2, lab.cfg.target_Kcontr, lab.decomp->lambda[1] + 0.5);
}

}  // namespace verify_detail

inline CriterionResult criterion_1(const Lab& lab) {
  verify_detail::Timer t;
  auto c = verify_detail::run_c14_checks(lab, lab.cfg.seed + 1);
  CriterionResult r{1, "exact structural eigenpair (constant field, lambda_1 = 1-p)"};
  r.pass = c.linf_dev <= 1e-12 && c.lambda1_dev <= 1e-10 && c.phi1_const_dev <= 1e-8;
  r.measured = json{{"apply_dev_inf", c.linf_dev},
                    {"lambda1_dev", c.lambda1_dev},
                    {"phi1_const_dev", c.phi1_const_dev}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_2(const Lab& lab) {
  verify_detail::Timer t;
  auto c = verify_detail::run_c14_checks(lab, lab.cfg.seed + 2);
  CriterionResult r{2, "self-adjointness in the weighted inner product"};
  r.pass = c.selfadj_worst <= 1e-10;
  r.measured = json{{"worst_normalized_defect", c.selfadj_worst}, {"pairs", 100}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_3(const Lab& lab) {
  verify_detail::Timer t;
  auto c = verify_detail::run_c14_checks(lab, lab.cfg.seed + 3);
  CriterionResult r{3, "stationary state: energy-quadrature half-length identity and boundary comparability"};
  bool comparable = c.c_low > 0.0 && std::isfinite(c.c_high) && c.c_high >= c.c_low;
  r.pass = c.half_length_dev <= 1e-4 && comparable && c.c_high / c.c_low <= 10.0;
  r.measured = json{{"half_length_dev", c.half_length_dev},
                    {"c_low", c.c_low},
                    {"c_high", c.c_high},
                    {"ratio", c.c_high / c.c_low},
                    {"s_star", lab.state->s},
                    {"newton_residual", lab.state->residual}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_4(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{4, "Lambda ladder ordering and closed-form eps_gap"};
  const GapParameters& g = lab.gap;
  double bind = kcontr_at(g, g.eps_gap);
  r.pass = g.ladder_ok() && g.K_contr < 1.0 && g.eps_gap > 0.0 &&
           std::abs(bind - lab.cfg.target_Kcontr) <= 1e-12;
  r.measured = gap_json(g);
  r.measured["binding_ratio_at_eps_gap"] = bind;
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_5(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{5, "truncated and untruncated flows coincide on small data"};
  Stepper St = lab.make_stepper(true);
  Stepper Su = lab.make_stepper(false);
  const auto& d = *lab.decomp;
  Rng rng(lab.cfg.seed + 5);
  Field h0 = random_smooth_field(d, rng, 0.01);
  double s = std::max(norm_inf(h0), sup_weighted_grad(h0, lab.state->V));
  h0 *= 0.5 * lab.cfg.epsilon / s;
  TrajectoryRecord ta = solve_relative_error(St, h0, 1.0, 1.0 / 16);
  TrajectoryRecord tb = solve_relative_error(Su, h0, 1.0, 1.0 / 16);
  double worst = 0.0;
  bool inactive = true;
  for (int j = 0; j < ta.size(); ++j) {
    Field diff = ta.h[j] - tb.h[j];
    worst = std::max(worst, d.norm_b(diff));
    inactive = inactive && ta.trunc_active[j] == 0;
  }
  r.pass = worst <= 1e-10 && inactive;
  r.measured = json{{"max_diff_p1", worst}, {"cutoffs_inactive", inactive}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_6(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{6, "remainder R: zero at zero, Lipschitz linear in eps"};
  const auto& d = *lab.decomp;
  Field zero(lab.grid);
  Stepper Sdef = lab.make_stepper(true);
  double r0 = norm_inf(remainder_R(Sdef, zero));

  Rng rng(lab.cfg.seed + 6);
  const int T = 25;
  std::vector<Field> shape(T), pert(T);
  std::vector<double> amp(T);
  for (int i = 0; i < T; ++i) {
    Field u = random_smooth_field(d, rng, 1.0);
    u *= 1.0 / std::max(norm_inf(u), sup_weighted_grad(u, lab.state->V));
    shape[i] = u;
    Field v = random_smooth_field(d, rng, 1.0);
    v *= 1.0 / std::max(norm_inf(v), sup_weighted_grad(v, lab.state->V));
    pert[i] = v;
    amp[i] = rng.uniform(0.5, 2.5);
  }
  std::vector<double> lx, ly, lips;
  for (double eps : {0.01, 0.02, 0.04}) {
    Stepper S = lab.make_stepper(true, 0.0, eps);
    double lip = 0.0;
    for (int i = 0; i < T; ++i) {
      Field a = amp[i] * eps * shape[i];
      Field b = a;
      b.axpy(0.02 * eps, pert[i]);
      Field ra = remainder_R(S, a), rb = remainder_R(S, b);
      Field dr = ra - rb, dh = a - b;
      lip = std::max(lip, trinorm(d, lab.gap.K, dr) / trinorm(d, lab.gap.K, dh));
    }
    lx.push_back(std::log(eps));
    ly.push_back(std::log(lip));
    lips.push_back(lip);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double n = static_cast<double>(lx.size());
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

  // default-eps remainder stays below the gap budget
  double lip_default = 0.0;
  for (int i = 0; i < T; i += 5) {
    Field a = amp[i] * lab.cfg.epsilon * shape[i];
    Field b = a;
    b.axpy(0.02 * lab.cfg.epsilon, pert[i]);
    Field ra = remainder_R(Sdef, a), rb = remainder_R(Sdef, b);
    Field dr = ra - rb, dh = a - b;
    lip_default = std::max(lip_default, trinorm(d, lab.gap.K, dr) / trinorm(d, lab.gap.K, dh));
  }

  r.pass = r0 == 0.0 && slope >= 0.7 && slope <= 1.3 && lip_default < lab.gap.eps_gap;
  r.measured = json{{"R_at_zero_inf", r0},
                    {"lip_slope_loglog", slope},
                    {"lip_samples", lips},
                    {"lip_at_default_eps", lip_default},
                    {"eps_gap", lab.gap.eps_gap}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_7(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{7, "Picard fixed-point solver agrees with exponential stepping"};
  Stepper S = lab.make_stepper(true);
  const auto& d = *lab.decomp;
  Rng rng(lab.cfg.seed + 7);
  double worst = 0.0, worst_contr = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Field h0 = random_smooth_field(d, rng, rng.uniform(0.005, 0.05));
    PicardResult pr = picard_solve(S, h0, 1.0, 1e-11);
    Field diff = pr.traj.h.back() - S.flow(h0, 1.0);
    worst = std::max(worst, d.norm_b(diff));
    worst_contr = std::max(worst_contr, pr.contraction);
  }
  r.pass = worst <= 1e-5;
  r.measured = json{{"worst_diff_at_t1", worst}, {"worst_sweep_contraction", worst_contr}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_8(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{8, "center-manifold fixed point: contraction, bound, orbit property"};
  Stepper S = lab.make_stepper(true);
  const auto& d = *lab.decomp;
  FixedPointOptions opt{lab.cfg.window_J, lab.cfg.tol_fixedpoint, 200, lab.cfg.threads};
  JResult j = iterate_J(S, lab.gap, {0.02}, opt);

  Field fc = 0.02 * d.phi[0];
  double bound = ladder_norm_bi(j.seq, d, lab.gap);
  double hc_norm = trinorm(d, lab.gap.K, fc);
  double worst_orbit = 0.0;
  for (int k = j.seq.kmin + 1; k <= j.seq.kmax_idx(); ++k) {
    Field res = S.flow(j.seq.at(k - 1), 1.0);
    res.axpy(-1.0, j.seq.at(k));
    worst_orbit = std::max(worst_orbit, trinorm(d, lab.gap.K, res));
  }
  r.pass = j.max_ratio <= lab.gap.K_contr + 0.05 && bound <= hc_norm * (1.0 + 1e-9) &&
           worst_orbit <= 10.0 * opt.tol;
  r.measured = json{{"sweeps", j.sweeps},
                    {"measured_contraction", j.max_ratio},
                    {"K_contr", lab.gap.K_contr},
                    {"ladder_norm", bound},
                    {"hc_trinorm", hc_norm},
                    {"max_orbit_defect", worst_orbit},
                    {"tol", opt.tol}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_9(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{9, "invariance of the center manifold at t = 1 and t = 1/2"};
  GapParameters gap = verify_detail::manifold_gap(lab);
  Stepper S = lab.make_stepper(true, 0.0, 0.02);
  FixedPointOptions opt{6, lab.cfg.tol_fixedpoint, 200, lab.cfg.threads};
  opt.polish_forward = false;

  Rng rng(lab.cfg.seed + 9);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 20; ++i)
    pts.push_back({rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)});
  std::sort(pts.begin(), pts.end());  // warm chains between neighbours
  InvarianceReport rep = invariance_check(S, gap, pts, opt);
  r.pass = rep.max_dev_t1 <= 10.0 * opt.tol && rep.max_dev_thalf <= 10.0 * opt.tol;
  r.measured = json{{"points", rep.points},
                    {"max_dev_t1", rep.max_dev_t1},
                    {"max_dev_thalf", rep.max_dev_thalf},
                    {"tol", opt.tol},
                    {"K", gap.K},
                    {"eps", 0.02}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_10(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{10, "Lipschitz ladder: theta, psi and their composition chi"};
  GapParameters gap = verify_detail::manifold_gap(lab);
  Stepper S = lab.make_stepper(true, 0.0, 0.02);
  const auto& d = *lab.decomp;
  FixedPointOptions optJ{8, 1e-9, 200, lab.cfg.threads};
  optJ.polish_forward = false;
  FixedPointOptions optI{5, 1e-7, 200, lab.cfg.threads};

  auto theta_of = [&](const std::vector<double>& c, const OrbitSequence* warm) {
    JResult j = iterate_J(S, gap, c, optJ, warm);
    Field th = j.seq.at(0);
    for (int k = 0; k < gap.K; ++k) th.axpy(-d.coef_k(j.seq.at(0), k), d.phi[k]);
    return std::pair<Field, JResult>(std::move(th), std::move(j));
  };

  // direct theta pairs
  Rng rng(lab.cfg.seed + 10);
  double lip_theta = 0.0;
  JResult warm = iterate_J(S, gap, {0.0, 0.0}, optJ);
  for (int i = 0; i < 6; ++i) {
    std::vector<double> a = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)};
    std::vector<double> b = {a[0] + rng.uniform(-2e-3, 2e-3), a[1] + rng.uniform(-2e-3, 2e-3)};
    auto [tha, ja] = theta_of(a, &warm.seq);
    auto [thb, jb] = theta_of(b, &ja.seq);
    Field dth = tha - thb;
    double dc = std::hypot(a[0] - b[0], a[1] - b[1]);
    lip_theta = std::max(lip_theta, trinorm(d, gap.K, dth) / dc);
    warm = std::move(jb);
  }

  // psi pairs at a fixed base point
  Field g = random_smooth_field(d, rng, 0.01);
  Field Psg = g, Pcg(lab.grid);
  for (int k = 0; k < gap.K; ++k) {
    double c = d.coef_k(g, k);
    Psg.axpy(-c, d.phi[k]);
    Pcg.axpy(c, d.phi[k]);
  }
  double lip_psi = 0.0, i_ratio = 0.0, i_bound_excess = -1e300;
  IResult warmI;
  bool haveI = false;
  for (int i = 0; i < 6; ++i) {
    Field a = random_stable_field(d, gap.K, rng, rng.uniform(2e-3, 8e-3));
    Field b = a;
    Field pert = random_stable_field(d, gap.K, rng, 1e-3);
    b += pert;
    PsiResult pa = psi(S, gap, g, a, optI, haveI ? &warmI : nullptr);
    PsiResult pb = psi(S, gap, g, b, optI, &pa.fixed_point);
    i_ratio = std::max(i_ratio, std::max(pa.fixed_point.max_ratio, pb.fixed_point.max_ratio));
    i_bound_excess = std::max(
        i_bound_excess, ladder_norm_fwd(pa.fixed_point.seq, d, gap) - trinorm(d, gap.K, a));
    Field dps = pa.value - pb.value;
    Field dgs = a - b;
    lip_psi = std::max(lip_psi, trinorm(d, gap.K, dps) / trinorm(d, gap.K, dgs));
    warmI = std::move(pb.fixed_point);
    haveI = true;
  }

  // coupled chi pair: the composition inequality is an identity on shared
  // intermediates, so measure all three ratios on one pair
  Field qa = random_stable_field(d, gap.K, rng, 5e-3);
  Field qb = qa;
  Field pert = random_stable_field(d, gap.K, rng, 1e-3);
  qb += pert;
  PsiResult pb2 = psi(S, gap, g, qb - Psg, optI, haveI ? &warmI : nullptr);
  PsiResult pa2 = psi(S, gap, g, qa - Psg, optI, &pb2.fixed_point);
  Field qca = pa2.value + Pcg, qcb = pb2.value + Pcg;
  std::vector<double> ca(gap.K), cb(gap.K);
  for (int k = 0; k < gap.K; ++k) {
    ca[k] = d.coef_k(qca, k);
    cb[k] = d.coef_k(qcb, k);
  }
  auto [thb2, jb2] = theta_of(cb, &warm.seq);
  auto [tha2, ja2] = theta_of(ca, &jb2.seq);
  Field dchi = tha2 - thb2;
  Field dq = qa - qb;
  Field dpsi2 = pa2.value - pb2.value;
  double chi_pair = trinorm(d, gap.K, dchi) / trinorm(d, gap.K, dq);
  double theta_pair = trinorm(d, gap.K, dchi) / trinorm(d, gap.K, dpsi2);
  double psi_pair = trinorm(d, gap.K, dpsi2) / trinorm(d, gap.K, dq);
  lip_theta = std::max(lip_theta, theta_pair);
  lip_psi = std::max(lip_psi, psi_pair);

  // chi converges to the unique intersection
  IntersectResult ir = foliation_intersect(S, gap, g, optJ, optI, 1e-6);

  double bound_theta = gap.eps_gap / ((gap.Lambda_minus - gap.Lambda_s) * (1.0 - gap.K_contr));
  double bound_psi = gap.eps_gap / ((gap.Lambda_c - gap.Lambda_minus) * (1.0 - gap.K_contr));
  r.pass = lip_theta > 0.0 && lip_theta <= bound_theta && lip_psi > 0.0 && lip_psi <= bound_psi &&
           chi_pair <= theta_pair * psi_pair * (1.0 + 1e-9) && ir.final_increment <= 1e-6 &&
           i_ratio <= gap.K_contr + 0.05 && i_bound_excess <= 10.0 * optI.tol;
  r.measured = json{{"lip_theta", lip_theta},
                    {"bound_theta", bound_theta},
                    {"lip_psi", lip_psi},
                    {"bound_psi", bound_psi},
                    {"lip_chi_pair", chi_pair},
                    {"theta_pair", theta_pair},
                    {"psi_pair", psi_pair},
                    {"chi_iterations", ir.iterations},
                    {"chi_lip_measured", ir.lip_chi_max},
                    {"I_contraction", i_ratio},
                    {"I_bound_excess", i_bound_excess},
                    {"K", gap.K}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_11(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{11, "stable-manifold characterization of constructed members"};
  Stepper S = lab.make_stepper(true);
  const auto& d = *lab.decomp;
  FixedPointOptions opt{lab.cfg.window_I, 1e-9, 200, lab.cfg.threads};
  Rng rng(lab.cfg.seed + 11);
  double worst_excess = -1e300;
  for (int trial = 0; trial < 3; ++trial) {
    Field g = random_smooth_field(d, rng, rng.uniform(0.004, 0.01));
    Field gs = random_stable_field(d, lab.gap.K, rng, rng.uniform(0.002, 0.006));
    PsiResult pr = psi(S, lab.gap, g, gs, opt);
    Field gt = g + gs + pr.value;
    Field a = g, b = gt;
    double sup = 0.0;
    for (int k = 0; k <= opt.window; ++k) {
      Field diffk = a - b;
      sup = std::max(sup, std::pow(lab.gap.Lambda_minus, -k) * trinorm(d, lab.gap.K, diffk));
      if (k < opt.window) {
        a = S.flow(a, 1.0);
        b = S.flow(b, 1.0);
      }
    }
    worst_excess = std::max(worst_excess, sup - trinorm(d, lab.gap.K, gs));
  }
  r.pass = worst_excess <= 10.0 * opt.tol;
  r.measured = json{{"worst_excess_over_gs_norm", worst_excess}, {"tol", opt.tol}, {"members", 3}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_12(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{12, "shadowing: finite-dimensional approximation of a generic decaying datum"};
  const auto& d = *lab.decomp;
  Stepper Su = lab.make_stepper(false);
  Stepper St = lab.make_stepper(true);
  std::vector<double> c(d.kmax, 0.0);
  c[0] = 2e-4;
  c[1] = 1.5e-3;
  c[2] = 0.7e-3;
  Field h0 = d.reconstruct(c);
  TrajectoryRecord tr = solve_relative_error(Su, h0, 8.0, 0.25);
  FixedPointOptions optJ{lab.cfg.window_J, 3e-11, 300, lab.cfg.threads};
  FixedPointOptions optI{lab.cfg.window_I, 3e-11, 300, lab.cfg.threads};
  ShadowResult sr = finite_dim_approx(tr, St, lab.gap, optJ, optI, 1e-10);
  double required = sr.lambda_minus - 0.05 * std::abs(sr.lambda_minus);
  r.pass = sr.fit.slope < 0.0 && sr.fit.rate >= required && sr.t0 == 0.0;
  r.measured = json{{"t0", sr.t0},
                    {"lambda_minus", sr.lambda_minus},
                    {"fitted_rate", sr.fit.rate},
                    {"required_rate", required},
                    {"r2", sr.fit.r2},
                    {"prefactor", sr.prefactor},
                    {"shadow_center_coord", sr.shadow_datum.center_coords[0]},
                    {"final_diff", sr.diffs.back()}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_13(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{13, "grid robustness: criteria 1-4 at n = 801, lambda_2 shift"};
  RunConfig fine = lab.cfg;
  fine.n = 801;
  Lab lab8 = make_lab(fine);
  auto c4 = verify_detail::run_c14_checks(lab8, fine.seed + 13);
  double shift = std::abs(lab8.decomp->lambda[1] - lab.decomp->lambda[1]) /
                 std::abs(lab.decomp->lambda[1]);
  bool c1 = c4.linf_dev <= 1e-12 && c4.lambda1_dev <= 1e-10 && c4.phi1_const_dev <= 1e-8;
  bool c2 = c4.selfadj_worst <= 1e-10;
  bool c3 = c4.half_length_dev <= 1e-4 && c4.c_low > 0.0 && c4.c_high / c4.c_low <= 10.0;
  bool g4 = c4.gap_ok && c4.kcontr < 1.0 && c4.eps_gap > 0.0;
  r.pass = c1 && c2 && c3 && g4 && shift <= 1e-3;
  r.measured = json{{"c1_pass", c1},
                    {"c2_pass", c2},
                    {"c3_pass", c3},
                    {"c4_pass", g4},
                    {"lambda2_shift_rel", shift},
                    {"lambda2_fine", lab8.decomp->lambda[1]},
                    {"lambda2_coarse", lab.decomp->lambda[1]}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult criterion_14(const Lab& lab) {
  verify_detail::Timer t;
  CriterionResult r{14, "extinction demo: separated-variables datum and rescaled convergence"};
  const auto& st = *lab.state;
  const double m = 1.0 / st.p, T = 0.2;
  Field w0(lab.grid);
  for (int i = 0; i < lab.grid->n(); ++i)
    w0[i] = std::pow((1.0 - m) * T, 1.0 / (1.0 - m)) * std::pow(st.V[i], 1.0 / m);
  auto res = solve_original_w(lab.state, w0, 1e-5, 0.5, 1e-8, 64);
  double t_err = std::abs(res.T_extinction - T) / T;

  bool mass_monotone = true;
  for (std::size_t j = 1; j < res.mass.size(); ++j)
    mass_monotone = mass_monotone && res.mass[j] <= res.mass[j - 1] + 1e-14;

  double best = 1e300, best_tau = 0.0;
  for (int j = 1; j < res.traj.size(); ++j) {
    double tau = res.traj.t[j];
    if (!(tau < res.T_extinction)) break;
    double a = std::pow((1.0 - m) * (res.T_extinction - tau), 1.0 / (1.0 - m));
    double dmax = 0.0;
    for (int i = 0; i < lab.grid->n(); ++i)
      dmax = std::max(dmax, std::abs(std::pow(res.traj.h[j][i] / a, m) - st.V[i]));
    if (dmax < best) {
      best = dmax;
      best_tau = tau;
    }
  }
  r.pass = t_err <= 0.05 && mass_monotone && best <= 1e-2;
  r.measured = json{{"T_analytic", T},
                    {"T_extinction", res.T_extinction},
                    {"T_rel_err", t_err},
                    {"mass_monotone", mass_monotone},
                    {"min_v_dev_inf", best},
                    {"attained_at_tau", best_tau}};
  r.seconds = t.seconds();
  return r;
}

inline CriterionResult run_criterion(int id, const Lab& lab) {
  switch (id) {
    case 1: return criterion_1(lab);
    case 2: return criterion_2(lab);
    case 3: return criterion_3(lab);
    case 4: return criterion_4(lab);
    case 5: return criterion_5(lab);
    case 6: return criterion_6(lab);
    case 7: return criterion_7(lab);
    case 8: return criterion_8(lab);
    case 9: return criterion_9(lab);
    case 10: return criterion_10(lab);
    case 11: return criterion_11(lab);
    case 12: return criterion_12(lab);
    case 13: return criterion_13(lab);
    case 14: return criterion_14(lab);
    default: throw std::invalid_argument("unknown criterion id " + std::to_string(id));
  }
}

struct VerifySummary {
  std::vector<CriterionResult> results;
  bool all_pass = true;

  /// Timing stays out of the summary: identical config and seed must produce
  /// byte-identical JSON.
  json to_json() const {
    json out{{"schema_version", 1}, {"all_pass", all_pass}, {"criteria", json::array()}};
    for (const auto& r : results)
      out["criteria"].push_back(
          json{{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"measured", r.measured}});
    return out;
  }
};

inline VerifySummary verify_all(const Lab& lab, std::vector<int> ids = {},
                                std::ostream* log = nullptr) {
  if (ids.empty())
    for (int i = 1; i <= 14; ++i) ids.push_back(i);
  VerifySummary s;
  for (int id : ids) {
    CriterionResult r = run_criterion(id, lab);
    if (log)
      (*log) << (r.pass ? "PASS" : "FAIL") << " - criterion " << r.id << ": " << r.name << "  ["
             << r.seconds << " s]\n";
    s.all_pass = s.all_pass && r.pass;
    s.results.push_back(std::move(r));
  }
  return s;
}

}  // namespace fdx
