#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fdx/lab.hpp"
#include "fdx/manifolds.hpp"
#include "fdx/semiflow.hpp"
#include "test_helpers.hpp"

using namespace fdx;

namespace {

const Lab& lab401() {
  static Lab lab = [] {
    RunConfig cfg;
    return make_lab(cfg);
  }();
  return lab;
}

}  // namespace

TEST_CASE("step: zero datum stays zero, dead-cutoff constants follow the semigroup") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);

  Field zero(lab.grid);
  Field z1 = S.flow(zero, 1.0);
  CHECK(norm_inf(z1) == 0.0);

  // h = 3 eps constant: all cutoffs dead, grad = 0, so the step is the pure
  // semigroup on the constant mode, h <- e^{(p-1) dt} h
  double c0 = 3.0 * lab.cfg.epsilon;
  Field c(lab.grid, c0);
  Field c1 = S.step(c);
  for (int i = 0; i < c.n(); ++i)
    CHECK(c1[i] == doctest::Approx(c0 * std::exp((lab.cfg.p - 1.0) * lab.cfg.dt)).epsilon(1e-13));

  CHECK_THROWS_AS(Stepper(lab.decomp, lab.assembly, FlowOptions{0.2, true, {}}),
                  std::invalid_argument);
}

TEST_CASE("step: halving dt reduces the error by about four (second order)") {
  const Lab& lab = lab401();
  Rng rng(77);
  Field h0 = random_smooth_field(*lab.decomp, rng, 0.03);
  auto diff_at = [&](double dt) {
    Stepper Sa(lab.decomp, lab.assembly, FlowOptions{dt, true, {lab.cfg.epsilon, lab.cfg.eps0}});
    Stepper Sb(lab.decomp, lab.assembly,
               FlowOptions{dt / 2, true, {lab.cfg.epsilon, lab.cfg.eps0}});
    Field a = Sa.flow(h0, 0.25);
    Field b = Sb.flow(h0, 0.25);
    Field d = a - b;
    return lab.decomp->norm_b(d);
  };
  double e1 = diff_at(1.0 / 64), e2 = diff_at(1.0 / 128);
  CHECK(e1 / e2 > 2.5);
  CHECK(e1 / e2 < 6.0);
}

TEST_CASE("time-one map: fixed point at zero, composition property") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  Field zero(lab.grid);
  CHECK(norm_inf(time_one_map(S, zero)) == 0.0);

  Rng rng(3);
  Field h = random_smooth_field(*lab.decomp, rng, 0.02);
  Field two_ones = S.flow(S.flow(h, 1.0), 1.0);
  Field two = S.flow(h, 2.0);
  Field d = two - two_ones;
  CHECK(lab.decomp->norm_b(d) <= 1e-6);
}

TEST_CASE("time-one map: stability estimate with a measured constant") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  Rng rng(5);
  double cmax = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Field a = random_smooth_field(*lab.decomp, rng, rng.uniform(0.01, 0.1));
    Field b = random_smooth_field(*lab.decomp, rng, rng.uniform(0.01, 0.1));
    Field Sa = S.flow(a, 1.0), Sb = S.flow(b, 1.0);
    Field dS = Sa - Sb, d0 = a - b;
    double ratio = lab.decomp->norm_b(dS) / lab.decomp->norm_b(d0);
    cmax = std::max(cmax, std::log(ratio));
  }
  // the linear flow alone gives e^{-lambda_1} = e; the nonlinearity adds O(eps)
  CHECK(cmax < 1.2);
  MESSAGE("measured stability constant C = ", cmax);
}

TEST_CASE("discrete stability estimate with dissipation term") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  const auto& d = *lab.decomp;
  const double T = 1.0, snap = 1.0 / 16;
  Rng rng(9);
  double cmax = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Field a = random_smooth_field(d, rng, rng.uniform(0.01, 0.05));
    Field b = random_smooth_field(d, rng, rng.uniform(0.01, 0.05));
    TrajectoryRecord ra = solve_relative_error(S, a, T, snap);
    TrajectoryRecord rb = solve_relative_error(S, b, T, snap);
    double sup2 = 0.0, dissip = 0.0;
    for (int j = 0; j < ra.size(); ++j) {
      Field diff = ra.h[j] - rb.h[j];
      double nn = d.norm_b(diff);
      sup2 = std::max(sup2, nn * nn);
      Field gd = gradient(diff);
      double g2 = weighted_inner(gd, gd, lab.state->V, 2.0);
      dissip += (j + 1 < ra.size() ? snap : 0.0) * g2;
    }
    Field d0 = a - b;
    double den = d.norm_b(d0);
    cmax = std::max(cmax, std::log((sup2 + dissip) / (den * den)) / T);
  }
  CHECK(std::isfinite(cmax));
  CHECK(cmax < 10.0);
  MESSAGE("measured discrete stability constant = ", cmax);
}

TEST_CASE("remainder R: zero at zero, Lipschitz below the gap budget") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  const auto& d = *lab.decomp;

  Field zero(lab.grid);
  CHECK(norm_inf(remainder_R(S, zero)) == 0.0);

  Rng rng(21);
  double lip = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Field a = random_smooth_field(d, rng, rng.uniform(0.005, 0.08));
    Field b = random_smooth_field(d, rng, rng.uniform(0.005, 0.08));
    Field ra = remainder_R(S, a), rb = remainder_R(S, b);
    Field dr = ra - rb, dh = a - b;
    lip = std::max(lip, trinorm(d, lab.gap.K, dr) / trinorm(d, lab.gap.K, dh));
  }
  CHECK(lip < lab.gap.eps_gap);
  MESSAGE("measured Lip(R) = ", lip, " vs eps_gap = ", lab.gap.eps_gap);
}

TEST_CASE("remainder R: quadratic smallness along a stable mode") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  const auto& d = *lab.decomp;
  std::vector<double> ts, ys;
  double r_at_01 = 0.0;
  for (double delta : {1e-1, 1e-2, 1e-3, 1e-4}) {
    std::vector<double> c(d.kmax, 0.0);
    c[1] = delta;
    Field h = d.reconstruct(c);
    Field r = remainder_R(S, h);
    if (delta == 1e-1) {
      // at this amplitude sup V grad h > 2 eps: the cutoffs are active and
      // the remainder drops below the quadratic law
      CHECK(sup_weighted_grad(h, lab.state->V) > 2.0 * lab.cfg.epsilon);
      r_at_01 = d.norm_b(r);
      continue;
    }
    ts.push_back(std::log(delta));
    ys.push_back(std::log(d.norm_b(r)));
  }
  // slope 2 on the log-log fit over the truncation-inactive range
  CHECK(ls_slope(ts, ys) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(r_at_01 <= std::exp(ys.front()) * 100.0);  // sub-quadratic beyond the cutoff
}

TEST_CASE("remainder R: Lipschitz constant scales linearly in eps") {
  // paired sampling: the same unit shapes rescaled by eps, so the measured
  // slope reflects the eps-dependence and not sampling noise
  const Lab& lab = lab401();
  const auto& d = *lab.decomp;
  Rng rng(33);
  const int T = 25;
  std::vector<Field> shape(T), pert(T);
  std::vector<double> amp(T);
  for (int t = 0; t < T; ++t) {
    Field u = random_smooth_field(d, rng, 1.0);
    u *= 1.0 / std::max(norm_inf(u), sup_weighted_grad(u, lab.state->V));
    shape[t] = u;
    Field v = random_smooth_field(d, rng, 1.0);
    v *= 1.0 / std::max(norm_inf(v), sup_weighted_grad(v, lab.state->V));
    pert[t] = v;
    amp[t] = rng.uniform(0.5, 2.5);
  }
  std::vector<double> ts, ys;
  for (double eps : {0.01, 0.02, 0.04}) {
    Stepper S = lab.make_stepper(true, 0.0, eps);
    double lip = 0.0;
    for (int t = 0; t < T; ++t) {
      Field a = amp[t] * eps * shape[t];
      Field b = a;
      b.axpy(0.02 * eps, pert[t]);
      Field ra = remainder_R(S, a), rb = remainder_R(S, b);
      Field dr = ra - rb, dh = a - b;
      lip = std::max(lip, trinorm(d, lab.gap.K, dr) / trinorm(d, lab.gap.K, dh));
    }
    ts.push_back(std::log(eps));
    ys.push_back(std::log(lip));
  }
  double slope = ls_slope(ts, ys);
  CHECK(slope > 0.7);
  CHECK(slope < 1.3);
}

TEST_CASE("picard: agreement with stepping, zero fixed point, contraction") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  const auto& d = *lab.decomp;

  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    Field h0 = random_smooth_field(d, rng, rng.uniform(0.005, 0.05));
    PicardResult pr = picard_solve(S, h0, 1.0, 1e-11);
    Field viaS = S.flow(h0, 1.0);
    Field diff = pr.traj.h.back() - viaS;
    CHECK(d.norm_b(diff) <= 1e-5);
    CHECK(pr.contraction <= 0.5);  // measured factor ~ C eps per sweep
  }

  Field zero(lab.grid);
  PicardResult pz = picard_solve(S, zero, 1.0, 1e-12);
  CHECK(norm_inf(pz.traj.h.back()) == 0.0);

  CHECK_THROWS_AS(picard_solve(S, zero, 2.0, 1e-10), std::invalid_argument);
}

TEST_CASE("solve_relative_error: stable datum decays at the lambda_2 rate") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(false);  // untruncated
  const auto& d = *lab.decomp;
  std::vector<double> c(d.kmax, 0.0);
  c[1] = 1e-4;
  Field h0 = d.reconstruct(c);
  TrajectoryRecord tr = solve_relative_error(S, h0, 1.25, 1.0 / 16);
  RateFit f = fit_decay_rate(tr.t, tr.norm_p1, 0.8);
  CHECK(f.slope < 0.0);
  CHECK(f.rate == doctest::Approx(d.lambda[1]).epsilon(0.05));
}

TEST_CASE("solve_relative_error: unstable constant grows until the cutoff bites") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  Field h0(lab.grid, lab.cfg.epsilon / 2.0);
  TrajectoryRecord tr = solve_relative_error(S, h0, 2.0, 1.0 / 16);
  CHECK(tr.trunc_active.front() == 0);
  CHECK(tr.trunc_active.back() == 1);
  // for p = 2 the constant-mode dynamics stay exactly linear: h(t) = h0 e^t
  int last = tr.size() - 1;
  CHECK(tr.norm_inf_v[last] ==
        doctest::Approx(lab.cfg.epsilon / 2.0 * std::exp(tr.t[last])).epsilon(1e-8));

  Field zero(lab.grid);
  TrajectoryRecord tz = solve_relative_error(S, zero, 0.5, 1.0 / 16);
  for (int j = 0; j < tz.size(); ++j) CHECK(tz.norm_p1[j] == 0.0);
}

TEST_CASE("solve_relative_error: untruncated run aborts out of the admissible range") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(false);
  Field h0(lab.grid, -0.96);  // collapses toward 1+h = 0 under the backward constant flow
  CHECK_THROWS_AS(solve_relative_error(S, h0, 6.0, 1.0 / 16), FlowError);
}

TEST_CASE("solve_relative_error: blow-up guard reports the failure time") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  Field h0(lab.grid, 0.5);  // grows like e^t under the dead-cutoff linear flow
  try {
    solve_relative_error(S, h0, 5.0, 1.0 / 16);
    FAIL("expected a blow-up abort");
  } catch (const FlowError& e) {
    CHECK(e.t > 2.5);
    CHECK(e.t < 3.5);  // 0.5 e^t crosses 10 at t = ln 20
  }
}

TEST_CASE("solve_rescaled_v: stationary datum is a fixed point") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(false);
  Field v0 = lab.state->V;
  TrajectoryRecord tr = solve_rescaled_v(S, v0, 1.0, 1.0 / 8);
  for (int j = 0; j < tr.size(); ++j) {
    Field v = rescaled_v_field(*lab.state, tr.h[j]);
    Field dv = v - lab.state->V;
    CHECK(norm_inf(dv) <= 1e-8);
  }
}

TEST_CASE("solve_rescaled_v: constant relative perturbation grows at rate p-1") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(false);
  Field v0 = lab.state->V;
  v0 *= 1.001;
  TrajectoryRecord tr = solve_rescaled_v(S, v0, 1.0, 1.0 / 16);
  std::vector<double> amp;
  for (int j = 0; j < tr.size(); ++j) amp.push_back(lab.decomp->coef_k(tr.h[j], 0));
  RateFit f = fit_decay_rate(tr.t, amp, 1.0);
  CHECK(f.slope > 0.0);  // growth
  CHECK(f.rate == doctest::Approx(lab.cfg.p - 1.0).epsilon(0.01));
}

TEST_CASE("solve_original_w: separated datum extincts on schedule") {
  const Lab& lab = lab401();
  const auto& st = *lab.state;
  const double m = 1.0 / st.p, T = 0.2;
  Field w0(lab.grid);
  for (int i = 0; i < lab.grid->n(); ++i)
    w0[i] = std::pow((1.0 - m) * T, 1.0 / (1.0 - m)) * std::pow(st.V[i], 1.0 / m);

  auto res = solve_original_w(lab.state, w0, 1e-5, 0.5, 1e-8, 64);
  CHECK(std::abs(res.T_extinction - T) <= 0.05 * T);

  // mass decreases monotonically under the Dirichlet dissipation
  for (std::size_t j = 1; j < res.mass.size(); ++j) CHECK(res.mass[j] <= res.mass[j - 1] + 1e-14);

  // rescaled v approaches V
  double best = 1e300;
  for (int j = 1; j < res.traj.size(); ++j) {
    double tau = res.traj.t[j];
    if (!(tau < res.T_extinction)) break;
    double a = std::pow((1.0 - m) * (res.T_extinction - tau), 1.0 / (1.0 - m));
    double dmax = 0.0;
    for (int i = 0; i < lab.grid->n(); ++i)
      dmax = std::max(dmax, std::abs(std::pow(res.traj.h[j][i] / a, m) - st.V[i]));
    best = std::min(best, dmax);
  }
  CHECK(best <= 1e-2);

  Field neg = w0;
  neg[5] = -1.0;
  CHECK_THROWS_AS(solve_original_w(lab.state, neg, 1e-4, 0.5), std::invalid_argument);
  Field zero(lab.grid);
  CHECK_THROWS_AS(solve_original_w(lab.state, zero, 1e-4, 0.5), std::invalid_argument);
}

TEST_CASE("grad_bound_monitor: smooth small data satisfy the gradient bound") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(false);
  const auto& d = *lab.decomp;
  Rng rng(55);
  Field h0 = random_smooth_field(d, rng, 1e-3, 6);
  TrajectoryRecord tr = solve_relative_error(S, h0, 2.0, 1.0 / 8);
  auto rep = grad_bound_monitor(tr, lab.cfg.epsilon);
  CHECK(rep.verdict);
  CHECK(rep.sup_vgrad_after_1 < 0.2 * lab.cfg.epsilon);
  CHECK(rep.eps_star <= 2e-3);

  // parabolic smoothing: the weighted gradient amplitude does not grow
  CHECK(tr.sup_vgrad.back() <= tr.sup_vgrad.front() + 1e-12);

  // a steep but admissible interior gradient relaxes over [0,1]
  Field steep(lab.grid);
  for (int i = 0; i < lab.grid->n(); ++i)
    steep[i] = 1e-3 * std::tanh(30.0 * (lab.grid->x[i] - 0.5));
  TrajectoryRecord ts = solve_relative_error(S, steep, 1.0, 0.25);
  CHECK(ts.sup_vgrad.back() < ts.sup_vgrad.front());

  TrajectoryRecord tz;
  tz.state = lab.state;
  tz.eps_flag = lab.cfg.epsilon;
  Field zero(lab.grid);
  tz.push(0.0, zero, d);
  tz.push(1.5, zero, d);
  auto rz = grad_bound_monitor(tz, lab.cfg.epsilon);
  CHECK(rz.sup_vgrad_after_1 == 0.0);
  CHECK(rz.verdict);
}

TEST_CASE("fit_decay_rate: exact, noisy and constant series") {
  std::vector<double> ts, ys;
  for (int j = 0; j <= 40; ++j) {
    ts.push_back(0.1 * j);
    ys.push_back(std::exp(-2.0 * 0.1 * j));
  }
  RateFit f = fit_decay_rate(ts, ys, 1.0);
  CHECK(std::abs(f.rate - 2.0) <= 1e-8);
  CHECK(f.r2 >= 1.0 - 1e-12);

  std::vector<double> yn;
  for (int j = 0; j <= 40; ++j)
    yn.push_back(std::exp(-2.0 * ts[j]) * (1.0 + 0.01 * std::sin(ts[j])));
  RateFit fn = fit_decay_rate(ts, yn, 1.0);
  CHECK(std::abs(fn.rate - 2.0) <= 0.01);

  std::vector<double> yc(ts.size(), 0.7);
  RateFit fc = fit_decay_rate(ts, yc, 0.5);
  CHECK(std::abs(fc.rate) <= 1e-8);

  CHECK_THROWS_AS(fit_decay_rate({0, 1, 2}, {1, 1, 1}, 1.0), std::invalid_argument);
  std::vector<double> bad = yn;
  bad[7] = -1.0;
  CHECK_THROWS_AS(fit_decay_rate(ts, bad, 1.0), std::invalid_argument);
}

TEST_CASE("N-form matches M along computed solutions") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(false);
  const auto& d = *lab.decomp;
  Nonlinearity nl(lab.assembly);
  std::vector<double> c(d.kmax, 0.0);
  c[0] = 0.02;
  c[1] = 0.02;
  Field h0 = d.reconstruct(c);
  TrajectoryRecord tr = solve_relative_error(S, h0, 0.25, lab.cfg.dt);
  double worst = 0.0;
  for (int j = 1; j + 1 < tr.size(); j += 7) {
    Field dh = tr.h[j + 1] - tr.h[j - 1];
    dh *= 1.0 / (tr.t[j + 1] - tr.t[j - 1]);
    Field N = eval_N(tr.h[j], dh, lab.cfg.p);
    Field M = nl.eval_M(tr.h[j]);
    Field diff = N - M;
    worst = std::max(worst, d.norm_b(diff) / d.norm_b(M));
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("truncated and untruncated flows coincide on small data") {
  const Lab& lab = lab401();
  Stepper St = lab.make_stepper(true);
  Stepper Su = lab.make_stepper(false);
  const auto& d = *lab.decomp;
  Rng rng(61);
  Field h0 = random_smooth_field(d, rng, 0.01);
  double s = std::max(norm_inf(h0), sup_weighted_grad(h0, lab.state->V));
  h0 *= 0.5 * lab.cfg.epsilon / s;

  TrajectoryRecord ta = solve_relative_error(St, h0, 1.0, 1.0 / 16);
  TrajectoryRecord tb = solve_relative_error(Su, h0, 1.0, 1.0 / 16);
  for (int j = 0; j < ta.size(); ++j) {
    CHECK(ta.trunc_active[j] == 0);
    Field diff = ta.h[j] - tb.h[j];
    CHECK(d.norm_b(diff) <= 1e-10);
  }
}

TEST_CASE("trajectory CSV has the documented columns") {
  const Lab& lab = lab401();
  Stepper S = lab.make_stepper(true);
  Field h0(lab.grid, 1e-3);
  TrajectoryRecord tr = solve_relative_error(S, h0, 0.25, 1.0 / 8);
  std::ostringstream os;
  write_trajectory_csv(tr, os);
  CHECK(os.str().substr(0, 42) == "t,norm_p1,norm_inf,sup_VgradH,trunc_active");
}
