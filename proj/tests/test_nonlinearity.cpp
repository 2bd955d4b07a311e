#include <doctest.h>

#include <cmath>

#include "fdx/lab.hpp"
#include "fdx/nonlinearity.hpp"

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

TEST_CASE("eta: plateau, support, quintic midpoint") {
  CHECK(eta(0.5) == 1.0);
  CHECK(eta(-1.0) == 1.0);
  CHECK(eta(2.5) == 0.0);
  CHECK(eta(1.5) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(eta(-1.5) == doctest::Approx(0.5).epsilon(1e-14));

  // Lipschitz constant of z -> eta(z/eps) is at most 2/eps
  const double eps = 0.03;
  double lip = 0.0;
  for (int i = 0; i < 4000; ++i) {
    double z = -3.0 * eps + 6.0 * eps * i / 4000.0;
    double dz = 1e-6 * eps;
    lip = std::max(lip, std::abs(eta((z + dz) / eps) - eta(z / eps)) / dz);
  }
  CHECK(lip <= 2.0 / eps);
  CHECK(lip >= 1.5 / eps);  // the quintic really attains ~1.875/eps
}

TEST_CASE("eta: even, monotone on the transition, C^2 across the joints") {
  for (double z : {0.3, 0.9, 1.2, 1.7, 2.3}) CHECK(eta(z) == eta(-z));
  for (double z = 1.0; z < 2.0 - 1e-3; z += 1e-3) CHECK(eta(z + 1e-3) <= eta(z));

  // first and second divided differences stay continuous across z = 1, 2
  auto d1 = [](double z, double h) { return (eta(z + h) - eta(z - h)) / (2 * h); };
  auto d2 = [](double z, double h) { return (eta(z + h) - 2 * eta(z) + eta(z - h)) / (h * h); };
  for (double joint : {1.0, 2.0}) {
    CHECK(std::abs(d1(joint, 1e-5)) <= 1e-8);   // eta' vanishes at the joints
    CHECK(std::abs(d2(joint, 1e-4)) <= 1e-2);   // eta'' -> 0 from both sides
  }
  CHECK(std::abs(d2(1.5, 1e-4)) <= 30.0);  // bounded curvature in the interior
}

TEST_CASE("cutoff0 and cutoff1: plateau and support behavior") {
  const Lab& lab = lab401();
  const double eps = 0.05;

  Rng rng(3);
  Field h = random_smooth_field(*lab.decomp, rng, 0.01);
  double scale = eps / (2.0 * norm_inf(h));
  h *= scale;  // now |h|_inf = eps/2
  Field e0 = cutoff0(h, eps);
  for (double t : e0.v) CHECK(t == 1.0);

  Field zero(lab.grid);
  Field e1 = cutoff1(zero, lab.state->V, eps);
  for (double t : e1.v) CHECK(t == 1.0);

  // support: where V grad h reaches 3 eps the cutoff vanishes
  Field ramp(lab.grid);
  for (int i = 0; i < lab.grid->n(); ++i) ramp[i] = 3.0 * eps * lab.grid->x[i];
  Field er = cutoff1(ramp, lab.state->V, eps);
  Field dr = gradient(ramp);
  for (int i = 0; i < lab.grid->n(); ++i) {
    if (std::abs(lab.state->V[i] * dr[i]) >= 2.0 * eps) CHECK(er[i] == 0.0);
  }

  CHECK_THROWS_AS(cutoff0(h, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cutoff1(h, lab.state->V, -1.0), std::invalid_argument);
}

TEST_CASE("eval_M: zero datum, constants, admissibility") {
  const Lab& lab = lab401();
  Nonlinearity nl(lab.assembly);

  Field zero(lab.grid);
  Field m0 = nl.eval_M(zero);
  for (double t : m0.v) CHECK(t == 0.0);

  // p = 2: M vanishes identically on constants
  Field c(lab.grid, 0.12);
  Field mc = nl.eval_M(c);
  for (int i = 1; i + 1 < lab.grid->n(); ++i) CHECK(std::abs(mc[i]) <= 1e-10);

  Field bad(lab.grid, -1.5);
  CHECK_THROWS_WITH_AS(nl.eval_M(bad), doctest::Contains("admissible"), std::invalid_argument);
}

TEST_CASE("eval_M: p = 3 constants reduce to -c^2/(1+c)") {
  RunConfig cfg;
  cfg.p = 3.0;
  cfg.k_max = 8;
  Lab lab = make_lab(cfg);
  Nonlinearity nl(lab.assembly);
  const double c = 0.1;
  Field h(lab.grid, c);
  Field m = nl.eval_M(h);
  for (int i = 1; i + 1 < lab.grid->n(); ++i)
    CHECK(m[i] == doctest::Approx(-c * c / (1.0 + c)).epsilon(1e-8));
}

TEST_CASE("eval_M: the two forms agree at the discrete level") {
  const Lab& lab = lab401();
  Nonlinearity nl(lab.assembly);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Field h = random_smooth_field(*lab.decomp, rng, rng.uniform(0.005, 0.05));
    if (norm_inf(h) > 0.1) h *= 0.1 / norm_inf(h);
    Field m2 = nl.eval_M(h);
    Field m1 = nl.eval_M(h, /*first_form=*/true);
    Field diff = m2 - m1;
    CHECK(lab.decomp->norm_b(diff) <= 1e-8);
  }
}

TEST_CASE("quadratic smallness of M on constants") {
  const Lab& lab = lab401();
  Nonlinearity nl(lab.assembly);
  const double p = lab.cfg.p;
  for (double c : {-0.3, -0.1, -0.01, 0.01, 0.1, 0.3}) {
    Field h(lab.grid, c);
    Field m = nl.eval_M(h);
    double mid = std::abs(m[lab.grid->n() / 2]);
    CHECK(mid <= p * p * c * c);
  }
}

TEST_CASE("eval_M_trunc: coincidence with M on small data") {
  const Lab& lab = lab401();
  Nonlinearity nl(lab.assembly);
  TruncationConfig cfg{0.05, 0.05};

  Rng rng(13);
  Field h = random_smooth_field(*lab.decomp, rng, 0.01);
  // enforce the hypothesis |h| <= eps, |V grad h| <= eps
  double s = std::max(norm_inf(h), sup_weighted_grad(h, lab.state->V));
  h *= (0.8 * cfg.eps) / s;
  REQUIRE(norm_inf(h) <= cfg.eps);
  REQUIRE(sup_weighted_grad(h, lab.state->V) <= cfg.eps);

  Field m = nl.eval_M(h);
  Field me = nl.eval_M_trunc(h, cfg);
  Field diff = me - m;
  CHECK(norm_inf(diff) <= 1e-12);
}

TEST_CASE("eval_M_trunc: dead cutoffs give exactly zero; M_trunc(0) = 0") {
  const Lab& lab = lab401();
  Nonlinearity nl(lab.assembly);
  TruncationConfig cfg{0.05, 0.05};

  Field big(lab.grid, 3.0 * cfg.eps);  // flat, far outside the amplitude cutoff
  Field m = nl.eval_M_trunc(big, cfg);
  for (double t : m.v) CHECK(t == 0.0);

  Field zero(lab.grid);
  Field mz = nl.eval_M_trunc(zero, cfg);
  for (double t : mz.v) CHECK(t == 0.0);

  TruncationConfig badcfg{0.2, 0.05};
  CHECK_THROWS_AS(nl.eval_M_trunc(zero, badcfg), std::invalid_argument);
}

TEST_CASE("truncation Lipschitz estimate for the scalar zeroth-order term") {
  // |eta0(z) f(z) - eta0(zt) f(zt)| <= C eps |z - zt| with f = (1+z)^p-1-pz
  const double p = 2.0;
  for (double eps : {0.01, 0.05}) {
    auto g = [&](double z) { return eta(z / eps) * (std::pow(1.0 + z, p) - 1.0 - p * z); };
    Rng rng(101);
    double cmax = 0.0;
    for (int i = 0; i < 10000; ++i) {
      double z = rng.uniform(-3.0 * eps, 3.0 * eps);
      double zt = rng.uniform(-3.0 * eps, 3.0 * eps);
      if (z == zt) continue;
      cmax = std::max(cmax, std::abs(g(z) - g(zt)) / (eps * std::abs(z - zt)));
    }
    CHECK(cmax <= 12.0);
    CHECK(cmax >= 1.0);  // the bound is attained at scale eps, not slack
  }
}

TEST_CASE("eval_N: algebraic examples") {
  const Lab& lab = lab401();
  Field zero(lab.grid), anything(lab.grid, 0.7);
  Field n0 = eval_N(zero, anything, 2.0);
  for (double t : n0.v) CHECK(t == 0.0);

  Field h(lab.grid, 0.1), dh(lab.grid, 0.0);
  Field n1 = eval_N(h, dh, 2.0);
  for (double t : n1.v) CHECK(t == doctest::Approx(0.01).epsilon(1e-14));

  Field bad(lab.grid, -2.0);
  CHECK_THROWS_AS(eval_N(bad, dh, 2.0), std::invalid_argument);
}
