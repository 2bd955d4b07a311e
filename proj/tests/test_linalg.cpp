#include <doctest.h>

#include <cmath>
#include <vector>

#include "fdx/linalg.hpp"
#include "fdx/util.hpp"

using namespace fdx;

TEST_CASE("tridiagonal cholesky solves an SPD system") {
  SymTridiag a;
  a.d = {4.0, 5.0, 6.0, 5.0};
  a.e = {-1.0, -2.0, -1.0};
  auto f = TridiagCholesky::factor(a);
  std::vector<double> x_true = {1.0, -2.0, 0.5, 3.0};
  std::vector<double> b(4, 0.0);
  for (int i = 0; i < 4; ++i) {
    b[i] = a.d[i] * x_true[i];
    if (i > 0) b[i] += a.e[i - 1] * x_true[i - 1];
    if (i < 3) b[i] += a.e[i] * x_true[i + 1];
  }
  f.solve(b);
  for (int i = 0; i < 4; ++i) CHECK(b[i] == doctest::Approx(x_true[i]).epsilon(1e-13));
}

TEST_CASE("pivoted tridiagonal solver handles indefinite matrices") {
  // diag dominated by off-diagonal entries forces row swaps
  std::vector<double> sub = {3.0, -2.5, 4.0};
  std::vector<double> diag = {0.1, -1.0, 0.2, 5.0};
  std::vector<double> sup = {2.0, 3.0, -1.0};
  std::vector<double> x_true = {1.0, 2.0, -1.0, 0.5};
  std::vector<double> b(4, 0.0);
  for (int i = 0; i < 4; ++i) {
    b[i] = diag[i] * x_true[i];
    if (i > 0) b[i] += sub[i - 1] * x_true[i - 1];
    if (i < 3) b[i] += sup[i] * x_true[i + 1];
  }
  auto x = tridiag_solve(sub, diag, sup, b);
  for (int i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(x_true[i]).epsilon(1e-12));
}

TEST_CASE("dense symmetric eigensolver reproduces a random spectrum") {
  const int n = 60;
  Rng rng(1234);
  // build A = Q D Q^T from a random orthogonal-ish basis via symmetrization
  DenseSym a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = rng.uniform(-1.0, 1.0);
      a.at(i, j) = v;
      a.at(j, i) = v;
    }
  DenseSym z = a;
  std::vector<double> d;
  sym_eigen(z, d);

  // residual ||A v - lambda v|| per pair
  for (int k = 0; k < n; ++k) {
    double rmax = 0.0, vnorm = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += a.at(i, j) * z.at(j, k);
      rmax = std::max(rmax, std::abs(s - d[k] * z.at(i, k)));
      vnorm += z.at(i, k) * z.at(i, k);
    }
    CHECK(vnorm == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rmax < 1e-11);
  }

  // trace preserved
  double tr_a = 0.0, tr_d = 0.0;
  for (int i = 0; i < n; ++i) tr_a += a.at(i, i);
  for (double t : d) tr_d += t;
  CHECK(tr_a == doctest::Approx(tr_d).epsilon(1e-12));

  // orthogonality of the eigenvector matrix
  for (int k = 0; k < n; k += 7)
    for (int l = k + 1; l < n; l += 7) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += z.at(i, k) * z.at(i, l);
      CHECK(std::abs(s) < 1e-11);
    }
}

TEST_CASE("phi functions match their limits") {
  CHECK(phi1(0.0) == doctest::Approx(1.0));
  CHECK(phi2(0.0) == doctest::Approx(0.5));
  CHECK(phi1(1e-9) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(phi1(2.0) == doctest::Approx((std::exp(2.0) - 1.0) / 2.0).epsilon(1e-14));
  CHECK(phi2(-3.0) == doctest::Approx((std::exp(-3.0) - 1.0 + 3.0) / 9.0).epsilon(1e-14));
}
