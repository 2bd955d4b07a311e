#pragma once

// Dense and tridiagonal linear algebra kernels: Cholesky for SPD tridiagonal
// systems, a pivoted tridiagonal solver for indefinite Newton systems, and the
// classical Householder + implicit-shift QL pair for the dense symmetric
// eigenproblem.  Everything is deterministic; no iterative solvers.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fdx {

/// Symmetric tridiagonal matrix: diag d[0..n-1], off-diagonal e[0..n-2]
/// (e[i] couples rows i and i+1).
struct SymTridiag {
  std::vector<double> d;
  std::vector<double> e;
  int n() const { return static_cast<int>(d.size()); }
};

/// Cholesky factor of an SPD tridiagonal matrix: L lower bidiagonal with
/// diagonal ld and subdiagonal le, A = L L^T.
struct TridiagCholesky {
  std::vector<double> ld;
  std::vector<double> le;

  static TridiagCholesky factor(const SymTridiag& a) {
    const int n = a.n();
    TridiagCholesky f;
    f.ld.resize(n);
    f.le.resize(n > 0 ? n - 1 : 0);
    double prev_le = 0.0;
    for (int i = 0; i < n; ++i) {
      double t = a.d[i] - prev_le * prev_le;
      if (!(t > 0.0)) throw std::runtime_error("tridiag cholesky: matrix not positive definite");
      f.ld[i] = std::sqrt(t);
      if (i + 1 < n) {
        f.le[i] = a.e[i] / f.ld[i];
        prev_le = f.le[i];
      }
    }
    return f;
  }

  /// Solves L L^T x = b in place.
  void solve(std::vector<double>& b) const {
    const int n = static_cast<int>(ld.size());
    for (int i = 0; i < n; ++i) {
      double s = b[i];
      if (i > 0) s -= le[i - 1] * b[i - 1];
      b[i] = s / ld[i];
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = b[i];
      if (i + 1 < n) s -= le[i] * b[i + 1];
      b[i] = s / ld[i];
    }
  }
};

/// General tridiagonal solve with partial pivoting (LU with row swaps).
/// sub[i] couples row i+1 with column i, sup[i] couples row i with column i+1.
inline std::vector<double> tridiag_solve(std::vector<double> sub, std::vector<double> diag,
                                         std::vector<double> sup, std::vector<double> rhs) {
  const int n = static_cast<int>(diag.size());
  if (n == 0) return rhs;
  std::vector<double> extra(n, 0.0);  // fill-in two above the diagonal
  for (int i = 0; i < n - 1; ++i) {
    double a_ii = diag[i], a_ip = sub[i];
    if (std::abs(a_ip) > std::abs(a_ii)) {
      std::swap(diag[i], sub[i]);
      double s = (i + 1 < n) ? sup[i] : 0.0;
      sup[i] = diag[i + 1];
      diag[i + 1] = s;
      extra[i] = (i + 2 < n) ? sup[i + 1] : 0.0;
      if (i + 2 < n) sup[i + 1] = 0.0;
      std::swap(rhs[i], rhs[i + 1]);
    }
    if (diag[i] == 0.0) throw std::runtime_error("tridiag solve: singular matrix");
    double m = sub[i] / diag[i];
    diag[i + 1] -= m * sup[i];
    if (i + 2 < n) sup[i + 1] -= m * extra[i];
    rhs[i + 1] -= m * rhs[i];
  }
  if (diag[n - 1] == 0.0) throw std::runtime_error("tridiag solve: singular matrix");
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = rhs[i];
    if (i + 1 < n) s -= sup[i] * x[i + 1];
    if (i + 2 < n) s -= extra[i] * x[i + 2];
    x[i] = s / diag[i];
  }
  return x;
}

/// Dense symmetric matrix, row-major.
struct DenseSym {
  int n = 0;
  std::vector<double> a;  // n*n

  explicit DenseSym(int n_) : n(n_), a(static_cast<std::size_t>(n_) * n_, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

// Householder reduction of a real symmetric matrix to tridiagonal form with
// accumulation of the orthogonal transform (classical tred2).  On exit z holds
// Q, d the diagonal and e the subdiagonal (e[0] unused).
inline void tred2(DenseSym& z, std::vector<double>& d, std::vector<double>& e) {
  const int n = z.n;
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (int i = n - 1; i > 0; --i) {
    int l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (int k = 0; k <= l; ++k) scale += std::abs(z.at(i, k));
      if (scale == 0.0) {
        e[i] = z.at(i, l);
      } else {
        for (int k = 0; k <= l; ++k) {
          z.at(i, k) /= scale;
          h += z.at(i, k) * z.at(i, k);
        }
        double f = z.at(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z.at(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j <= l; ++j) {
          z.at(j, i) = z.at(i, j) / h;
          g = 0.0;
          for (int k = 0; k <= j; ++k) g += z.at(j, k) * z.at(i, k);
          for (int k = j + 1; k <= l; ++k) g += z.at(k, j) * z.at(i, k);
          e[j] = g / h;
          f += e[j] * z.at(i, j);
        }
        double hh = f / (h + h);
        for (int j = 0; j <= l; ++j) {
          f = z.at(i, j);
          e[j] = g = e[j] - hh * f;
          for (int k = 0; k <= j; ++k) z.at(j, k) -= f * e[k] + g * z.at(i, k);
        }
      }
    } else {
      e[i] = z.at(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    int l = i - 1;
    if (d[i] != 0.0) {
      for (int j = 0; j <= l; ++j) {
        double g = 0.0;
        for (int k = 0; k <= l; ++k) g += z.at(i, k) * z.at(k, j);
        for (int k = 0; k <= l; ++k) z.at(k, j) -= g * z.at(k, i);
      }
    }
    d[i] = z.at(i, i);
    z.at(i, i) = 1.0;
    for (int j = 0; j <= l; ++j) {
      z.at(j, i) = 0.0;
      z.at(i, j) = 0.0;
    }
  }
}

// Implicit-shift QL iteration on a symmetric tridiagonal matrix (classical
// tql2).  d holds the diagonal, e the subdiagonal in e[1..n-1]; z is updated
// so its columns become the eigenvectors.  Eigenvalues return in d, unsorted.
inline void tql2(std::vector<double>& d, std::vector<double>& e, DenseSym& z) {
  const int n = static_cast<int>(d.size());
  if (n <= 1) return;
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == 60) throw std::runtime_error("tql2: eigensolver non-convergence");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        int i;
        for (i = m - 1; i >= l; --i) {
          double f = s * e[i];
          double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (int k = 0; k < n; ++k) {
            f = z.at(k, i + 1);
            z.at(k, i + 1) = s * z.at(k, i) + c * f;
            z.at(k, i) = c * z.at(k, i) - s * f;
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

/// Full eigendecomposition of a dense symmetric matrix.  Columns of z are the
/// eigenvectors; eigenvalues in d, unsorted.
inline void sym_eigen(DenseSym& z, std::vector<double>& d) {
  std::vector<double> e;
  tred2(z, d, e);
  tql2(d, e, z);
}

}  // namespace fdx
