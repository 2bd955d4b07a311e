#pragma once

// The nonlinearity M(h) of the relative-error flow, its N-form involving the
// time derivative, the smooth cutoffs in amplitude and weighted gradient, and
// the truncated nonlinearity M^eps.
//
// Discretization contract: the divergence term uses the identical two-point
// flux stencil as the operator assembly, the h-dependent flux factor is the
// arithmetic face mean, and the gradient-square term is the face expression
//   GS_i = -(1/(2 B_ii)) sum_{f at i} w_f (u_{i+1}-u_i)(h_{i+1}-h_i),
// u = (1+h)^{1-p}.  With these choices the expanded form reproduces the
// compact form  (1+h)^{1-p}((1+h)^p-1-ph) + (1-(1+h)^{1-p}) L h  exactly at
// the discrete level, not merely to O(h^2).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fdx/grid.hpp"
#include "fdx/spectral.hpp"

namespace fdx {

/// Even C^2 cutoff: 1 on [-1,1], 0 outside [-2,2], quintic-smoothstep
/// transition.  max |eta'| = 1.875, so z -> eta(z/eps) is (1.875/eps)-Lipschitz.
inline double eta(double z) {
  double a = std::abs(z);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  double s = a - 1.0;
  return 1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

struct TruncationConfig {
  double eps = 0.05;
  double eps0 = 0.05;  // admissibility threshold

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("TruncationConfig: eps must be positive");
    if (!(eps <= eps0)) throw std::invalid_argument("TruncationConfig: eps exceeds eps0");
    if (!(2.0 * eps0 < 0.5))
      throw std::invalid_argument("TruncationConfig: eps0 too large for the power clamp");
  }
};

/// Amplitude cutoff eta_0[h] = eta(h/eps), pointwise.
inline Field cutoff0(const Field& h, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("cutoff0: eps must be positive");
  Field out(h.grid);
  for (int i = 0; i < h.n(); ++i) out[i] = eta(h[i] / eps);
  return out;
}

/// Gradient cutoff eta_1[h] = eta(h/eps) eta(V grad h /eps) (one derivative
/// direction on the interval and the radial ball).
inline Field cutoff1(const Field& h, const Field& V, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("cutoff1: eps must be positive");
  Field dh = gradient(h);
  Field out(h.grid);
  for (int i = 0; i < h.n(); ++i) out[i] = eta(h[i] / eps) * eta(V[i] * dh[i] / eps);
  return out;
}

namespace detail {

// (1+z)^{1-p} with fast paths for the common exponents.
inline double upow(double z, double p) {
  double w = 1.0 + z;
  if (p == 2.0) return 1.0 / w;
  if (p == 3.0) return 1.0 / (w * w);
  return std::pow(w, 1.0 - p);
}

// (1+z)^p - 1 - p z
inline double ppow(double z, double p) {
  if (p == 2.0) return z * z;
  if (p == 3.0) return z * z * (3.0 + z);
  return std::pow(1.0 + z, p) - 1.0 - p * z;
}

}  // namespace detail

/// N(h) = (1+h)^p - 1 - ph + (1-(1+h)^{p-1}) dh/dt; equals M(h) along
/// solutions of the relative-error flow.  (The coefficient of dh/dt follows
/// from  (1+h)^{p-1} dh/dt + L h = (1+h)^p - 1 - ph,  the h-form of the
/// rescaled equation; a constant-in-space solution checks it exactly.)
inline Field eval_N(const Field& h, const Field& dhdt, double p) {
  if (!same_grid(h, dhdt)) throw std::invalid_argument("eval_N: grid mismatch");
  Field out(h.grid);
  for (int i = 0; i < h.n(); ++i) {
    double w = 1.0 + h[i];
    if (!(w > 0.0)) throw std::invalid_argument("eval_N: out of admissible range (1+h <= 0)");
    double wp1 = (p == 2.0) ? w : (p == 3.0 ? w * w : std::pow(w, p - 1.0));
    out[i] = detail::ppow(h[i], p) + (1.0 - wp1) * dhdt[i];
  }
  return out;
}

/// Evaluator for M and M^eps bound to one operator assembly.
class Nonlinearity {
 public:
  explicit Nonlinearity(std::shared_ptr<const OperatorAssembly> a) : a_(std::move(a)) {}

  const OperatorAssembly& assembly() const { return *a_; }

  /// Untruncated M(h); requires 1 + h > 0 everywhere.  With first_form set,
  /// evaluates the compact expression through the operator action instead
  /// (cross-check route).
  Field eval_M(const Field& h, bool first_form = false) const {
    for (int i = 0; i < h.n(); ++i)
      if (!(1.0 + h[i] > 0.0))
        throw std::invalid_argument("eval_M: out of admissible range (1+h <= 0)");
    if (first_form) return eval_first_form(h);
    return eval_core(h, nullptr, nullptr, false);
  }

  /// Truncated M^eps(h): eta_0 on the zeroth-order bracket, eta_1 inside the
  /// flux and gradient-square terms.  Globally defined.
  Field eval_M_trunc(const Field& h, const TruncationConfig& cfg) const {
    cfg.validate();
    Field e0 = cutoff0(h, cfg.eps);
    Field e1 = cutoff1(h, a_->state->V, cfg.eps);
    return eval_core(h, &e0, &e1, true);
  }

 private:
  std::shared_ptr<const OperatorAssembly> a_;

  Field eval_first_form(const Field& h) const {
    const double p = a_->p;
    Field Lh = a_->apply_L(h);
    Field out(h.grid);
    for (int i = 0; i < h.n(); ++i) {
      double u = detail::upow(h[i], p);
      out[i] = u * detail::ppow(h[i], p) + (1.0 - u) * Lh[i];
    }
    return out;
  }

  // Shared core.  eta0/eta1 null means identically one (untruncated); clamped
  // powers guard only regions where the cutoffs vanish anyway.
  Field eval_core(const Field& h, const Field* eta0, const Field* eta1, bool clamp) const {
    const OperatorAssembly& a = *a_;
    const Grid& g = *a.grid;
    const double p = a.p;
    const int n = g.n();

    std::vector<double> u(n), zeroth(n), factor(n);
    for (int i = 0; i < n; ++i) {
      double z = clamp ? std::clamp(h[i], -0.5, 0.5) : h[i];
      u[i] = detail::upow(z, p);
      double e0 = eta0 ? (*eta0)[i] : 1.0;
      zeroth[i] = e0 * (u[i] * detail::ppow(z, p) - (p - 1.0) * (1.0 - u[i]) * z);
      factor[i] = (eta1 ? (*eta1)[i] : 1.0) * (1.0 - u[i]);
    }

    Field out(h.grid);
    double div_lo = 0.0, div_hi = 0.0;
    for (int i = a.ilo; i <= a.ihi; ++i) {
      double flux = 0.0, gs = 0.0;
      if (i > 0) {
        double cf = 0.5 * (factor[i - 1] + factor[i]);
        flux += a.face_w[i - 1] * cf * (h[i] - h[i - 1]);
        gs -= a.face_w[i - 1] * (u[i] - u[i - 1]) * (h[i] - h[i - 1]);
      }
      if (i + 1 < n) {
        double cf = 0.5 * (factor[i] + factor[i + 1]);
        flux += a.face_w[i] * cf * (h[i] - h[i + 1]);
        gs -= a.face_w[i] * (u[i + 1] - u[i]) * (h[i + 1] - h[i]);
      }
      double e1 = eta1 ? (*eta1)[i] : 1.0;
      double div_part = flux / a.b[i] + e1 * 0.5 * gs / a.b[i];
      out[i] = zeroth[i] + div_part;
      if (i == a.ilo) div_lo = div_part;
      if (i == a.ihi) div_hi = div_part;
    }
    // natural closure at zero-weight nodes: pointwise terms stay nodal, the
    // divergence part is copied from the nearest weighted node
    for (int i = 0; i < a.ilo; ++i) out[i] = zeroth[i] + div_lo;
    for (int i = a.ihi + 1; i < n; ++i) out[i] = zeroth[i] + div_hi;
    return out;
  }
};

}  // namespace fdx
