#pragma once

// One-stop setup of the pipeline objects a run needs: grid, stationary state,
// operator assembly, spectral decomposition, gap parameters and steppers,
// built from a RunConfig.  Also a few field samplers used by tests and the
// verification suite.

#include <memory>
#include <vector>

#include "fdx/config.hpp"
#include "fdx/grid.hpp"
#include "fdx/manifolds.hpp"
#include "fdx/nonlinearity.hpp"
#include "fdx/semiflow.hpp"
#include "fdx/spectral.hpp"
#include "fdx/stationary.hpp"
#include "fdx/util.hpp"

namespace fdx {

struct Lab {
  RunConfig cfg;
  GridPtr grid;
  std::shared_ptr<const StationaryState> state;
  std::shared_ptr<const OperatorAssembly> assembly;
  std::shared_ptr<const SpectralDecomposition> decomp;
  GapParameters gap;

  Stepper make_stepper(bool truncated, double dt = 0.0, double eps = 0.0) const {
    FlowOptions opt;
    opt.dt = dt > 0.0 ? dt : cfg.dt;
    opt.truncated = truncated;
    opt.trunc.eps = eps > 0.0 ? eps : cfg.epsilon;
    opt.trunc.eps0 = std::max(cfg.eps0, opt.trunc.eps);
    return Stepper(decomp, assembly, opt);
  }

  FixedPointOptions fp_options_J() const {
    return FixedPointOptions{cfg.window_J, cfg.tol_fixedpoint, 200, cfg.threads};
  }
  FixedPointOptions fp_options_I() const {
    return FixedPointOptions{cfg.window_I, cfg.tol_fixedpoint, 200, cfg.threads};
  }
};

inline Lab make_lab(const RunConfig& cfg) {
  cfg.validate();
  Lab lab;
  lab.cfg = cfg;
  lab.grid = build_grid(domain_kind_from(cfg.kind), cfg.N, cfg.n, cfg.grading);
  lab.state = std::make_shared<StationaryState>(solve_stationary(cfg.p, lab.grid, cfg.tol_newton));
  lab.assembly = std::make_shared<OperatorAssembly>(assemble(lab.state, lab.grid));
  lab.decomp = std::make_shared<SpectralDecomposition>(eigen(*lab.assembly, cfg.k_max));
  lab.gap = gap_parameters(*lab.decomp, cfg.K, cfg.target_Kcontr);
  return lab;
}

/// Random field in the resolved eigenspan with 1/k^2-decaying coefficients,
/// scaled to the requested weighted norm.
inline Field random_smooth_field(const SpectralDecomposition& dec, Rng& rng, double norm_p1,
                                 int modes = 0) {
  if (modes <= 0 || modes > dec.kmax) modes = dec.kmax;
  std::vector<double> c(modes);
  double s2 = 0.0;
  for (int k = 0; k < modes; ++k) {
    c[k] = rng.uniform(-1.0, 1.0) / ((k + 1.0) * (k + 1.0));
    s2 += c[k] * c[k];
  }
  double scale = norm_p1 / std::sqrt(std::max(s2, 1e-300));
  for (double& t : c) t *= scale;
  return dec.reconstruct(c);
}

/// Random field in the stable subspace (coefficients on modes K+1..).
inline Field random_stable_field(const SpectralDecomposition& dec, int K, Rng& rng, double norm_p1,
                                 int modes = 0) {
  if (modes <= 0 || modes > dec.kmax - K) modes = dec.kmax - K;
  std::vector<double> c(dec.kmax, 0.0);
  double s2 = 0.0;
  for (int k = K; k < K + modes; ++k) {
    c[k] = rng.uniform(-1.0, 1.0) / ((k - K + 1.0) * (k - K + 1.0));
    s2 += c[k] * c[k];
  }
  double scale = norm_p1 / std::sqrt(std::max(s2, 1e-300));
  for (double& t : c) t *= scale;
  return dec.reconstruct(c);
}

/// Random smooth field built from a low-order sine series (grid-only tests).
inline Field random_sine_field(GridPtr grid, Rng& rng, int modes = 8) {
  Field f(grid);
  for (int j = 1; j <= modes; ++j) {
    double a = rng.uniform(-1.0, 1.0) / (j * j);
    for (int i = 0; i < grid->n(); ++i) f[i] += a * std::sin(j * M_PI * grid->x[i]);
  }
  return f;
}

}  // namespace fdx
