// fdx: command-line laboratory for the extinction asymptotics pipeline.
//
// Subcommands map onto the library modules: `stationary` solves the
// Lane-Emden state, `spectrum` dumps the weighted spectrum and gap
// parameters, `evolve` runs the (un)truncated relative-error flow,
// `manifold` samples the center-manifold graph, `shadow` runs the
// finite-dimensional approximation end to end, and `verify-all` executes the
// acceptance criteria.  All artifacts land in the output directory as CSV
// (curves) and JSON (scalars/verdicts).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fdx/config.hpp"
#include "fdx/io.hpp"
#include "fdx/lab.hpp"
#include "fdx/manifolds.hpp"
#include "fdx/verify.hpp"

namespace fs = std::filesystem;
using namespace fdx;

namespace {

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    cfg = parse_config(in);
  }
  return cfg;
}

void dump_effective_config(const RunConfig& cfg, const fs::path& out) {
  std::ostringstream os;
  write_config(cfg, os);
  write_text_file(out / "run_config.txt", os.str());
}

int cmd_stationary(const RunConfig& cfg) {
  Lab lab = make_lab(cfg);
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  dump_effective_config(cfg, out);
  {
    std::ofstream os(out / "stationary_profile.csv");
    write_state_csv(*lab.state, os);
  }
  {
    std::ofstream os(out / "grid.csv");
    write_grid_csv(*lab.grid, os);
  }
  json summary = state_summary_json(*lab.state);
  write_json_file(out / "stationary_summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_spectrum(const RunConfig& cfg) {
  Lab lab = make_lab(cfg);
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  dump_effective_config(cfg, out);
  {
    std::ofstream os(out / "spectrum.csv");
    write_spectrum_csv(*lab.decomp, os);
  }
  {
    std::ofstream os(out / "eigenfields.csv");
    write_eigenfields_csv(*lab.decomp, os);
  }
  json gj = gap_json(lab.gap);
  if (!lab.gap.ladder_ok()) {
    std::cerr << "Lambda ladder ordering violated\n";
    return 1;
  }
  write_json_file(out / "gap_parameters.json", gj);
  std::cout << gj.dump(2) << "\n";
  return 0;
}

Field make_datum(const Lab& lab, const std::string& name) {
  const auto& d = *lab.decomp;
  if (name == "zero") return Field(lab.grid);
  if (name == "unstable") return Field(lab.grid, lab.cfg.epsilon / 2.0);
  std::vector<double> c(d.kmax, 0.0);
  if (name == "stable") {
    c[1] = 1e-3;
    return d.reconstruct(c);
  }
  if (name == "mix") {
    c[0] = 2e-4;
    c[1] = 1.5e-3;
    c[2] = 0.7e-3;
    return d.reconstruct(c);
  }
  throw std::runtime_error("unknown datum '" + name + "' (zero|unstable|stable|mix)");
}

int cmd_evolve(const RunConfig& cfg, const std::string& datum, bool truncated, double T,
               bool snapshots) {
  Lab lab = make_lab(cfg);
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  dump_effective_config(cfg, out);
  Stepper S = lab.make_stepper(truncated);
  Field h0 = make_datum(lab, datum);
  TrajectoryRecord tr = solve_relative_error(S, h0, T, cfg.snap_dt);
  {
    std::ofstream os(out / "trajectory.csv");
    write_trajectory_csv(tr, os);
  }
  if (snapshots) {
    for (int j = 0; j < tr.size(); ++j) {
      std::ostringstream name;
      name << "snapshot_" << std::setprecision(10) << tr.t[j] << ".csv";
      std::ofstream os(out / name.str());
      os.precision(17);
      os << "x,h\n";
      for (int i = 0; i < lab.grid->n(); ++i) os << lab.grid->x[i] << ',' << tr.h[j][i] << '\n';
    }
  }
  json summary{{"schema_version", 1},
               {"datum", datum},
               {"truncated", truncated},
               {"T", T},
               {"final_norm_p1", tr.norm_p1.back()},
               {"final_norm_inf", tr.norm_inf_v.back()},
               {"truncation_ever_active", false}};
  for (char a : tr.trunc_active)
    if (a) summary["truncation_ever_active"] = true;
  bool positive = true;
  for (double y : tr.norm_p1) positive = positive && y > 0.0;
  if (positive && tr.size() >= 5) {
    RateFit f = fit_decay_rate(tr.t, tr.norm_p1, cfg.fit_trailing_fraction);
    summary["fit"] = rate_fit_json(f);
  }
  write_json_file(out / "evolve_summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_manifold(const RunConfig& cfg) {
  Lab lab = make_lab(cfg);
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  dump_effective_config(cfg, out);
  const auto& d = *lab.decomp;
  GapParameters gap =
      cfg.K == 1 ? lab.gap : gap_parameters(d, cfg.K, cfg.target_Kcontr, d.lambda[cfg.K - 1] + 0.5);
  Stepper S = lab.make_stepper(true, 0.0, std::min(cfg.epsilon, 0.02));
  FixedPointOptions opt{cfg.window_J, cfg.tol_fixedpoint, 200, cfg.threads};
  opt.polish_forward = false;

  // theta values at quadrature probes over a sweep of center coordinates
  std::vector<double> probes = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<int> probe_idx;
  for (double x : probes) {
    int best = 0;
    for (int i = 0; i < lab.grid->n(); ++i)
      if (std::abs(lab.grid->x[i] - x) < std::abs(lab.grid->x[best] - x)) best = i;
    probe_idx.push_back(best);
  }
  std::ofstream os(out / "manifold.csv");
  for (int k = 0; k < gap.K; ++k) os << "c_" << (k + 1) << ',';
  os << "theta_norm";
  for (double x : probes) os << ",theta_at_x" << std::setprecision(2) << x;
  os << '\n';
  os.precision(17);
  const JResult* warm = nullptr;
  JResult jprev;
  for (int s = -10; s <= 10; ++s) {
    std::vector<double> c(gap.K, 0.0);
    c[gap.K - 1] = 0.002 * s;
    JResult j = iterate_J(S, gap, c, opt, warm ? &warm->seq : nullptr);
    Field th = j.seq.at(0);
    for (int k = 0; k < gap.K; ++k) th.axpy(-d.coef_k(j.seq.at(0), k), d.phi[k]);
    for (double ck : c) os << ck << ',';
    os << d.norm_b(th);
    for (int idx : probe_idx) os << ',' << th[idx];
    os << '\n';
    jprev = std::move(j);
    warm = &jprev;
  }
  json summary{{"schema_version", 1}, {"K", gap.K}, {"eps", S.options().trunc.eps},
               {"gap", gap_json(gap)}};
  write_json_file(out / "manifold_summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_shadow(const RunConfig& cfg) {
  Lab lab = make_lab(cfg);
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  dump_effective_config(cfg, out);
  Stepper Su = lab.make_stepper(false);
  Stepper St = lab.make_stepper(true);
  Field h0 = make_datum(lab, "mix");
  TrajectoryRecord tr = solve_relative_error(Su, h0, 8.0, 0.25);
  FixedPointOptions optJ{cfg.window_J, 3e-11, 300, cfg.threads};
  FixedPointOptions optI{cfg.window_I, 3e-11, 300, cfg.threads};
  ShadowResult sr = finite_dim_approx(tr, St, lab.gap, optJ, optI, 1e-10);
  {
    std::ofstream os(out / "shadow_diff.csv");
    os.precision(17);
    os << "t,diff_p1\n";
    for (std::size_t j = 0; j < sr.ts.size(); ++j) os << sr.ts[j] << ',' << sr.diffs[j] << '\n';
  }
  json report{{"schema_version", 1},
              {"t0", sr.t0},
              {"lambda_minus", sr.lambda_minus},
              {"fitted_rate", sr.fit.rate},
              {"prefactor", sr.prefactor},
              {"r2", sr.fit.r2},
              {"window", 8.0},
              {"tol", 1e-10}};
  write_json_file(out / "shadow_report.json", report);
  std::cout << report.dump(2) << "\n";
  double required = sr.lambda_minus - 0.05 * std::abs(sr.lambda_minus);
  return sr.fit.rate >= required && sr.fit.slope < 0.0 ? 0 : 1;
}

std::vector<int> parse_criteria_selection(const std::string& sel) {
  std::vector<int> ids;
  if (sel == "all" || sel.empty()) return ids;
  std::stringstream ss(sel);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) ids.push_back(std::stoi(tok));
  return ids;
}

int cmd_verify_all(const RunConfig& cfg) {
  Lab lab = make_lab(cfg);
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  dump_effective_config(cfg, out);
  VerifySummary s = verify_all(lab, parse_criteria_selection(cfg.experiments), &std::cout);
  write_json_file(out / "verify_summary.json", s.to_json());
  std::cout << (s.all_pass ? "ALL PASS" : "FAILURES PRESENT") << "\n";
  return s.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fdx: stationary states, weighted spectra, truncated semiflows and invariant "
               "manifolds of the fast-diffusion extinction problem"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the random seed")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--out", out_dir, "override the output directory");

  auto* c_stationary = app.add_subcommand("stationary", "solve the stationary Lane-Emden state");
  auto* c_spectrum = app.add_subcommand("spectrum", "spectrum, eigenfields and gap parameters");
  int spectrum_K = 0;
  c_spectrum->add_option("--K", spectrum_K, "cut index for the gap parameters");

  auto* c_evolve = app.add_subcommand("evolve", "run the relative-error flow");
  std::string datum = "stable";
  bool truncated = true, untruncated = false;
  double T = 2.0;
  c_evolve->add_option("--datum", datum, "zero|unstable|stable|mix");
  c_evolve->add_flag("--truncated", truncated, "use the truncated nonlinearity (default)");
  c_evolve->add_flag("--untruncated", untruncated, "use the raw nonlinearity");
  c_evolve->add_option("--T", T, "final time");
  bool snapshots = false;
  c_evolve->add_flag("--snapshots", snapshots, "dump per-time field CSVs");

  auto* c_manifold = app.add_subcommand("manifold", "sample the center-manifold graph");
  auto* c_shadow = app.add_subcommand("shadow", "finite-dimensional shadowing run");
  auto* c_verify = app.add_subcommand("verify-all", "run the acceptance criteria");
  std::string criteria = "all";
  c_verify->add_option("--criteria", criteria, "comma-separated criterion ids (default all)");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (spectrum_K > 0) cfg.K = spectrum_K;
    if (criteria != "all") cfg.experiments = criteria;
    cfg.validate();

    if (*c_stationary) return cmd_stationary(cfg);
    if (*c_spectrum) return cmd_spectrum(cfg);
    if (*c_evolve) return cmd_evolve(cfg, datum, truncated && !untruncated, T, snapshots);
    if (*c_manifold) return cmd_manifold(cfg);
    if (*c_shadow) return cmd_shadow(cfg);
    if (*c_verify) return cmd_verify_all(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
