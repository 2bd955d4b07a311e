#pragma once

// Flat key = value run configuration.  Files are diffable artifacts: '#'
// starts a comment, '[section]' headers are allowed and ignored, keys are
// global.  Unknown keys are rejected so typos fail loudly.

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fdx/grid.hpp"

namespace fdx {

struct RunConfig {
  std::string kind = "interval";
  int N = 1;
  int n = 401;
  double grading = 1.0;
  double p = 2.0;
  int k_max = 40;
  int K = 1;
  double target_Kcontr = 0.9;
  double epsilon = 0.05;
  double eps0 = 0.05;
  double dt = 1.0 / 256;
  int window_J = 8;
  int window_I = 8;
  double tol_fixedpoint = 1e-8;
  double tol_newton = 1e-10;
  double snap_dt = 1.0 / 16;
  double fit_trailing_fraction = 0.5;
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = auto
  std::string out_dir = "out";
  std::string experiments = "all";

  void validate() const {
    domain_kind_from(kind);
    if (n < 5) throw std::invalid_argument("config: n too small (need n >= 5)");
    if (grading < 1.0) throw std::invalid_argument("config: grading must be >= 1");
    if (!(p > 1.0)) throw std::invalid_argument("config: p must exceed 1");
    if (k_max < 2 || k_max > n - 2) throw std::invalid_argument("config: require 2 <= k_max <= n-2");
    if (K < 1 || K >= k_max) throw std::invalid_argument("config: require 1 <= K < k_max");
    if (!(target_Kcontr > 0.0 && target_Kcontr < 1.0))
      throw std::invalid_argument("config: target_Kcontr must lie in (0,1)");
    if (!(epsilon > 0.0 && epsilon <= eps0))
      throw std::invalid_argument("config: require 0 < epsilon <= eps0");
    if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("config: dt must lie in (0, 0.1]");
    if (window_J < 5 || window_I < 5) throw std::invalid_argument("config: windows must be >= 5");
    if (!(tol_fixedpoint > 0.0)) throw std::invalid_argument("config: tol_fixedpoint must be positive");
    if (!(snap_dt >= dt)) throw std::invalid_argument("config: snap_dt must be >= dt");
    if (!(fit_trailing_fraction > 0.0 && fit_trailing_fraction <= 1.0))
      throw std::invalid_argument("config: fit_trailing_fraction must lie in (0,1]");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == '[') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config parse error at line " + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = detail::trim(s.substr(0, eq));
    std::string val = detail::trim(s.substr(eq + 1));
    if (auto h = val.find('#'); h != std::string::npos) val = detail::trim(val.substr(0, h));
    ++seen[key];
    try {
      if (key == "kind") c.kind = val;
      else if (key == "N") c.N = std::stoi(val);
      else if (key == "n") c.n = std::stoi(val);
      else if (key == "grading") c.grading = std::stod(val);
      else if (key == "p") c.p = std::stod(val);
      else if (key == "k_max") c.k_max = std::stoi(val);
      else if (key == "K") c.K = std::stoi(val);
      else if (key == "target_Kcontr") c.target_Kcontr = std::stod(val);
      else if (key == "epsilon") c.epsilon = std::stod(val);
      else if (key == "eps0") c.eps0 = std::stod(val);
      else if (key == "dt") c.dt = std::stod(val);
      else if (key == "window_J") c.window_J = std::stoi(val);
      else if (key == "window_I") c.window_I = std::stoi(val);
      else if (key == "tol_fixedpoint") c.tol_fixedpoint = std::stod(val);
      else if (key == "tol_newton") c.tol_newton = std::stod(val);
      else if (key == "snap_dt") c.snap_dt = std::stod(val);
      else if (key == "fit_trailing_fraction") c.fit_trailing_fraction = std::stod(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else if (key == "threads") c.threads = std::stoi(val);
      else if (key == "out_dir") c.out_dir = val;
      else if (key == "experiments") c.experiments = val;
      else throw std::invalid_argument("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config: malformed value for key '" + key + "' at line " +
                                  std::to_string(lineno));
    }
  }
  for (auto& [k, cnt] : seen)
    if (cnt > 1) throw std::invalid_argument("config: duplicate key '" + k + "'");
  return c;
}

inline void write_config(const RunConfig& c, std::ostream& os) {
  os.precision(17);
  os << "kind = " << c.kind << '\n'
     << "N = " << c.N << '\n'
     << "n = " << c.n << '\n'
     << "grading = " << c.grading << '\n'
     << "p = " << c.p << '\n'
     << "k_max = " << c.k_max << '\n'
     << "K = " << c.K << '\n'
     << "target_Kcontr = " << c.target_Kcontr << '\n'
     << "epsilon = " << c.epsilon << '\n'
     << "eps0 = " << c.eps0 << '\n'
     << "dt = " << c.dt << '\n'
     << "window_J = " << c.window_J << '\n'
     << "window_I = " << c.window_I << '\n'
     << "tol_fixedpoint = " << c.tol_fixedpoint << '\n'
     << "tol_newton = " << c.tol_newton << '\n'
     << "snap_dt = " << c.snap_dt << '\n'
     << "fit_trailing_fraction = " << c.fit_trailing_fraction << '\n'
     << "seed = " << c.seed << '\n'
     << "threads = " << c.threads << '\n'
     << "out_dir = " << c.out_dir << '\n'
     << "experiments = " << c.experiments << '\n';
}

}  // namespace fdx
