#pragma once

// JSON summaries and file artifacts.  CSV writers live next to their types;
// everything scalar goes through nlohmann/json with ordered keys so identical
// runs serialize to identical bytes.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fdx/semiflow.hpp"
#include "fdx/spectral.hpp"
#include "fdx/stationary.hpp"

namespace fdx {

using json = nlohmann::ordered_json;

inline json state_summary_json(const StationaryState& st) {
  auto c = boundary_comparability(st);
  return json{{"schema_version", 1},
              {"p", st.p},
              {"s_star", st.s},
              {"Vmax", max_value(st)},
              {"residual", st.residual},
              {"c_low", c.c_low},
              {"c_high", c.c_high}};
}

inline json gap_json(const GapParameters& g) {
  return json{{"schema_version", 1},
              {"K", g.K},
              {"lambda_plus", g.lambda_plus},
              {"lambda_minus", g.lambda_minus},
              {"Lambda_plus", g.Lambda_plus},
              {"Lambda_max", g.Lambda_max},
              {"Lambda_c", g.Lambda_c},
              {"Lambda_minus", g.Lambda_minus},
              {"Lambda_s", g.Lambda_s},
              {"eps_gap", g.eps_gap},
              {"K_contr", g.K_contr},
              {"ladder_ok", g.ladder_ok()}};
}

inline json rate_fit_json(const RateFit& f) {
  return json{{"rate", f.rate}, {"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << text;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace fdx
