#include <doctest.h>

#include <sstream>

#include "fdx/config.hpp"
#include "fdx/io.hpp"
#include "fdx/lab.hpp"
#include "fdx/verify.hpp"

using namespace fdx;

TEST_CASE("config round trip is stable") {
  RunConfig c;
  c.n = 201;
  c.p = 2.5;
  c.seed = 12345;
  c.kind = "radial-ball";
  c.N = 3;
  c.epsilon = 0.03;
  std::ostringstream os;
  write_config(c, os);
  std::istringstream in(os.str());
  RunConfig back = parse_config(in);
  std::ostringstream os2;
  write_config(back, os2);
  CHECK(os.str() == os2.str());
}

TEST_CASE("config validation names the violated precondition") {
  RunConfig c;
  c.n = 4;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("n too small"), std::invalid_argument);

  RunConfig c2;
  c2.epsilon = 0.2;  // above eps0
  CHECK_THROWS_WITH_AS(c2.validate(), doctest::Contains("epsilon"), std::invalid_argument);

  std::istringstream bad("n = 401\nwhat = 1\n");
  CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("unknown key"), std::invalid_argument);

  std::istringstream dup("n = 401\nn = 201\n");
  CHECK_THROWS_WITH_AS(parse_config(dup), doctest::Contains("duplicate"), std::invalid_argument);

  std::istringstream garbled("n == oops\n");
  CHECK_THROWS_AS(parse_config(garbled), std::invalid_argument);
}

TEST_CASE("config accepts comments and section headers") {
  std::istringstream in(
      "# run configuration\n"
      "[domain]\n"
      "kind = interval\n"
      "n = 101   # nodes\n"
      "\n"
      "[flow]\n"
      "dt = 0.0078125\n");
  RunConfig c = parse_config(in);
  CHECK(c.n == 101);
  CHECK(c.dt == doctest::Approx(1.0 / 128));
}

TEST_CASE("summary JSON emitters carry the schema version") {
  RunConfig cfg;
  cfg.n = 101;
  cfg.k_max = 8;
  Lab lab = make_lab(cfg);
  json st = state_summary_json(*lab.state);
  CHECK(st["schema_version"] == 1);
  CHECK(st.contains("s_star"));
  CHECK(st.contains("c_low"));
  json gj = gap_json(lab.gap);
  CHECK(gj["ladder_ok"] == true);
}

TEST_CASE("determinism: identical config and seed give identical summaries") {
  RunConfig cfg;
  cfg.n = 101;
  cfg.k_max = 8;
  auto run = [&]() {
    Lab lab = make_lab(cfg);
    VerifySummary s = verify_all(lab, {1, 2, 4});
    return s.to_json().dump();
  };
  std::string a = run();
  std::string b = run();
  CHECK(a == b);
}
