// Acceptance suite: runs every verification criterion at the default desk
// configuration (interval, p = 2, n = 401, k_max = 40) and prints one
// pass/fail line per criterion with the measured values.

#include <doctest.h>

#include <cstdio>

#include "fdx/verify.hpp"

using namespace fdx;

namespace {

const Lab& default_lab() {
  static Lab lab = [] {
    RunConfig cfg;
    return make_lab(cfg);
  }();
  return lab;
}

void run_one(int id) {
  CriterionResult r = run_criterion(id, default_lab());
  std::printf("%s - criterion %2d: %s  [%.2f s]\n", r.pass ? "PASS" : "FAIL", r.id,
              r.name.c_str(), r.seconds);
  std::printf("        measured: %s\n", r.measured.dump().c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(r.pass, "criterion ", id, " measured: ", r.measured.dump());
}

}  // namespace

TEST_CASE("criterion 1: exact structural eigenpair") { run_one(1); }
TEST_CASE("criterion 2: self-adjointness") { run_one(2); }
TEST_CASE("criterion 3: stationary oracle") { run_one(3); }
TEST_CASE("criterion 4: Lambda ladder and eps_gap") { run_one(4); }
TEST_CASE("criterion 5: truncation equivalence") { run_one(5); }
TEST_CASE("criterion 6: remainder contraction") { run_one(6); }
TEST_CASE("criterion 7: solver cross-validation") { run_one(7); }
TEST_CASE("criterion 8: center-manifold fixed point") { run_one(8); }
TEST_CASE("criterion 9: invariance") { run_one(9); }
TEST_CASE("criterion 10: Lipschitz ladder") { run_one(10); }
TEST_CASE("criterion 11: stable-manifold characterization") { run_one(11); }
TEST_CASE("criterion 12: shadowing") { run_one(12); }
TEST_CASE("criterion 13: grid robustness") { run_one(13); }
TEST_CASE("criterion 14: extinction demo") { run_one(14); }
