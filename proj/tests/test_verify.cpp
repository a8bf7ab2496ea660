#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <sstream>

#include "ncstokes/verify.hpp"

using namespace ncstokes;

TEST_CASE("census formulas match the built spaces") {
  for (ElementKind kind : all_element_kinds()) {
    for (int n : {1, 2}) {
      CensusRow measured = dof_census(kind, {n})[0];
      CensusRow formula = census_formula(kind, n);
      CHECK(measured.velocity == formula.velocity);
      CHECK(measured.pressure == formula.pressure);
    }
  }
  // frozen values on the unit cell
  CensusRow nc2 = census_formula(ElementKind::NC2, 1);
  CHECK(nc2.velocity == 216);
  CHECK(nc2.pressure == 60);
  CensusRow nc2r = census_formula(ElementKind::NC2R, 1);
  CHECK(nc2r.velocity == 90);
  CHECK(nc2r.pressure == 24);
}

TEST_CASE("reduced pairs are strictly smaller at every level") {
  for (int n : {1, 2, 3, 4}) {
    auto total = [&](ElementKind k) {
      CensusRow c = census_formula(k, n);
      return c.velocity + c.pressure;
    };
    CHECK(total(ElementKind::NC2R) < total(ElementKind::NC2));
    CHECK(total(ElementKind::NC3R) < total(ElementKind::NC3));
  }
}

TEST_CASE("inf-sup constants: stable pair versus unstable control") {
  double bmin = 1e300, bmax = 0.0;
  for (int n : {1, 2, 3}) {
    Mesh mesh = build_cube_mesh(n);
    InfSupResult r = infsup_constant(mesh, ElementKind::NC2, 2);
    CHECK(r.beta > 0.01);
    CHECK(r.eig_residual <= 1e-8);
    bmin = std::min(bmin, r.beta);
    bmax = std::max(bmax, r.beta);
  }
  CHECK(bmin / bmax >= 0.5);  // no degradation trend
  Mesh mesh = build_cube_mesh(1);
  InfSupResult control = infsup_constant(mesh, ElementKind::NC2, 3);
  CHECK(control.beta < 1e-8);
  InfSupResult reduced = infsup_constant(mesh, ElementKind::NC2R, 1);
  CHECK(reduced.beta > 0.01);
}

TEST_CASE("macro-element nullspace") {
  Mesh mesh = build_cube_mesh(2);
  int vertex = center_vertex(mesh);
  CHECK((mesh.vertices[vertex] - Vec3(0.5, 0.5, 0.5)).norm() <= 1e-12);
  CHECK(macro_nullspace_dim(mesh, ElementKind::NC3R, 2, vertex, true) == 0);
  CHECK(macro_nullspace_dim(mesh, ElementKind::NC2, 2, vertex, true) == 0);
  CHECK(macro_nullspace_dim(mesh, ElementKind::NC3, 3, vertex, true) == 0);
  // without the mean-zero restriction exactly the constants remain
  CHECK(macro_nullspace_dim(mesh, ElementKind::NC3R, 2, vertex, false) == 1);
}

TEST_CASE("mid-edge diagnostic on the control null space") {
  // without the mean-zero restriction the null space is the constants, whose
  // opposite-edge midpoint values match exactly
  Mesh mesh = build_cube_mesh(2);
  int vertex = center_vertex(mesh);
  double mismatch = macro_midedge_mismatch(mesh, ElementKind::NC3R, 2, vertex, false);
  CHECK(mismatch <= 1e-8);
  // empty null space reports zero
  CHECK(macro_midedge_mismatch(mesh, ElementKind::NC3R, 2, vertex, true) == 0.0);
}

TEST_CASE("discrete Korn constant") {
  Mesh mesh = build_cube_mesh(1);
  double l = korn_coercivity(mesh, ElementKind::NC2);
  CHECK(l > 1e-3);
  CHECK(l <= 1.0 + 1e-9);
  // without a Dirichlet part the rotations sit in the kernel
  Mesh free_mesh = build_cube_mesh(
      1, [](const Vec3&) { return false; }, [](const Vec3&) { return true; });
  CHECK(korn_coercivity(free_mesh, ElementKind::NC2) < 1e-6);
}

TEST_CASE("convergence study runs and errors decrease") {
  SolverOptions opt;
  ConvergenceReport rep = convergence_study(ElementKind::NC2R, {1, 2}, 1.0, opt, 1);
  REQUIRE(rep.levels.size() == 2);
  CHECK(rep.levels[0].h == doctest::Approx(1.0));
  CHECK(rep.levels[1].h == doctest::Approx(0.5));
  CHECK(rep.levels[1].errors.h1_velocity < rep.levels[0].errors.h1_velocity);
  REQUIRE(rep.rates.size() == 1);
  CHECK(rep.rates[0][0] > 0.5);
}

TEST_CASE("divfree check distinguishes full and reduced pairs") {
  StokesSolution exact = experiment_solution(1.0);
  Mesh mesh = build_cube_mesh(1);
  {
    SpacePair pair = build_spaces(mesh, ElementKind::NC2);
    SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
    SolveReport sol = solve(sys);
    DivFreeResult r = divfree_check(mesh, ElementKind::NC2, pair, sys, sol);
    CHECK(r.elementwise);
    CHECK(r.value <= 1e-9);
  }
  {
    SpacePair pair = build_spaces(mesh, ElementKind::NC2R);
    SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
    SolveReport sol = solve(sys);
    DivFreeResult r = divfree_check(mesh, ElementKind::NC2R, pair, sys, sol);
    CHECK(!r.elementwise);
    CHECK(r.value <= 1e-10);
    CHECK(r.pointwise > 1e-8);  // reduced pairs are not pointwise divergence-free
  }
}

TEST_CASE("csv output is deterministic") {
  std::vector<CheckRow> rows = {{"a", "nc2", 1, "m", "1", 0.5, true},
                                {"b", "nc3", 2, "x", "<2", 1.23456789012345, false}};
  std::string csv1 = to_csv(rows);
  std::string csv2 = to_csv(rows);
  CHECK(csv1 == csv2);
  CHECK(csv1.substr(0, csv_header().size()) == csv_header());
}

TEST_CASE("run_checks writes a report and respects check selection") {
  RunConfig config;
  config.pairs = {ElementKind::NC2R};
  config.levels = {1};
  config.checks = {"certify", "census"};
  config.out_dir = "verify_test_out";
  std::ostringstream log1, log2;
  int failures1 = run_checks(config, log1);
  std::ifstream in1(config.out_dir + "/report.csv");
  std::stringstream csv1;
  csv1 << in1.rdbuf();
  int failures2 = run_checks(config, log2);
  std::ifstream in2(config.out_dir + "/report.csv");
  std::stringstream csv2;
  csv2 << in2.rdbuf();
  CHECK(failures1 == 0);
  CHECK(failures2 == 0);
  CHECK(csv1.str() == csv2.str());
  CHECK(csv1.str().find("certify") != std::string::npos);
  CHECK(csv1.str().find("census") != std::string::npos);
  CHECK(csv1.str().find("infsup") == std::string::npos);
  std::filesystem::remove_all(config.out_dir);
}

TEST_CASE("matrix dumps are written when requested") {
  RunConfig config;
  config.pairs = {ElementKind::NC2R};
  config.checks = {"divfree"};
  config.out_dir = "verify_dump_out";
  config.dump_matrices = "verify_dump_out/mm";
  std::ostringstream log;
  run_checks(config, log);
  CHECK(std::filesystem::exists("verify_dump_out/mm/A_nc2r_n2.mtx"));
  CHECK(std::filesystem::exists("verify_dump_out/mm/B_nc2r_n2.mtx"));
  std::filesystem::remove_all(config.out_dir);
}

#ifdef NCSTOKES_CLI_PATH
TEST_CASE("cli exit codes") {
  std::string cli = NCSTOKES_CLI_PATH;
  int ok = std::system((cli + " certify --out cli_test_out > cli_test_out.log 2>&1").c_str());
  CHECK(WEXITSTATUS(ok) == 0);
  CHECK(std::filesystem::exists("cli_test_out/report.csv"));
  int bad = std::system((cli + " --pair bogus --out cli_test_out >> cli_test_out.log 2>&1").c_str());
  CHECK(WEXITSTATUS(bad) == 2);
  int badcheck =
      std::system((cli + " --checks nonsense --out cli_test_out >> cli_test_out.log 2>&1").c_str());
  CHECK(WEXITSTATUS(badcheck) == 2);
  std::filesystem::remove_all("cli_test_out");
  std::filesystem::remove("cli_test_out.log");
}
#endif

TEST_CASE("manufactured experiment data has the advertised structure") {
  StokesSolution s = experiment_solution(1.0);
  auto u = s.velocity();
  auto g = s.data().traction;
  // velocity vanishes on the whole boundary, traction on the top face
  for (double a : {0.0, 0.3, 0.7, 1.0}) {
    CHECK(u(Vec3(a, 0.3, 0.0)).norm() <= 1e-14);
    CHECK(u(Vec3(a, 1.0, 0.5)).norm() <= 1e-14);
    CHECK(u(Vec3(0.0, a, 0.6)).norm() <= 1e-14);
    CHECK(g(Vec3(a, 0.4, 1.0), Vec3(0, 0, 1)).norm() <= 1e-13);
  }
  // pressure matches the closed form
  auto p = s.pressure();
  CHECK(p(Vec3(0.25, 0.75, 0.5)) ==
        doctest::Approx((0.25 - 0.5) * (0.75 - 0.5) * 0.5).epsilon(1e-14));
}
