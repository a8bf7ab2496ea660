#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ncstokes/error.hpp"
#include "ncstokes/manufactured.hpp"
#include "ncstokes/solver.hpp"

using namespace ncstokes;

TEST_CASE("zero data gives the zero solution") {
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2);
  SaddleSystem sys = assemble(mesh, pair, 1.0, zero_data());
  SolveReport sol = solve(sys);
  CHECK(sol.velocity.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(sol.pressure.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(sol.rel_residual <= 1e-10);
}

TEST_CASE("polynomial patch solutions are recovered exactly") {
  for (ElementKind kind : all_element_kinds()) {
    const int k = element_order(kind);
    StokesSolution exact = patch_solution(k, 1.0);
    Mesh mesh = build_cube_mesh(1);
    SpacePair pair = build_spaces(mesh, kind);
    SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
    SolveReport sol = solve(sys);
    Eigen::VectorXd pi_u = interpolate(pair.velocity, exact.velocity());
    Eigen::VectorXd diff =
        combine(pair.velocity, sol.velocity, sys.dirichlet_values) - pi_u;
    double err_u = h1_broken_seminorm(mesh, pair.velocity, diff);
    INFO(element_name(kind), " patch |u_h - Pi u|_1h = ", err_u);
    CHECK(err_u <= 1e-8);
    ErrorNorms err = solution_errors(mesh, pair,
                                     combine(pair.velocity, sol.velocity, sys.dirichlet_values),
                                     sol.pressure, exact.velocity(), exact.velocity_gradient(),
                                     exact.pressure());
    INFO(element_name(kind), " patch pressure err = ", err.l2_pressure);
    CHECK(err.l2_pressure <= 1e-8);
  }
}

TEST_CASE("full pairs are element-wise divergence-free on patch data") {
  StokesSolution exact = patch_solution(2, 1.0);
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2);
  SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
  SolveReport sol = solve(sys);
  Eigen::VectorXd all = combine(pair.velocity, sol.velocity, sys.dirichlet_values);
  CHECK(max_elementwise_divergence(mesh, pair.velocity, all) <= 1e-9);
}

TEST_CASE("multiplier and pinned gauges agree on pure-Dirichlet problems") {
  StokesSolution exact = patch_solution(2, 1.0);
  Mesh mesh = build_cube_mesh_dirichlet(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2);
  SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
  SolverOptions opt;
  opt.gauge = PressureGauge::multiplier;
  SolveReport a = solve(sys, opt);
  CHECK(std::abs(a.pressure_mean) <= 1e-10);
  SolveReport b = solve_with_pinned_pressure(sys, pressure_constant(pair.pressure));
  Eigen::VectorXd du = a.velocity - b.velocity;
  Eigen::VectorXd zero_c = Eigen::VectorXd::Zero(pair.velocity.n_constrained());
  CHECK(h1_broken_seminorm(mesh, pair.velocity, combine(pair.velocity, du, zero_c)) <= 1e-8);
  CHECK((a.pressure - b.pressure).cwiseAbs().maxCoeff() <= 1e-8);
  // and both recover the patch solution
  Eigen::VectorXd diff =
      combine(pair.velocity, a.velocity, sys.dirichlet_values) -
      interpolate(pair.velocity, exact.velocity());
  CHECK(h1_broken_seminorm(mesh, pair.velocity, diff) <= 1e-8);
}

TEST_CASE("gauge selection is automatic") {
  StokesSolution exact = patch_solution(2, 1.0);
  Mesh neumann_mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(neumann_mesh, ElementKind::NC2R);
  SaddleSystem sys = assemble(neumann_mesh, pair, 1.0, exact.data());
  CHECK(solve(sys).gauge_used == PressureGauge::none);
  Mesh dirichlet_mesh = build_cube_mesh_dirichlet(1);
  SpacePair pair2 = build_spaces(dirichlet_mesh, ElementKind::NC2R);
  SaddleSystem sys2 = assemble(dirichlet_mesh, pair2, 1.0, exact.data());
  CHECK(solve(sys2).gauge_used == PressureGauge::multiplier);
}

TEST_CASE("singular systems raise a solver error") {
  StokesSolution exact = patch_solution(2, 1.0);
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2R);
  SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
  sys.B = 0.0 * sys.B;  // decouple the pressure entirely
  sys.g.setZero();
  SolverOptions opt;
  opt.gauge = PressureGauge::none;
  CHECK_THROWS_AS(solve(sys, opt), SolverError);
}

TEST_CASE("iteration cap raises a solver error") {
  StokesSolution exact = patch_solution(2, 1.0);
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2R);
  SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
  SolverOptions opt;
  opt.mode = SolverMode::iterative;
  opt.max_iterations = 3;
  CHECK_THROWS_AS(solve(sys, opt), SolverError);
}

TEST_CASE("weak incompressibility of the reduced pairs") {
  StokesSolution exact = experiment_solution(1.0);
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2R);
  SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
  SolveReport sol = solve(sys);
  CHECK((sys.B * sol.velocity - sys.g).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("iterative path matches the direct solver") {
  StokesSolution exact = patch_solution(2, 1.0);
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2R);
  SaddleSystem sys = assemble(mesh, pair, 1.0, exact.data());
  SolveReport direct = solve(sys);
  SolverOptions opt;
  opt.mode = SolverMode::iterative;
  opt.tolerance = 1e-9;
  SolveReport iter = solve(sys, opt);
  CHECK(iter.iterations > 0);
  CHECK(iter.iterations <= opt.max_iterations);
  CHECK((direct.velocity - iter.velocity).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((direct.pressure - iter.pressure).cwiseAbs().maxCoeff() <= 1e-6);
}
