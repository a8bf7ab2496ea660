#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ncstokes/assembly.hpp"

namespace ncstokes {

enum class SolverMode { direct, iterative };

/// How the pressure level is fixed.
///  - none:       solve the plain saddle-point system.  Well posed whenever
///                a Neumann part is present; keeps the discrete velocity
///                exactly (element-wise) divergence-free.
///  - multiplier: border the system with the pressure mean row.  Required
///                for pure-Dirichlet boundaries, where the pressure is only
///                determined up to a constant.
///  - automatic:  multiplier iff the mesh has no Neumann faces.
enum class PressureGauge { automatic, none, multiplier };

struct SolverOptions {
  SolverMode mode = SolverMode::direct;
  PressureGauge gauge = PressureGauge::automatic;
  double tolerance = 1e-10;
  int max_iterations = 10000;
  int stagnation_window = 50;
};

struct SolveReport {
  Eigen::VectorXd velocity;  // free DoFs, component-major
  Eigen::VectorXd pressure;
  double multiplier = 0.0;
  double rel_residual = 0.0;
  int iterations = 0;  // 0 for the direct path
  double wall_seconds = 0.0;
  double pressure_mean = 0.0;
  PressureGauge gauge_used = PressureGauge::none;
};

SolveReport solve(const SaddleSystem& system, const SolverOptions& options = {});

/// Alternative gauge mechanism for cross-checks: pin one pressure DoF, solve,
/// then shift the pressure to zero mean.  Pure-Dirichlet systems only;
/// `pressure_one` is the coefficient vector of the constant 1 (see
/// pressure_constant()).
SolveReport solve_with_pinned_pressure(const SaddleSystem& system,
                                       const Eigen::VectorXd& pressure_one);

}  // namespace ncstokes
