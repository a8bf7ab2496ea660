#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ncstokes/manufactured.hpp"
#include "ncstokes/solver.hpp"

namespace ncstokes {

struct CheckRow {
  std::string check;
  std::string pair;
  int level = 0;
  std::string metric;
  std::string expected;
  double computed = 0.0;
  bool pass = false;
};

std::string csv_header();
std::string to_csv(const std::vector<CheckRow>& rows);

struct InfSupResult {
  int level = 0;
  double beta = 0.0;
  double eig_residual = 0.0;
};

/// Discrete inf-sup constant: square root of the smallest eigenvalue of the
/// pressure Schur complement B G^{-1} B^T against the pressure mass matrix,
/// restricted to mean-zero pressures; G is the broken-gradient Gram matrix.
InfSupResult infsup_constant(const Mesh& mesh, ElementKind kind, int pressure_degree);

/// Nullity of B_M^T on the macro-element around `vertex` with the velocity
/// constrained to vanish weakly on the macro boundary.  `mean_zero` restricts
/// the pressures to zero mean over the macro-element (the control without it
/// must report exactly the constants).
int macro_nullspace_dim(const Mesh& mesh, ElementKind kind, int pressure_degree, int vertex,
                        bool mean_zero = true);

/// Failure-triage diagnostic for the macro check: the largest mismatch of
/// opposite-edge midpoint values, over all numerically null pressure vectors
/// of B_M^T and all tets of the macro-element (quadratic pressures have equal
/// values at opposite edge midpoints when they annihilate the divergence).
/// Returns 0 when the null space is empty.
double macro_midedge_mismatch(const Mesh& mesh, ElementKind kind, int pressure_degree, int vertex,
                              bool mean_zero = true);

/// Smallest generalized eigenvalue of the symmetric-gradient form against
/// the broken-gradient Gram matrix on free DoFs (discrete Korn constant).
double korn_coercivity(const Mesh& mesh, ElementKind kind);

struct DivFreeResult {
  bool elementwise = false;  // true: pointwise per-tet norm; false: weak residual
  double value = 0.0;
  double pointwise = 0.0;  // informational for reduced pairs
};

DivFreeResult divfree_check(const Mesh& mesh, ElementKind kind, const SpacePair& pair,
                            const SaddleSystem& system, const SolveReport& solution);

struct LevelErrors {
  int level = 0;
  double h = 0.0;
  ErrorNorms errors;
};

struct ConvergenceReport {
  ElementKind kind{};
  std::vector<LevelErrors> levels;
  // rates between consecutive levels: [h1, l2 velocity, l2 pressure]
  std::vector<std::array<double, 3>> rates;
};

ConvergenceReport convergence_study(ElementKind kind, const std::vector<int>& levels, double mu,
                                    const SolverOptions& options, int threads);

struct CensusRow {
  int level = 0;
  long velocity = 0;  // free velocity DoFs
  long pressure = 0;
};

std::vector<CensusRow> dof_census(ElementKind kind, const std::vector<int>& levels);
CensusRow census_formula(ElementKind kind, int level);

/// Interior vertex of the level-n experiment mesh closest to the center.
int center_vertex(const Mesh& mesh);

struct RunConfig {
  std::vector<ElementKind> pairs = all_element_kinds();
  std::vector<int> levels;  // empty: per-check defaults
  double mu = 1.0;
  std::vector<std::string> checks = {"certify", "infsup", "macro", "korn",
                                     "divfree", "rates",  "census"};
  std::string out_dir = ".";
  SolverMode solver = SolverMode::direct;
  int threads = 1;
  std::string dump_matrices;  // when nonempty: write A/B of assembled systems here
};

/// Executes the requested checks, writes <out>/report.csv (and per-pair rate
/// tables), logs one line per row, and returns the number of failed rows.
int run_checks(const RunConfig& config, std::ostream& log);

}  // namespace ncstokes
