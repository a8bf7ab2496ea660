#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ncstokes/fe_space.hpp"

namespace ncstokes {

using SparseMat = Eigen::SparseMatrix<double>;

/// The discrete saddle-point system with Dirichlet DoFs eliminated:
///   A u + B^T p = f,   B u = g   (g from the Dirichlet lift),
/// plus the pressure mean row c (c q = integral of q over the domain).
struct SaddleSystem {
  SparseMat A;             // n_u x n_u, symmetric
  SparseMat B;             // n_p x n_u
  Eigen::VectorXd f;       // n_u
  Eigen::VectorXd g;       // n_p
  Eigen::VectorXd mean_row;  // n_p
  int n_u = 0;
  int n_p = 0;
  bool has_neumann = false;
  Eigen::VectorXd dirichlet_values;  // constrained DoF values (component-major)
};

struct StokesData {
  VectorFn body_force;                                  // f
  std::function<Vec3(const Vec3&, const Vec3&)> traction;  // g(x, n) on Gamma_N
  VectorFn dirichlet;                                   // u_D
};

StokesData zero_data();

SaddleSystem assemble(const Mesh& mesh, const SpacePair& pair, double mu, const StokesData& data,
                      int threads = 1);

/// Broken gradient Gram matrix sum_T int_T grad v : grad w on free velocity
/// DoFs (three identical scalar blocks, component-major).
SparseMat assemble_velocity_gram(const Mesh& mesh, const VelocitySpace& space, int threads = 1);

SparseMat assemble_pressure_mass(const Mesh& mesh, const PressureSpace& space);
Eigen::VectorXd pressure_mean_row(const Mesh& mesh, const PressureSpace& space);

/// Coefficients (per tet, pressure monomial basis) of the constant 1.
Eigen::VectorXd pressure_constant(const PressureSpace& space);

// --- norms and errors (quadrature exactness 12) ---

double h1_broken_seminorm(const Mesh& mesh, const VelocitySpace& space,
                          const Eigen::VectorXd& all_values);
double l2_norm(const Mesh& mesh, const VelocitySpace& space, const Eigen::VectorXd& all_values);

struct ErrorNorms {
  double h1_velocity = 0.0;
  double l2_velocity = 0.0;
  double l2_pressure = 0.0;
};

ErrorNorms solution_errors(const Mesh& mesh, const SpacePair& pair,
                           const Eigen::VectorXd& velocity_all, const Eigen::VectorXd& pressure,
                           const VectorFn& u_exact, const MatrixFn& grad_u_exact,
                           const ScalarFn& p_exact);

/// || div u_h ||_{0,T} for every tet; returns the maximum.
double max_elementwise_divergence(const Mesh& mesh, const VelocitySpace& space,
                                  const Eigen::VectorXd& all_values);

/// Largest per-tet residual of expanding div u_h in P_degree(T); zero when
/// the divergence of the velocity space lies in the pressure space.
double div_in_pressure_space_residual(const Mesh& mesh, const VelocitySpace& space,
                                      const PressureSpace& pspace,
                                      const Eigen::VectorXd& all_values);

void write_matrix_market(const SparseMat& m, const std::string& path);

}  // namespace ncstokes
