#include "ncstokes/solver.hpp"

#include <chrono>
#include <cmath>
#include <deque>

#include <Eigen/SparseLU>

#include "ncstokes/error.hpp"

namespace ncstokes {

namespace {

// KKT matrix [A B^T; B 0], bordered with the mean row when requested.
SparseMat build_kkt(const SaddleSystem& sys, bool with_multiplier) {
  const int n = sys.n_u + sys.n_p + (with_multiplier ? 1 : 0);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(sys.A.nonZeros() + 2 * sys.B.nonZeros() + 2 * sys.n_p);
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (SparseMat::InnerIterator it(sys.A, k); it; ++it)
      triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < sys.B.outerSize(); ++k)
    for (SparseMat::InnerIterator it(sys.B, k); it; ++it) {
      triplets.emplace_back(sys.n_u + static_cast<int>(it.row()), static_cast<int>(it.col()),
                            it.value());
      triplets.emplace_back(static_cast<int>(it.col()), sys.n_u + static_cast<int>(it.row()),
                            it.value());
    }
  if (with_multiplier) {
    for (int m = 0; m < sys.n_p; ++m) {
      double v = sys.mean_row[m];
      if (v == 0.0) continue;
      triplets.emplace_back(n - 1, sys.n_u + m, v);
      triplets.emplace_back(sys.n_u + m, n - 1, v);
    }
  }
  SparseMat K(n, n);
  K.setFromTriplets(triplets.begin(), triplets.end());
  return K;
}

Eigen::VectorXd build_rhs(const SaddleSystem& sys, bool with_multiplier) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.n_u + sys.n_p + (with_multiplier ? 1 : 0));
  rhs.head(sys.n_u) = sys.f;
  rhs.segment(sys.n_u, sys.n_p) = sys.g;
  return rhs;
}

// Paige-Saunders MINRES with an iteration cap and a stagnation window.
Eigen::VectorXd minres(const SparseMat& K, const Eigen::VectorXd& rhs, double tol, int max_it,
                       int window, int* iterations) {
  const int n = static_cast<int>(K.rows());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    *iterations = 0;
    return x;
  }
  Eigen::VectorXd v_prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = rhs;
  double beta = v.norm();
  v /= beta;
  double eta = beta;
  double c_old = 1.0, c = 1.0, s_old = 0.0, s = 0.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n), w_old = Eigen::VectorXd::Zero(n);
  double res = beta;
  std::deque<double> recent;
  int it = 0;
  for (it = 1; it <= max_it; ++it) {
    Eigen::VectorXd p = K * v;
    double alpha = v.dot(p);
    p -= alpha * v + beta * v_prev;
    double beta_new = p.norm();
    // apply previous rotations
    double rho1 = c * alpha - c_old * s * beta;
    double rho2 = s * alpha + c_old * c * beta;
    double rho3 = s_old * beta;
    double r1 = std::hypot(rho1, beta_new);
    if (r1 == 0.0) break;
    double c_new = rho1 / r1;
    double s_new = beta_new / r1;
    Eigen::VectorXd w_new = (v - rho2 * w - rho3 * w_old) / r1;
    x += (c_new * eta) * w_new;
    res = std::abs(s_new) * res;
    eta = -s_new * eta;
    if (res <= tol * rhs_norm) break;
    recent.push_back(res);
    if (static_cast<int>(recent.size()) > window) {
      double old = recent.front();
      recent.pop_front();
      if (res > old * (1.0 - 1e-12))
        throw SolverError("iterative solver stagnated over " + std::to_string(window) +
                          " iterations, residual " + std::to_string(res / rhs_norm));
    }
    w_old = w;
    w = w_new;
    v_prev = v;
    v = p / beta_new;
    beta = beta_new;
    c_old = c;
    c = c_new;
    s_old = s;
    s = s_new;
  }
  if (it > max_it)
    throw SolverError("iterative solver hit the iteration cap with residual " +
                      std::to_string(res / rhs_norm));
  *iterations = it;
  return x;
}

SolveReport finish(const SaddleSystem& sys, const SparseMat& K, const Eigen::VectorXd& rhs,
                   const Eigen::VectorXd& x, bool with_multiplier, double tol) {
  SolveReport rep;
  rep.velocity = x.head(sys.n_u);
  rep.pressure = x.segment(sys.n_u, sys.n_p);
  rep.multiplier = with_multiplier ? x[sys.n_u + sys.n_p] : 0.0;
  double rhs_norm = rhs.norm();
  rep.rel_residual = rhs_norm > 0.0 ? (K * x - rhs).norm() / rhs_norm : (K * x).norm();
  rep.pressure_mean = sys.mean_row.dot(rep.pressure);
  if (!std::isfinite(rep.rel_residual) || rep.rel_residual > tol)
    throw SolverError("solver residual " + std::to_string(rep.rel_residual) +
                      " exceeds tolerance");
  if (with_multiplier && std::abs(rep.pressure_mean) > 1e-10)
    throw SolverError("pressure mean constraint violated: " + std::to_string(rep.pressure_mean));
  return rep;
}

}  // namespace

SolveReport solve(const SaddleSystem& sys, const SolverOptions& options) {
  auto start = std::chrono::steady_clock::now();
  bool with_multiplier;
  switch (options.gauge) {
    case PressureGauge::none:
      with_multiplier = false;
      break;
    case PressureGauge::multiplier:
      with_multiplier = true;
      break;
    case PressureGauge::automatic:
    default:
      with_multiplier = !sys.has_neumann;
      break;
  }
  SparseMat K = build_kkt(sys, with_multiplier);
  Eigen::VectorXd rhs = build_rhs(sys, with_multiplier);
  Eigen::VectorXd x;
  int iterations = 0;
  if (options.mode == SolverMode::direct) {
    Eigen::SparseLU<SparseMat> lu;
    lu.compute(K);
    if (lu.info() != Eigen::Success)
      throw SolverError("sparse LU factorization failed (singular or rank-deficient system)");
    x = lu.solve(rhs);
  } else {
    // target a margin below the acceptance tolerance: the recurrence residual
    // estimate can be slightly optimistic
    x = minres(K, rhs, 0.1 * options.tolerance, options.max_iterations,
               options.stagnation_window, &iterations);
  }
  SolveReport rep = finish(sys, K, rhs, x, with_multiplier, options.tolerance);
  rep.iterations = iterations;
  rep.gauge_used = with_multiplier ? PressureGauge::multiplier : PressureGauge::none;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

SolveReport solve_with_pinned_pressure(const SaddleSystem& sys,
                                       const Eigen::VectorXd& pressure_one) {
  if (sys.has_neumann)
    throw std::invalid_argument("pinned-pressure gauge is for pure-Dirichlet systems");
  auto start = std::chrono::steady_clock::now();
  // drop the last pressure DoF and its continuity row
  const int np = sys.n_p - 1;
  std::vector<Eigen::Triplet<double>> triplets;
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (SparseMat::InnerIterator it(sys.A, k); it; ++it)
      triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < sys.B.outerSize(); ++k)
    for (SparseMat::InnerIterator it(sys.B, k); it; ++it) {
      if (it.row() >= np) continue;
      triplets.emplace_back(sys.n_u + static_cast<int>(it.row()), static_cast<int>(it.col()),
                            it.value());
      triplets.emplace_back(static_cast<int>(it.col()), sys.n_u + static_cast<int>(it.row()),
                            it.value());
    }
  SparseMat K(sys.n_u + np, sys.n_u + np);
  K.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.n_u + np);
  rhs.head(sys.n_u) = sys.f;
  rhs.segment(sys.n_u, np) = sys.g.head(np);
  Eigen::SparseLU<SparseMat> lu;
  lu.compute(K);
  if (lu.info() != Eigen::Success) throw SolverError("pinned-pressure factorization failed");
  Eigen::VectorXd x = lu.solve(rhs);
  SolveReport rep;
  rep.velocity = x.head(sys.n_u);
  rep.pressure = Eigen::VectorXd::Zero(sys.n_p);
  rep.pressure.head(np) = x.segment(sys.n_u, np);
  double shift = -sys.mean_row.dot(rep.pressure) / sys.mean_row.dot(pressure_one);
  rep.pressure += shift * pressure_one;
  rep.pressure_mean = sys.mean_row.dot(rep.pressure);
  rep.gauge_used = PressureGauge::none;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double rhs_norm = rhs.norm();
  rep.rel_residual = rhs_norm > 0.0 ? (K * x - rhs).norm() / rhs_norm : (K * x).norm();
  return rep;
}

}  // namespace ncstokes
