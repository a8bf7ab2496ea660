#pragma once

#include <array>

#include "ncstokes/assembly.hpp"

namespace ncstokes {

/// Dense polynomial in the Cartesian coordinates x, y, z.  Used to build
/// manufactured Stokes solutions whose body force, traction and boundary
/// data follow by exact differentiation.
class TriPoly {
 public:
  TriPoly() : deg_{0, 0, 0}, coef_(1, 0.0) {}
  static TriPoly constant(double v);
  static TriPoly variable(int axis);

  double operator()(const Vec3& x) const;
  TriPoly derivative(int axis) const;
  double integral_unit_cube() const;
  bool is_zero(double tol = 0.0) const;

  TriPoly& operator+=(const TriPoly& o);
  TriPoly& operator-=(const TriPoly& o);
  TriPoly& operator*=(double s);
  friend TriPoly operator+(TriPoly a, const TriPoly& b) { return a += b; }
  friend TriPoly operator-(TriPoly a, const TriPoly& b) { return a -= b; }
  friend TriPoly operator*(TriPoly a, double s) { return a *= s; }
  friend TriPoly operator*(double s, TriPoly a) { return a *= s; }
  friend TriPoly operator*(const TriPoly& a, const TriPoly& b);

 private:
  std::array<int, 3> deg_;
  std::vector<double> coef_;  // (dx+1)(dy+1)(dz+1), x fastest
  int idx(int i, int j, int k) const { return i + (deg_[0] + 1) * (j + (deg_[1] + 1) * k); }
};

/// Exact Stokes solution together with all derived data:
///   f = -2 mu div eps(u) + grad p,   traction = (2 mu eps(u) - p I) n.
struct StokesSolution {
  double mu = 1.0;
  std::array<TriPoly, 3> u;
  TriPoly p;
  std::array<std::array<TriPoly, 3>, 3> grad;  // grad[i][j] = d u_i / d x_j
  std::array<TriPoly, 3> f;

  VectorFn velocity() const;
  MatrixFn velocity_gradient() const;
  ScalarFn pressure() const;
  StokesData data() const;
};

StokesSolution make_solution(std::array<TriPoly, 3> u, TriPoly p, double mu);

/// The validation problem on (0,1)^3: velocity the curl of a polynomial
/// potential vanishing to high order on the boundary, pressure
/// (x-1/2)(y-1/2)(1-z).  Traction vanishes on the top face {z=1} and the
/// velocity vanishes on the whole boundary.
StokesSolution experiment_solution(double mu);

/// Divergence-free polynomial solution of degree k with pressure of degree
/// k-1; every consistency term of the order-k elements vanishes for it.
StokesSolution patch_solution(int k, double mu);

}  // namespace ncstokes
