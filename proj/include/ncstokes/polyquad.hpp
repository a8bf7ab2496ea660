#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ncstokes {

using Vec3 = Eigen::Vector3d;

/// Enumeration of all multi-indices alpha with |alpha| <= degree over
/// `ncoords` barycentric coordinates (3 on a triangle, 4 on a tetrahedron),
/// ordered by total degree, lexicographically within a degree.
struct MonomialTable {
  int ncoords = 0;
  int degree = 0;
  std::vector<std::array<std::uint8_t, 4>> exponents;

  int size() const { return static_cast<int>(exponents.size()); }
  int index_of(std::span<const int> alpha) const;
};

const MonomialTable& monomial_table(int ncoords, int degree);

/// (1/measure) * integral of lambda^alpha over a simplex of dimension
/// `simplex_dim` via the factorial formula  prod(alpha_i!) d! / (|alpha|+d)!.
double monomial_integral_scaled(std::span<const int> alpha, int simplex_dim);
double monomial_integral_scaled(const std::array<std::uint8_t, 4>& alpha, int ncoords);

/// Polynomial in barycentric monomials on a triangle (3 coords) or
/// tetrahedron (4 coords).  The representation is not unique because
/// sum(lambda) == 1; equality of polynomials is decided by evaluation.
class BaryPoly {
 public:
  BaryPoly() = default;
  BaryPoly(int ncoords, int degree);

  static BaryPoly constant(int ncoords, double value);
  static BaryPoly coordinate(int ncoords, int i);
  static BaryPoly monomial(int ncoords, std::span<const int> alpha, double c = 1.0);

  int ncoords() const { return ncoords_; }
  int degree() const { return degree_; }
  std::span<const double> coefficients() const { return coef_; }
  double coefficient(std::span<const int> alpha) const;
  void set_coefficient(std::span<const int> alpha, double value);
  void add_coefficient(std::span<const int> alpha, double value);

  BaryPoly& operator+=(const BaryPoly& other);
  BaryPoly& operator-=(const BaryPoly& other);
  BaryPoly& operator*=(double s);

  double operator()(std::span<const double> bary) const;

  /// Formal partial derivative with respect to lambda_i.  Spatial gradients
  /// chain these with the barycentric gradients of the tetrahedron; the
  /// result is independent of the (non-unique) representation.
  BaryPoly lambda_derivative(int i) const;

  /// (1/measure) * integral over the simplex (exact, factorial formula).
  double integral_scaled() const;

  /// Restriction of a tetrahedron polynomial to local face `local_face`
  /// (the face opposite local vertex `local_face`):  lambda_{local_face} -> 0,
  /// and face slot s takes the coordinate of local vertex slot_to_local[s].
  /// `slot_to_local` must be a permutation of the three surviving vertices.
  BaryPoly trace_to_face(int local_face, std::span<const int> slot_to_local) const;

  double max_abs_coefficient() const;

  friend BaryPoly operator+(BaryPoly a, const BaryPoly& b) { return a += b; }
  friend BaryPoly operator-(BaryPoly a, const BaryPoly& b) { return a -= b; }
  friend BaryPoly operator*(BaryPoly a, double s) { return a *= s; }
  friend BaryPoly operator*(double s, BaryPoly a) { return a *= s; }
  friend BaryPoly operator*(const BaryPoly& a, const BaryPoly& b);

 private:
  int ncoords_ = 0;
  int degree_ = 0;
  std::vector<double> coef_;
};

/// Spatial gradient of a tetrahedron polynomial at a barycentric point,
/// given the barycentric gradients (rows of `grad_lambda`).
Vec3 poly_grad(const BaryPoly& p, const Eigen::Matrix<double, 4, 3>& grad_lambda,
               std::span<const double> bary);

/// Quadrature rule on the reference simplex.  Weights sum to one, so
/// integral over S ~ measure(S) * sum_i w_i f(bary_i).  Every rule is
/// validated at construction against the factorial-formula oracle.
struct QuadratureRule {
  int simplex_dim = 0;
  int exactness = 0;
  std::vector<std::array<double, 4>> points;  // barycentric, trailing coords zero
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
};

constexpr int kMaxQuadratureExactness = 12;

const QuadratureRule& tet_rule(int exactness);
const QuadratureRule& tri_rule(int exactness);

}  // namespace ncstokes
