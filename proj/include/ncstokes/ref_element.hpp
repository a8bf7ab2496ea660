#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncstokes/polyquad.hpp"

namespace ncstokes {

/// The four scalar elements: order-two and order-three nonconforming, full
/// and reduced.  Shape spaces are P3 / P4 / P3^- / P4^- on the tetrahedron.
enum class ElementKind { NC2, NC3, NC2R, NC3R };

int element_order(ElementKind kind);            // k: 2, 3, 2, 3
int canonical_pressure_degree(ElementKind kind);  // k or k-1: 2, 3, 1, 2
const char* element_name(ElementKind kind);
std::optional<ElementKind> parse_element(const std::string& name);
std::vector<ElementKind> all_element_kinds();

struct DofFunctional {
  enum class Tag { face_moment, interior_moment, volume_average };
  Tag tag = Tag::face_moment;
  int local_face = -1;  // face moments only
  BaryPoly weight;      // triangle poly (canonical slot order) or tet poly
};

/// Scalar reference element: shape basis, DoF functionals, dual basis.
/// Every moment is normalized by |F| or |T|, and face weights live in the
/// face's canonical (ascending vertex id) coordinate order, so the tables
/// are identical on every tetrahedron stored in ascending vertex order.
struct ElementDef {
  ElementKind kind;
  int order = 0;                    // k
  std::vector<BaryPoly> shape;
  std::vector<DofFunctional> dofs;
  Eigen::MatrixXd vandermonde;      // V(i,j) = dof_i(shape_j)
  Eigen::MatrixXd dual;             // V^{-1}
  std::vector<BaryPoly> nodal;      // nodal_j = sum_i dual(i,j) shape_i
  int n_face_weights = 0;           // per face: 3 (k=2) or 6 (k=3)
  int n_interior = 0;               // 8 / 11 / 1 / 1
  double vandermonde_condition = 0.0;

  int n_dofs() const { return static_cast<int>(shape.size()); }
};

const ElementDef& element_def(ElementKind kind);

/// Normalized DoF value of a polynomial (exact, factorial-formula integrals).
double apply_dof(const DofFunctional& dof, const BaryPoly& p);

/// Explicit bubble bases of P_{k+1}(T): 8 functions for k=2, 11 for k=3.
/// Construction self-checks face moments and linear independence.
std::vector<BaryPoly> bubble_basis(int k);

/// The one-dimensional bubble of P_k(T) (all face moments of order <= k-1
/// vanish), normalized so that its scaled volume integral is positive.
BaryPoly pk_bubble(int k);

/// Basis of the reduced shape space P_{k+1}^-(T): 13 (k=2) or 25 (k=3).
std::vector<BaryPoly> reduced_shape_basis(int k);

/// Homogeneous barycentric monomials of exact degree `degree` (a basis of
/// P_degree on the simplex with `ncoords` coordinates).
std::vector<BaryPoly> homogeneous_basis(int ncoords, int degree);

/// Face weight monomials spanning P_{k-1}(F) in canonical slot order.
std::vector<BaryPoly> face_weight_basis(int k);

/// Complement spans used in the direct-sum decomposition of P_{k+1}(T).
std::vector<BaryPoly> complement_basis(int k);

/// Nullity of the face-moment constraint matrix (moments of order <= k-1 on
/// all faces) acting on P_degree(T).  Singular values below 1e-9 of the
/// largest count as zero.
int face_constraint_nullity(int degree, int k);

/// dim of the bubble space of P_{k+1}(T): face_constraint_nullity(k+1, k).
int bubble_space_dimension(int k);

/// Nullity of the face-moment constraints on an arbitrary polynomial family.
int family_constraint_nullity(const std::vector<BaryPoly>& family, int k);

/// Rank of { div(phi e_c) : phi in bubble_basis(k), c = 0,1,2 } as a subspace
/// of P_k(T) on a fixed nondegenerate tetrahedron.  If `max_mean_abs` is
/// given, receives the largest |(1/|T|) int_T div(phi e_c)| over the family.
int div_bubble_image_rank(int k, double* max_mean_abs = nullptr);

/// Numerical rank of a polynomial family (evaluation on a principal lattice).
int family_rank(const std::vector<BaryPoly>& family, int lattice_degree);

struct CertifyRow {
  std::string name;
  std::string expected;
  double computed = 0.0;
  bool pass = false;
};

/// All element-level certifications: dimensions, ranks, unisolvence,
/// divergence image, bubble moments.
std::vector<CertifyRow> certify_element_report();

}  // namespace ncstokes
