#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ncstokes/mesh.hpp"
#include "ncstokes/ref_element.hpp"

namespace ncstokes {

using VectorFn = std::function<Vec3(const Vec3&)>;
using MatrixFn = std::function<Eigen::Matrix3d(const Vec3&)>;
using ScalarFn = std::function<double(const Vec3&)>;

/// Global velocity space for one scalar component, replicated three times
/// (component-major).  Matching face-moment DoFs of the two tetrahedra
/// adjacent to an interior face map to the same scalar DoF; that sharing is
/// the weak continuity of the space.  DoFs on Dirichlet faces are
/// eliminated (constrained), interior DoFs are never shared.
struct VelocitySpace {
  const Mesh* mesh = nullptr;
  ElementKind kind{};
  const ElementDef* element = nullptr;

  int n_scalar = 0;             // scalar DoFs per component (free + constrained)
  int n_scalar_free = 0;
  int n_scalar_constrained = 0;
  std::vector<int> free_index;         // scalar id -> free index or -1
  std::vector<int> constrained_index;  // scalar id -> constrained index or -1

  int n_free() const { return 3 * n_scalar_free; }
  int n_constrained() const { return 3 * n_scalar_constrained; }

  /// Scalar DoF id of local DoF `local` (element ordering) on tet `tet`.
  int scalar_dof(int tet, int local) const;

  /// Component-major vector ids over all scalar DoFs.
  int vector_id(int component, int scalar) const { return component * n_scalar + scalar; }
};

struct PressureSpace {
  const Mesh* mesh = nullptr;
  int degree = 0;
  int block = 0;  // dim P_degree(T)
  std::vector<std::array<std::uint8_t, 4>> monomials;  // homogeneous exponents

  int n() const { return mesh->n_tets() * block; }
};

struct SpacePair {
  VelocitySpace velocity;
  PressureSpace pressure;
};

SpacePair build_spaces(const Mesh& mesh, ElementKind kind, int pressure_degree);
SpacePair build_spaces(const Mesh& mesh, ElementKind kind);  // canonical pairing

/// Moment interpolation: face moments (and interior moments / volume
/// averages) of `u`, one value per DoF, as a full component-major vector of
/// size 3 * n_scalar.  Quadrature exactness 12.
Eigen::VectorXd interpolate(const VelocitySpace& space, const VectorFn& u);

/// Moments of the boundary datum on Dirichlet-face DoFs only
/// (component-major over constrained DoFs).
Eigen::VectorXd interpolate_dirichlet(const VelocitySpace& space, const VectorFn& u_dirichlet);

/// Splitting helpers between the full DoF vector and its free/constrained parts.
Eigen::VectorXd extract_free(const VelocitySpace& space, const Eigen::VectorXd& all);
Eigen::VectorXd combine(const VelocitySpace& space, const Eigen::VectorXd& free_part,
                        const Eigen::VectorXd& constrained_part);

struct EvalResult {
  Vec3 value = Vec3::Zero();
  Eigen::Matrix3d gradient = Eigen::Matrix3d::Zero();  // (i,j) = d u_i / d x_j
};

EvalResult eval_discrete(const VelocitySpace& space, const Eigen::VectorXd& all_values, int tet,
                         std::span<const double> bary);

double eval_pressure(const PressureSpace& space, const Eigen::VectorXd& coefficients, int tet,
                     std::span<const double> bary);

/// Largest face moment of the inter-element jump against the P_{k-1}(F)
/// weight basis over all interior faces (normalized by |F|); zero up to
/// roundoff for any member of the space.
double max_jump_moment(const VelocitySpace& space, const Eigen::VectorXd& all_values);

}  // namespace ncstokes
