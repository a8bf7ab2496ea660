#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncstokes/polyquad.hpp"

namespace ncstokes {

enum class BoundaryTag { interior, dirichlet, neumann };

struct FaceRecord {
  std::array<int, 3> vertices{};  // canonical: strictly ascending global ids
  std::array<int, 2> tets{-1, -1};
  int n_tets = 0;
  BoundaryTag tag = BoundaryTag::interior;
  double area = 0.0;
  Vec3 unit_normal = Vec3::Zero();  // outward from the lower-id adjacent tet
};

struct TetGeometry {
  double volume = 0.0;
  std::array<double, 4> face_area{};            // |F_i|, face opposite local vertex i
  std::array<Vec3, 4> scaled_normal{};          // nu_{F_i}, outward, |nu| = 2|F_i|
  Eigen::Matrix<double, 4, 3> grad_lambda;      // rows: grad lambda_i
  std::array<Vec3, 4> vertex{};
};

/// Conforming tetrahedral mesh of the unit cube.  Tetrahedra store their
/// vertices in ascending global order, so the canonical (ascending) order of
/// any face is seen identically from both adjacent tetrahedra; face-moment
/// degrees of freedom need no further orientation data.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<FaceRecord> faces;               // sorted by canonical vertex triple
  std::vector<std::array<int, 4>> tet_faces;   // tet -> face id of local face i
  std::vector<bool> vertex_on_boundary;
  int level = 0;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tets() const { return static_cast<int>(tets.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  bool has_neumann() const;
  double total_volume() const;
  Vec3 tet_centroid(int t) const;

  /// Local vertices of local face i (opposite vertex i), ascending order.
  static std::array<int, 3> local_face_vertices(int i);
};

using BoundaryPredicate = std::function<bool(const Vec3&)>;

/// Kuhn (Freudenthal) 6-tet split of a uniform n x n x n grid of (0,1)^3.
/// Boundary faces are classified by the predicates evaluated at the face
/// centroid; the predicates must partition the boundary.
Mesh build_cube_mesh(int n, const BoundaryPredicate& dirichlet, const BoundaryPredicate& neumann);

/// Dirichlet everywhere except the Neumann top face {z = 1} (the experiment
/// configuration).
Mesh build_cube_mesh(int n);

/// Dirichlet on the whole boundary.
Mesh build_cube_mesh_dirichlet(int n);

TetGeometry tet_geometry(const Mesh& mesh, int tet);

struct MacroElement {
  Mesh mesh;                      // star of the vertex; all boundary faces tagged dirichlet
  std::vector<int> parent_tet;    // macro tet -> parent tet id
  std::vector<int> parent_vertex; // macro vertex -> parent vertex id
  int center_vertex = -1;         // macro-local id of the star vertex
};

/// Star of tetrahedra around a strictly interior vertex.
MacroElement macro_element(const Mesh& mesh, int vertex);

/// Legacy ASCII VTK export (unstructured grid, cell type 10).
void write_vtk(const Mesh& mesh, const std::string& path);

}  // namespace ncstokes
