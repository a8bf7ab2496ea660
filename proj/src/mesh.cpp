#include "ncstokes/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "ncstokes/error.hpp"

namespace ncstokes {

namespace {
constexpr double kVolumeEps = 1e-14;

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}
}  // namespace

std::array<int, 3> Mesh::local_face_vertices(int i) {
  std::array<int, 3> v{};
  int k = 0;
  for (int j = 0; j < 4; ++j)
    if (j != i) v[k++] = j;
  return v;
}

bool Mesh::has_neumann() const {
  for (const auto& f : faces)
    if (f.tag == BoundaryTag::neumann) return true;
  return false;
}

double Mesh::total_volume() const {
  double v = 0.0;
  for (int t = 0; t < n_tets(); ++t)
    v += std::abs(signed_volume(vertices[tets[t][0]], vertices[tets[t][1]], vertices[tets[t][2]],
                                vertices[tets[t][3]]));
  return v;
}

Vec3 Mesh::tet_centroid(int t) const {
  Vec3 c = Vec3::Zero();
  for (int v : tets[t]) c += vertices[v];
  return c / 4.0;
}

namespace {

void finalize_faces(Mesh& mesh, const BoundaryPredicate& dirichlet, const BoundaryPredicate& neumann) {
  std::map<std::array<int, 3>, std::vector<int>> adjacency;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const auto& tet = mesh.tets[t];
    for (int i = 0; i < 4; ++i) {
      auto lv = Mesh::local_face_vertices(i);
      std::array<int, 3> key{tet[lv[0]], tet[lv[1]], tet[lv[2]]};
      std::sort(key.begin(), key.end());
      adjacency[key].push_back(t);
    }
  }
  mesh.faces.clear();
  mesh.faces.reserve(adjacency.size());
  std::map<std::array<int, 3>, int> face_id;
  for (auto& [key, tets] : adjacency) {
    if (tets.size() > 2) throw GeometryError("face shared by more than two tets");
    FaceRecord f;
    f.vertices = key;
    std::sort(tets.begin(), tets.end());
    f.n_tets = static_cast<int>(tets.size());
    f.tets[0] = tets[0];
    if (tets.size() == 2) f.tets[1] = tets[1];
    const Vec3& a = mesh.vertices[key[0]];
    const Vec3& b = mesh.vertices[key[1]];
    const Vec3& c = mesh.vertices[key[2]];
    Vec3 n = (b - a).cross(c - a);
    f.area = 0.5 * n.norm();
    if (f.area <= 0.0) throw GeometryError("degenerate face");
    n.normalize();
    // orient outward from the lower-id adjacent tet
    const auto& t0 = mesh.tets[f.tets[0]];
    Vec3 opp = Vec3::Zero();
    for (int v : t0)
      if (v != key[0] && v != key[1] && v != key[2]) opp = mesh.vertices[v];
    if (n.dot(opp - a) > 0.0) n = -n;
    f.unit_normal = n;
    if (f.n_tets == 1) {
      Vec3 centroid = (a + b + c) / 3.0;
      bool is_d = dirichlet(centroid);
      bool is_n = neumann(centroid);
      if (is_d && is_n)
        throw ConfigError("boundary predicates overlap at face centroid");
      if (!is_d && !is_n)
        throw ConfigError("boundary predicates leave a boundary face unclassified");
      f.tag = is_d ? BoundaryTag::dirichlet : BoundaryTag::neumann;
    }
    face_id[key] = static_cast<int>(mesh.faces.size());
    mesh.faces.push_back(f);
  }
  mesh.tet_faces.assign(mesh.n_tets(), {});
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const auto& tet = mesh.tets[t];
    for (int i = 0; i < 4; ++i) {
      auto lv = Mesh::local_face_vertices(i);
      std::array<int, 3> key{tet[lv[0]], tet[lv[1]], tet[lv[2]]};
      std::sort(key.begin(), key.end());
      mesh.tet_faces[t][i] = face_id.at(key);
    }
  }
  mesh.vertex_on_boundary.assign(mesh.n_vertices(), false);
  for (const auto& f : mesh.faces)
    if (f.n_tets == 1)
      for (int v : f.vertices) mesh.vertex_on_boundary[v] = true;
}

}  // namespace

Mesh build_cube_mesh(int n, const BoundaryPredicate& dirichlet, const BoundaryPredicate& neumann) {
  if (n < 1) throw std::invalid_argument("build_cube_mesh: n must be >= 1");
  Mesh mesh;
  mesh.level = n;
  const int s = n + 1;
  mesh.vertices.reserve(s * s * s);
  for (int k = 0; k < s; ++k)
    for (int j = 0; j < s; ++j)
      for (int i = 0; i < s; ++i)
        mesh.vertices.emplace_back(double(i) / n, double(j) / n, double(k) / n);
  auto vid = [s](int i, int j, int k) { return i + s * (j + s * k); };

  // Kuhn split: six tets per cell around the main diagonal, one per
  // permutation of the axes; neighbouring cells share conforming faces.
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& perm : perms) {
          std::array<int, 3> corner{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = vid(corner[0], corner[1], corner[2]);
          for (int step = 0; step < 3; ++step) {
            corner[perm[step]] += 1;
            tet[step + 1] = vid(corner[0], corner[1], corner[2]);
          }
          std::sort(tet.begin(), tet.end());
          mesh.tets.push_back(tet);
        }
  finalize_faces(mesh, dirichlet, neumann);
  for (int t = 0; t < mesh.n_tets(); ++t) (void)tet_geometry(mesh, t);  // degeneracy check
  return mesh;
}

Mesh build_cube_mesh(int n) {
  auto on_top = [](const Vec3& x) { return x.z() > 1.0 - 1e-12; };
  return build_cube_mesh(
      n, [on_top](const Vec3& x) { return !on_top(x); }, on_top);
}

Mesh build_cube_mesh_dirichlet(int n) {
  return build_cube_mesh(
      n, [](const Vec3&) { return true; }, [](const Vec3&) { return false; });
}

TetGeometry tet_geometry(const Mesh& mesh, int tet) {
  if (tet < 0 || tet >= mesh.n_tets()) throw std::invalid_argument("tet_geometry: tet id");
  TetGeometry g;
  for (int i = 0; i < 4; ++i) g.vertex[i] = mesh.vertices[mesh.tets[tet][i]];
  double vol = signed_volume(g.vertex[0], g.vertex[1], g.vertex[2], g.vertex[3]);
  g.volume = std::abs(vol);
  if (g.volume <= kVolumeEps) throw GeometryError("degenerate tetrahedron");
  // lambda_i are the affine functions with lambda_i(a_j) = delta_ij; their
  // coefficient vectors are the columns of the inverse vertex matrix.
  Eigen::Matrix4d M;
  for (int i = 0; i < 4; ++i) {
    M(i, 0) = 1.0;
    M.block<1, 3>(i, 1) = g.vertex[i].transpose();
  }
  Eigen::Matrix4d C = M.inverse();
  for (int i = 0; i < 4; ++i) {
    g.grad_lambda.row(i) = C.block<3, 1>(1, i).transpose();
    g.scaled_normal[i] = -6.0 * g.volume * g.grad_lambda.row(i).transpose();
    g.face_area[i] = 0.5 * g.scaled_normal[i].norm();
  }
  return g;
}

MacroElement macro_element(const Mesh& mesh, int vertex) {
  if (vertex < 0 || vertex >= mesh.n_vertices()) throw std::invalid_argument("macro_element: vertex id");
  if (mesh.vertex_on_boundary[vertex]) throw std::invalid_argument("macro_element: vertex on boundary");
  MacroElement macro;
  std::set<int> vset;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const auto& tet = mesh.tets[t];
    if (std::find(tet.begin(), tet.end(), vertex) == tet.end()) continue;
    macro.parent_tet.push_back(t);
    for (int v : tet) vset.insert(v);
  }
  macro.parent_vertex.assign(vset.begin(), vset.end());  // ascending: keeps tets sorted
  std::map<int, int> to_local;
  for (int i = 0; i < static_cast<int>(macro.parent_vertex.size()); ++i)
    to_local[macro.parent_vertex[i]] = i;
  macro.center_vertex = to_local.at(vertex);
  macro.mesh.level = mesh.level;
  for (int v : macro.parent_vertex) macro.mesh.vertices.push_back(mesh.vertices[v]);
  for (int t : macro.parent_tet) {
    std::array<int, 4> tet{};
    for (int i = 0; i < 4; ++i) tet[i] = to_local.at(mesh.tets[t][i]);
    macro.mesh.tets.push_back(tet);
  }
  finalize_faces(
      macro.mesh, [](const Vec3&) { return true; }, [](const Vec3&) { return false; });
  return macro;
}

void write_vtk(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open VTK output file: " + path);
  out << "# vtk DataFile Version 3.0\nncstokes mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  out.precision(17);
  for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
  out << "CELLS " << mesh.n_tets() << " " << 5 * mesh.n_tets() << "\n";
  for (int t = 0; t < mesh.n_tets(); ++t) {
    auto tet = mesh.tets[t];
    // VTK expects positively oriented tetrahedra
    if (signed_volume(mesh.vertices[tet[0]], mesh.vertices[tet[1]], mesh.vertices[tet[2]],
                      mesh.vertices[tet[3]]) < 0.0)
      std::swap(tet[2], tet[3]);
    out << "4 " << tet[0] << " " << tet[1] << " " << tet[2] << " " << tet[3] << "\n";
  }
  out << "CELL_TYPES " << mesh.n_tets() << "\n";
  for (int t = 0; t < mesh.n_tets(); ++t) out << "10\n";
}

}  // namespace ncstokes
