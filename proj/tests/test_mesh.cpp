#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ncstokes/error.hpp"
#include "ncstokes/mesh.hpp"

using namespace ncstokes;

TEST_CASE("unit cell counts") {
  Mesh mesh = build_cube_mesh(1);
  CHECK(mesh.n_vertices() == 8);
  CHECK(mesh.n_tets() == 6);
  CHECK(mesh.n_faces() == 18);
  int boundary = 0, interior = 0;
  for (const auto& f : mesh.faces) (f.n_tets == 1 ? boundary : interior)++;
  CHECK(boundary == 12);
  CHECK(interior == 6);
}

TEST_CASE("level-2 counts") {
  Mesh mesh = build_cube_mesh(2);
  CHECK(mesh.n_vertices() == 27);
  CHECK(mesh.n_tets() == 48);
  int boundary = 0;
  for (const auto& f : mesh.faces)
    if (f.n_tets == 1) ++boundary;
  CHECK(boundary == 48);
  CHECK(mesh.n_faces() == 12 * 8 + 6 * 4);  // 12 n^3 + 6 n^2
}

TEST_CASE("volumes partition the cube") {
  for (int n : {1, 2, 3}) {
    Mesh mesh = build_cube_mesh(n);
    CHECK(std::abs(mesh.total_volume() - 1.0) <= 1e-12);
  }
}

TEST_CASE("faces are canonical and consistently shared") {
  Mesh mesh = build_cube_mesh(2);
  for (const auto& f : mesh.faces) {
    CHECK(f.vertices[0] < f.vertices[1]);
    CHECK(f.vertices[1] < f.vertices[2]);
    CHECK((f.n_tets == 1 || f.n_tets == 2));
    if (f.n_tets == 2) CHECK(f.tets[0] < f.tets[1]);
  }
  // tets store ascending vertex ids; every local face key appears in faces
  for (int t = 0; t < mesh.n_tets(); ++t) {
    for (int i = 0; i < 3; ++i) CHECK(mesh.tets[t][i] < mesh.tets[t][i + 1]);
    for (int i = 0; i < 4; ++i) {
      int fid = mesh.tet_faces[t][i];
      bool adjacent = mesh.faces[fid].tets[0] == t || mesh.faces[fid].tets[1] == t;
      CHECK(adjacent);
    }
  }
}

TEST_CASE("boundary classification of the experiment mesh") {
  for (int n : {1, 2}) {
    Mesh mesh = build_cube_mesh(n);
    int neumann = 0, dirichlet = 0;
    for (const auto& f : mesh.faces) {
      if (f.tag == BoundaryTag::neumann) ++neumann;
      if (f.tag == BoundaryTag::dirichlet) ++dirichlet;
    }
    CHECK(neumann == 2 * n * n);
    CHECK(dirichlet == 10 * n * n);
  }
}

TEST_CASE("predicate misconfiguration is rejected") {
  auto always = [](const Vec3&) { return true; };
  auto never = [](const Vec3&) { return false; };
  CHECK_THROWS_AS(build_cube_mesh(1, always, always), ConfigError);
  CHECK_THROWS_AS(build_cube_mesh(1, never, never), ConfigError);
  CHECK_THROWS_AS(build_cube_mesh(0, always, never), std::invalid_argument);
}

TEST_CASE("tet geometry identities") {
  Mesh mesh = build_cube_mesh(2);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    TetGeometry g = tet_geometry(mesh, t);
    CHECK(g.volume == doctest::Approx(1.0 / 48).epsilon(1e-12));
    Vec3 sum = g.scaled_normal[0] + g.scaled_normal[1] + g.scaled_normal[2] + g.scaled_normal[3];
    double scale = g.scaled_normal[0].norm();
    CHECK(sum.norm() <= 1e-13 * scale);
    for (int i = 0; i < 4; ++i) {
      CHECK((g.grad_lambda.row(i).transpose() + g.scaled_normal[i] / (6.0 * g.volume)).norm() <=
            1e-12 * g.grad_lambda.row(i).norm());
      CHECK(g.face_area[i] == doctest::Approx(0.5 * g.scaled_normal[i].norm()).epsilon(1e-13));
      // affinity: grad lambda_i . (a_j - a_i) = -1, and zero along opposite edges
      for (int j = 0; j < 4; ++j) {
        if (j == i) continue;
        CHECK(g.grad_lambda.row(i).dot((g.vertex[j] - g.vertex[i]).transpose()) ==
              doctest::Approx(-1.0).epsilon(1e-12));
      }
      for (int j = 0; j < 4; ++j)
        for (int m = 0; m < 4; ++m) {
          if (j == m || j == i || m == i) continue;
          CHECK(std::abs(g.grad_lambda.row(i).dot((g.vertex[j] - g.vertex[m]).transpose())) <=
                1e-12);
        }
    }
  }
}

TEST_CASE("reference tet geometry") {
  Mesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  mesh.tets = {{0, 1, 2, 3}};
  TetGeometry g = tet_geometry(mesh, 0);
  CHECK(g.volume == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(g.grad_lambda.row(0).transpose().isApprox(Vec3(-1, -1, -1), 1e-13));
}

TEST_CASE("degenerate tet raises a geometry error") {
  Mesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.5, 0.5, 0)};
  mesh.tets = {{0, 1, 2, 3}};
  CHECK_THROWS_AS(tet_geometry(mesh, 0), GeometryError);
}

TEST_CASE("macro element around the center of the level-2 mesh") {
  Mesh mesh = build_cube_mesh(2);
  int center = -1;
  for (int v = 0; v < mesh.n_vertices(); ++v)
    if ((mesh.vertices[v] - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12) center = v;
  REQUIRE(center >= 0);
  MacroElement macro = macro_element(mesh, center);
  CHECK(macro.mesh.n_tets() == 24);
  // every face containing the center is interior to the star
  for (const auto& f : macro.mesh.faces) {
    bool contains_center = false;
    for (int v : f.vertices)
      if (v == macro.center_vertex) contains_center = true;
    if (contains_center) {
      CHECK(f.tag == BoundaryTag::interior);
      CHECK(f.n_tets == 2);
    }
    if (f.n_tets == 1) {
      CHECK(f.tag == BoundaryTag::dirichlet);
      CHECK(!contains_center);
    }
  }
  // boundary vertices are rejected
  CHECK_THROWS_AS(macro_element(mesh, 0), std::invalid_argument);
}

TEST_CASE("vtk export") {
  Mesh mesh = build_cube_mesh(1);
  std::string path = "mesh_test_out.vtk";
  write_vtk(mesh, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# vtk DataFile Version 3.0");
  int cells = 0;
  while (std::getline(in, line))
    if (line == "10") ++cells;
  CHECK(cells == 6);
  std::remove(path.c_str());
}

TEST_CASE("traces of a continuous polynomial agree from both sides of a face") {
  // (a.x + b)^3 expressed per tet in barycentric form; the canonical face
  // parametrization must make the two restrictions coincide
  Mesh mesh = build_cube_mesh(2);
  Vec3 a(0.7, -1.3, 0.4);
  const double b = 0.35;
  auto tet_poly = [&](int t) {
    BaryPoly lin(4, 1);
    for (int i = 0; i < 4; ++i) {
      std::array<int, 4> e{0, 0, 0, 0};
      e[i] = 1;
      lin.add_coefficient(std::span<const int>(e.data(), 4),
                          a.dot(mesh.vertices[mesh.tets[t][i]]) + b);
    }
    return lin * lin * lin;
  };
  const auto& rule = tri_rule(8);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (mesh.faces[f].n_tets != 2) continue;
    std::array<BaryPoly, 2> traces;
    for (int side = 0; side < 2; ++side) {
      int t = mesh.faces[f].tets[side];
      int local_face = -1;
      for (int i = 0; i < 4; ++i)
        if (mesh.tet_faces[t][i] == f) local_face = i;
      std::array<int, 3> slots{};
      for (int s = 0; s < 3; ++s) {
        const auto& tv = mesh.tets[t];
        slots[s] = int(std::find(tv.begin(), tv.end(), mesh.faces[f].vertices[s]) - tv.begin());
      }
      traces[side] = tet_poly(t).trace_to_face(local_face, slots);
    }
    for (int q = 0; q < rule.size(); ++q) {
      std::span<const double> mu(rule.points[q].data(), 3);
      CHECK(std::abs(traces[0](mu) - traces[1](mu)) <= 1e-12);
    }
  }
}

TEST_CASE("mesh construction is deterministic") {
  Mesh a = build_cube_mesh(2);
  Mesh b = build_cube_mesh(2);
  CHECK(a.tets == b.tets);
  REQUIRE(a.n_faces() == b.n_faces());
  for (int f = 0; f < a.n_faces(); ++f) {
    CHECK(a.faces[f].vertices == b.faces[f].vertices);
    CHECK(a.faces[f].tets == b.faces[f].tets);
  }
}
