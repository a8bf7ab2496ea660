#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include <Eigen/SparseCholesky>

#include "ncstokes/assembly.hpp"
#include "ncstokes/manufactured.hpp"

using namespace ncstokes;

TEST_CASE("A is exactly symmetric and f vanishes for zero data") {
  for (ElementKind kind : {ElementKind::NC2, ElementKind::NC3R}) {
    Mesh mesh = build_cube_mesh(1);
    SpacePair pair = build_spaces(mesh, kind);
    SaddleSystem sys = assemble(mesh, pair, 1.0, zero_data());
    SparseMat diff = SparseMat(sys.A.transpose()) - sys.A;
    double asym = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (SparseMat::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
    CHECK(asym == 0.0);
    CHECK(sys.f.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sys.g.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("constant-pressure rows implement the divergence theorem per element") {
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2);
  SaddleSystem sys = assemble(mesh, pair, 1.0, zero_data());
  std::mt19937 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(sys.n_u, [&](Eigen::Index) { return N(rng); });
  Eigen::VectorXd all = combine(pair.velocity, v, Eigen::VectorXd::Zero(pair.velocity.n_constrained()));
  Eigen::VectorXd Bv = sys.B * v;
  Eigen::VectorXd one = pressure_constant(pair.pressure);
  const auto& frule = tri_rule(12);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    double row = 0.0;
    for (int m = 0; m < pair.pressure.block; ++m)
      row += one[t * pair.pressure.block + m] * Bv[t * pair.pressure.block + m];
    // -sum_F int_F v.n via quadrature from this tet's side
    double flux = 0.0;
    TetGeometry geom = tet_geometry(mesh, t);
    for (int lf = 0; lf < 4; ++lf) {
      auto slots = Mesh::local_face_vertices(lf);
      Vec3 n = geom.scaled_normal[lf] / (2.0 * geom.face_area[lf]);
      for (int q = 0; q < frule.size(); ++q) {
        std::array<double, 4> bary{0, 0, 0, 0};
        for (int s = 0; s < 3; ++s) bary[slots[s]] = frule.points[q][s];
        flux += geom.face_area[lf] * frule.weights[q] *
                eval_discrete(pair.velocity, all, t, bary).value.dot(n);
      }
    }
    CHECK(std::abs(row + flux) <= 1e-12 * std::max(1.0, std::abs(flux)));
  }
}

TEST_CASE("rigid motions lie in the kernel of the viscous form") {
  // no Dirichlet part, so rigid motions are unconstrained members
  Mesh mesh = build_cube_mesh(
      1, [](const Vec3&) { return false; }, [](const Vec3&) { return true; });
  for (ElementKind kind : all_element_kinds()) {
    SpacePair pair = build_spaces(mesh, kind);
    SaddleSystem sys = assemble(mesh, pair, 1.0, zero_data());
    double anorm = 0.0;
    for (int k = 0; k < sys.A.outerSize(); ++k)
      for (SparseMat::InnerIterator it(sys.A, k); it; ++it)
        anorm = std::max(anorm, std::abs(it.value()));
    std::vector<VectorFn> rigid = {
        [](const Vec3&) { return Vec3(1, 0, 0); },
        [](const Vec3&) { return Vec3(0, 1, 0); },
        [](const Vec3&) { return Vec3(0, 0, 1); },
        [](const Vec3& x) { return Vec3(0, -x.z(), x.y()); },
        [](const Vec3& x) { return Vec3(x.z(), 0, -x.x()); },
        [](const Vec3& x) { return Vec3(-x.y(), x.x(), 0); },
    };
    for (const auto& r : rigid) {
      Eigen::VectorXd coeffs = extract_free(pair.velocity, interpolate(pair.velocity, r));
      CHECK((sys.A * coeffs).cwiseAbs().maxCoeff() <= 1e-11 * anorm * coeffs.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("divergence of the full velocity spaces lies in the pressure space") {
  Mesh mesh = build_cube_mesh(1);
  std::mt19937 rng(9);
  std::normal_distribution<double> N(0.0, 1.0);
  for (ElementKind kind : {ElementKind::NC2, ElementKind::NC3}) {
    SpacePair pair = build_spaces(mesh, kind);
    Eigen::VectorXd free = Eigen::VectorXd::NullaryExpr(pair.velocity.n_free(),
                                                        [&](Eigen::Index) { return N(rng); });
    Eigen::VectorXd all = combine(pair.velocity, free,
                                  Eigen::VectorXd::Zero(pair.velocity.n_constrained()));
    CHECK(div_in_pressure_space_residual(mesh, pair.velocity, pair.pressure, all) <= 1e-11);
  }
  // control: the reduced pair's divergence leaves its (lower-degree) pressure space
  SpacePair red = build_spaces(mesh, ElementKind::NC2R);
  Eigen::VectorXd free = Eigen::VectorXd::NullaryExpr(red.velocity.n_free(),
                                                      [&](Eigen::Index) { return N(rng); });
  Eigen::VectorXd all = combine(red.velocity, free,
                                Eigen::VectorXd::Zero(red.velocity.n_constrained()));
  CHECK(div_in_pressure_space_residual(mesh, red.velocity, red.pressure, all) > 1e-6);
}

TEST_CASE("norm helpers") {
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2);
  Eigen::VectorXd c = interpolate(pair.velocity, [](const Vec3&) { return Vec3(1, 0, 0); });
  CHECK(h1_broken_seminorm(mesh, pair.velocity, c) <= 1e-12);
  CHECK(l2_norm(mesh, pair.velocity, c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interpolation error decreases at order k in the broken seminorm") {
  StokesSolution exact = experiment_solution(1.0);
  for (ElementKind kind : all_element_kinds()) {
    const int k = element_order(kind);
    double errs[2];
    int idx = 0;
    for (int n : {4, 6}) {
      Mesh mesh = build_cube_mesh(n);
      SpacePair pair = build_spaces(mesh, kind);
      Eigen::VectorXd vals = interpolate(pair.velocity, exact.velocity());
      ErrorNorms e = solution_errors(mesh, pair, vals, Eigen::VectorXd::Zero(pair.pressure.n()),
                                     exact.velocity(), exact.velocity_gradient(),
                                     [](const Vec3&) { return 0.0; });
      errs[idx++] = e.h1_velocity;
    }
    double rate = std::log(errs[0] / errs[1]) / std::log(6.0 / 4.0);
    INFO(std::string(element_name(kind)), " interpolation rate ", rate);
    CHECK(rate >= k - 0.3);  // full elements approach k+1, reduced ones k
  }
}

TEST_CASE("assembly is independent of the worker count") {
  Mesh mesh = build_cube_mesh(2);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2R);
  StokesSolution exact = experiment_solution(1.0);
  SaddleSystem s1 = assemble(mesh, pair, 1.0, exact.data(), 1);
  SaddleSystem s4 = assemble(mesh, pair, 1.0, exact.data(), 4);
  CHECK(s1.f == s4.f);
  CHECK(s1.g == s4.g);
  SparseMat d = s1.A - s4.A;
  double worst = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMat::InnerIterator it(d, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  CHECK(worst == 0.0);
  SparseMat db = s1.B - s4.B;
  for (int k = 0; k < db.outerSize(); ++k)
    for (SparseMat::InnerIterator it(db, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  CHECK(worst == 0.0);
}

TEST_CASE("broken-gradient Gram matrix is positive definite on free DoFs") {
  for (int n : {1, 2}) {
    Mesh mesh = build_cube_mesh(n);
    SpacePair pair = build_spaces(mesh, ElementKind::NC2);
    SparseMat G = assemble_velocity_gram(mesh, pair.velocity);
    Eigen::SimplicialLDLT<SparseMat> ldlt(G);
    REQUIRE(ldlt.info() == Eigen::Success);
    CHECK(ldlt.vectorD().minCoeff() > 0.0);
  }
}

TEST_CASE("neumann data reaches the load vector") {
  // all-Neumann boundary: every DoF is free, so pairing the load with the
  // interpolant of e_z gives the exact boundary integral of g . e_z
  Mesh mesh = build_cube_mesh(
      1, [](const Vec3&) { return false; }, [](const Vec3&) { return true; });
  SpacePair pair = build_spaces(mesh, ElementKind::NC2);
  StokesData data = zero_data();
  data.traction = [](const Vec3&, const Vec3&) { return Vec3(0, 0, 2.0); };
  SaddleSystem sys = assemble(mesh, pair, 1.0, data);
  CHECK(sys.f.cwiseAbs().maxCoeff() > 0.1);
  Eigen::VectorXd ez = extract_free(pair.velocity, interpolate(pair.velocity, [](const Vec3&) {
                                      return Vec3(0, 0, 1);
                                    }));
  CHECK(sys.f.dot(ez) == doctest::Approx(12.0).epsilon(1e-10));  // 2 * |boundary| = 12
}

TEST_CASE("matrix market export") {
  Mesh mesh = build_cube_mesh(1);
  SpacePair pair = build_spaces(mesh, ElementKind::NC2R);
  SaddleSystem sys = assemble(mesh, pair, 1.0, zero_data());
  std::string path = "assembly_test_B.mtx";
  write_matrix_market(sys.B, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "%%MatrixMarket matrix coordinate real general");
  std::getline(in, line);
  long rows = 0, cols = 0, nnz = 0;
  std::sscanf(line.c_str(), "%ld %ld %ld", &rows, &cols, &nnz);
  CHECK(rows == sys.n_p);
  CHECK(cols == sys.n_u);
  long count = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++count;
  CHECK(count == nnz);
  std::remove(path.c_str());
}
