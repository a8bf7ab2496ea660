#include "ncstokes/assembly.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "ncstokes/error.hpp"

namespace ncstokes {

namespace {

// ---------------------------------------------------------------------------
// Reference tables in the nodal basis.  All integrals are normalized by the
// measure, so the tables are geometry-free and shared by every tetrahedron.

struct RefTables {
  // G[p][q](i,j) = (1/|T|) int  d(nodal_i)/d(lambda_p) d(nodal_j)/d(lambda_q)
  std::array<std::array<Eigen::MatrixXd, 4>, 4> G;
  Eigen::MatrixXd M;  // (1/|T|) int nodal_i nodal_j
  // per pressure degree: D[p](i,m) = (1/|T|) int d(nodal_i)/d(lambda_p) psi_m
  std::map<int, std::array<Eigen::MatrixXd, 4>> D;
  std::map<int, Eigen::MatrixXd> pressure_mass;  // (1/|T|) int psi_m psi_m'
  // quadrature tables (tet rule, exactness 12): nodal values and
  // lambda-partials at the quadrature points
  Eigen::MatrixXd N;                     // (q, i)
  std::array<Eigen::MatrixXd, 4> dN;     // per lambda: (q, i)
  // face-trace tables (tri rule, exactness 12): values of nodal_i at the
  // points of local face f
  std::array<Eigen::MatrixXd, 4> face_N;  // (q, i)
};

std::vector<BaryPoly> pressure_monomials(int degree) { return homogeneous_basis(4, degree); }

RefTables build_tables(const ElementDef& def) {
  RefTables t;
  const int n = def.n_dofs();
  std::vector<std::array<BaryPoly, 4>> dnodal(n);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < 4; ++p) dnodal[i][p] = def.nodal[i].lambda_derivative(p);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      t.G[p][q].resize(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          t.G[p][q](i, j) = (dnodal[i][p] * dnodal[j][q]).integral_scaled();
    }
  t.M.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) t.M(i, j) = t.M(j, i) = (def.nodal[i] * def.nodal[j]).integral_scaled();

  const auto& rule = tet_rule(12);
  t.N.resize(rule.size(), n);
  for (int p = 0; p < 4; ++p) t.dN[p].resize(rule.size(), n);
  for (int q = 0; q < rule.size(); ++q) {
    std::span<const double> bary(rule.points[q].data(), 4);
    for (int i = 0; i < n; ++i) {
      t.N(q, i) = def.nodal[i](bary);
      for (int p = 0; p < 4; ++p) t.dN[p](q, i) = dnodal[i][p](bary);
    }
  }
  const auto& frule = tri_rule(12);
  for (int f = 0; f < 4; ++f) {
    t.face_N[f].resize(frule.size(), n);
    auto slots = Mesh::local_face_vertices(f);
    for (int q = 0; q < frule.size(); ++q) {
      std::array<double, 4> bary{0.0, 0.0, 0.0, 0.0};
      for (int s = 0; s < 3; ++s) bary[slots[s]] = frule.points[q][s];
      for (int i = 0; i < n; ++i) t.face_N[f](q, i) = def.nodal[i](bary);
    }
  }
  return t;
}

void ensure_pressure_tables(RefTables& t, const ElementDef& def, int degree) {
  if (t.D.count(degree)) return;
  const auto psi = pressure_monomials(degree);
  const int n = def.n_dofs();
  const int m = static_cast<int>(psi.size());
  std::array<Eigen::MatrixXd, 4> D;
  for (int p = 0; p < 4; ++p) {
    D[p].resize(n, m);
    for (int i = 0; i < n; ++i) {
      BaryPoly d = def.nodal[i].lambda_derivative(p);
      for (int j = 0; j < m; ++j) D[p](i, j) = (d * psi[j]).integral_scaled();
    }
  }
  t.D.emplace(degree, std::move(D));
  Eigen::MatrixXd pm(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) pm(i, j) = pm(j, i) = (psi[i] * psi[j]).integral_scaled();
  t.pressure_mass.emplace(degree, std::move(pm));
}

struct TableCache {
  std::mutex mutex;
  std::map<ElementKind, RefTables> tables;
};

RefTables& tables_for(const ElementDef& def, int pressure_degree = -1) {
  static TableCache cache;
  std::lock_guard<std::mutex> lock(cache.mutex);
  auto it = cache.tables.find(def.kind);
  if (it == cache.tables.end()) it = cache.tables.emplace(def.kind, build_tables(def)).first;
  if (pressure_degree >= 0) ensure_pressure_tables(it->second, def, pressure_degree);
  return it->second;
}

Vec3 tet_point(const Mesh& mesh, int tet, std::span<const double> bary) {
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < 4; ++i) x += bary[i] * mesh.vertices[mesh.tets[tet][i]];
  return x;
}

// deterministic parallel element loop: fixed-size chunks processed by any
// number of workers, results merged in chunk order
template <typename Work, typename Merge>
void chunked_parallel(int n_items, int threads, Work&& work, Merge&& merge) {
  constexpr int kChunk = 64;
  const int n_chunks = (n_items + kChunk - 1) / kChunk;
  threads = std::max(1, std::min(threads, n_chunks));
  if (threads == 1) {
    for (int c = 0; c < n_chunks; ++c)
      merge(c, work(c * kChunk, std::min(n_items, (c + 1) * kChunk)));
    return;
  }
  using Result = decltype(work(0, 0));
  std::vector<Result> results(n_chunks);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1))
        results[c] = work(c * kChunk, std::min(n_items, (c + 1) * kChunk));
    });
  for (auto& th : pool) th.join();
  for (int c = 0; c < n_chunks; ++c) merge(c, std::move(results[c]));
}

struct ChunkResult {
  std::vector<Eigen::Triplet<double>> a_triplets;
  std::vector<Eigen::Triplet<double>> b_triplets;
  std::vector<std::pair<int, double>> f_updates;
  std::vector<std::pair<int, double>> g_updates;
};

}  // namespace

StokesData zero_data() {
  StokesData d;
  d.body_force = [](const Vec3&) { return Vec3::Zero(); };
  d.traction = [](const Vec3&, const Vec3&) { return Vec3::Zero(); };
  d.dirichlet = [](const Vec3&) { return Vec3::Zero(); };
  return d;
}

SaddleSystem assemble(const Mesh& mesh, const SpacePair& pair, double mu, const StokesData& data,
                      int threads) {
  if (mu <= 0.0) throw std::invalid_argument("assemble: viscosity must be positive");
  const VelocitySpace& vs = pair.velocity;
  const PressureSpace& ps = pair.pressure;
  const ElementDef& def = *vs.element;
  RefTables& tab = tables_for(def, ps.degree);
  const int n = def.n_dofs();
  const auto& trule = tet_rule(12);
  const auto& frule = tri_rule(12);

  SaddleSystem sys;
  sys.n_u = vs.n_free();
  sys.n_p = ps.n();
  sys.has_neumann = mesh.has_neumann();
  sys.f = Eigen::VectorXd::Zero(sys.n_u);
  sys.g = Eigen::VectorXd::Zero(sys.n_p);
  sys.dirichlet_values = interpolate_dirichlet(vs, data.dirichlet);
  sys.mean_row = pressure_mean_row(mesh, ps);

  const Eigen::VectorXd& ud = sys.dirichlet_values;

  auto work = [&](int t0, int t1) {
    ChunkResult out;
    Eigen::MatrixXd K[3][3];  // component blocks of the viscous form
    Eigen::MatrixXd lap(n, n), Bt[3];
    Eigen::VectorXd fe(3 * n);
    for (int t = t0; t < t1; ++t) {
      TetGeometry geom = tet_geometry(mesh, t);
      const auto& gl = geom.grad_lambda;
      Eigen::Matrix4d gram;
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) gram(p, q) = gl.row(p).dot(gl.row(q));
      lap.setZero();
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q)
          if (gram(p, q) != 0.0) lap += gram(p, q) * tab.G[p][q];
      for (int c = 0; c < 3; ++c)
        for (int d = c; d < 3; ++d) {
          // int (d_d phi_i)(d_c phi_j)
          Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(n, n);
          for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) {
              double w = gl(p, d) * gl(q, c);
              if (w != 0.0) mixed += w * tab.G[p][q];
            }
          K[c][d] = (mu * geom.volume) * mixed;
          if (c == d) {
            K[c][d] += (mu * geom.volume) * lap;
            K[c][d] = 0.5 * (K[c][d] + K[c][d].transpose()).eval();  // exact symmetry
          } else {
            K[d][c] = K[c][d].transpose();
          }
        }
      const auto& D = tab.D.at(ps.degree);
      for (int c = 0; c < 3; ++c) {
        Bt[c] = Eigen::MatrixXd::Zero(n, ps.block);
        for (int p = 0; p < 4; ++p)
          if (gl(p, c) != 0.0) Bt[c] += (-geom.volume * gl(p, c)) * D[p];
      }
      // load vector
      fe.setZero();
      for (int q = 0; q < trule.size(); ++q) {
        Vec3 fx = data.body_force(tet_point(mesh, t, std::span<const double>(trule.points[q].data(), 4)));
        double w = geom.volume * trule.weights[q];
        for (int c = 0; c < 3; ++c) {
          if (fx[c] == 0.0) continue;
          fe.segment(c * n, n) += (w * fx[c]) * tab.N.row(q).transpose();
        }
      }
      // Neumann faces of this tet
      for (int lf = 0; lf < 4; ++lf) {
        const FaceRecord& face = mesh.faces[mesh.tet_faces[t][lf]];
        if (face.tag != BoundaryTag::neumann) continue;
        for (int q = 0; q < frule.size(); ++q) {
          std::span<const double> muq(frule.points[q].data(), 3);
          Vec3 x = muq[0] * mesh.vertices[face.vertices[0]] +
                   muq[1] * mesh.vertices[face.vertices[1]] +
                   muq[2] * mesh.vertices[face.vertices[2]];
          Vec3 gx = data.traction(x, face.unit_normal);
          double w = face.area * frule.weights[q];
          for (int c = 0; c < 3; ++c) {
            if (gx[c] == 0.0) continue;
            fe.segment(c * n, n) += (w * gx[c]) * tab.face_N[lf].row(q).transpose();
          }
        }
      }
      // scatter
      std::vector<int> sid(n);
      for (int l = 0; l < n; ++l) sid[l] = vs.scalar_dof(t, l);
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < n; ++i) {
          int fi = vs.free_index[sid[i]];
          if (fi >= 0) {
            int gi = c * vs.n_scalar_free + fi;
            if (fe[c * n + i] != 0.0) out.f_updates.emplace_back(gi, fe[c * n + i]);
          }
        }
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < n; ++i) {
          int fi_i = vs.free_index[sid[i]];
          for (int d = 0; d < 3; ++d)
            for (int j = 0; j < n; ++j) {
              double v = K[c][d](i, j);
              if (v == 0.0) continue;
              int fj = vs.free_index[sid[j]];
              if (fi_i >= 0 && fj >= 0) {
                out.a_triplets.emplace_back(c * vs.n_scalar_free + fi_i,
                                            d * vs.n_scalar_free + fj, v);
              } else if (fi_i >= 0 && fj < 0) {
                int cj = vs.constrained_index[sid[j]];
                out.f_updates.emplace_back(c * vs.n_scalar_free + fi_i,
                                           -v * ud[d * vs.n_scalar_constrained + cj]);
              }
            }
        }
      for (int m = 0; m < ps.block; ++m) {
        int row = t * ps.block + m;
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < n; ++i) {
            double v = Bt[c](i, m);
            if (v == 0.0) continue;
            int fi = vs.free_index[sid[i]];
            if (fi >= 0)
              out.b_triplets.emplace_back(row, c * vs.n_scalar_free + fi, v);
            else
              out.g_updates.emplace_back(
                  row, -v * ud[c * vs.n_scalar_constrained + vs.constrained_index[sid[i]]]);
          }
      }
    }
    return out;
  };

  std::vector<Eigen::Triplet<double>> a_triplets, b_triplets;
  chunked_parallel(mesh.n_tets(), threads, work, [&](int, ChunkResult r) {
    a_triplets.insert(a_triplets.end(), r.a_triplets.begin(), r.a_triplets.end());
    b_triplets.insert(b_triplets.end(), r.b_triplets.begin(), r.b_triplets.end());
    for (auto& [i, v] : r.f_updates) sys.f[i] += v;
    for (auto& [i, v] : r.g_updates) sys.g[i] += v;
  });
  sys.A.resize(sys.n_u, sys.n_u);
  sys.A.setFromTriplets(a_triplets.begin(), a_triplets.end());
  sys.B.resize(sys.n_p, sys.n_u);
  sys.B.setFromTriplets(b_triplets.begin(), b_triplets.end());
  return sys;
}

SparseMat assemble_velocity_gram(const Mesh& mesh, const VelocitySpace& space, int threads) {
  const ElementDef& def = *space.element;
  RefTables& tab = tables_for(def);
  const int n = def.n_dofs();
  std::vector<Eigen::Triplet<double>> triplets;
  auto work = [&](int t0, int t1) {
    std::vector<Eigen::Triplet<double>> out;
    Eigen::MatrixXd lap(n, n);
    for (int t = t0; t < t1; ++t) {
      TetGeometry geom = tet_geometry(mesh, t);
      const auto& gl = geom.grad_lambda;
      lap.setZero();
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) {
          double w = gl.row(p).dot(gl.row(q));
          if (w != 0.0) lap += w * tab.G[p][q];
        }
      lap *= geom.volume;
      for (int i = 0; i < n; ++i) {
        int fi = space.free_index[space.scalar_dof(t, i)];
        if (fi < 0) continue;
        for (int j = 0; j < n; ++j) {
          int fj = space.free_index[space.scalar_dof(t, j)];
          if (fj < 0 || lap(i, j) == 0.0) continue;
          for (int c = 0; c < 3; ++c)
            out.emplace_back(c * space.n_scalar_free + fi, c * space.n_scalar_free + fj, lap(i, j));
        }
      }
    }
    return out;
  };
  chunked_parallel(mesh.n_tets(), threads, work, [&](int, std::vector<Eigen::Triplet<double>> r) {
    triplets.insert(triplets.end(), r.begin(), r.end());
  });
  SparseMat G(space.n_free(), space.n_free());
  G.setFromTriplets(triplets.begin(), triplets.end());
  return G;
}

SparseMat assemble_pressure_mass(const Mesh& mesh, const PressureSpace& space) {
  const auto psi = pressure_monomials(space.degree);
  const int m = space.block;
  Eigen::MatrixXd block(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) block(i, j) = block(j, i) = (psi[i] * psi[j]).integral_scaled();
  std::vector<Eigen::Triplet<double>> triplets;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    double vol = tet_geometry(mesh, t).volume;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        triplets.emplace_back(t * m + i, t * m + j, vol * block(i, j));
  }
  SparseMat M(space.n(), space.n());
  M.setFromTriplets(triplets.begin(), triplets.end());
  return M;
}

Eigen::VectorXd pressure_mean_row(const Mesh& mesh, const PressureSpace& space) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(space.n());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    double vol = tet_geometry(mesh, t).volume;
    for (int m = 0; m < space.block; ++m)
      c[t * space.block + m] = vol * monomial_integral_scaled(space.monomials[m], 4);
  }
  return c;
}

Eigen::VectorXd pressure_constant(const PressureSpace& space) {
  // 1 = (sum lambda)^degree: multinomial coefficients
  Eigen::VectorXd one = Eigen::VectorXd::Zero(space.n());
  for (int m = 0; m < space.block; ++m) {
    double coef = 1.0;
    int placed = 0;
    for (int c = 0; c < 4; ++c)
      for (int e = 1; e <= space.monomials[m][c]; ++e) {
        coef *= double(placed + 1) / double(e);
        ++placed;
      }
    for (int t = 0; t < space.mesh->n_tets(); ++t) one[t * space.block + m] = coef;
  }
  return one;
}

namespace {

struct LocalCoeffs {
  Eigen::MatrixXd coef;  // (component, local dof)
};

LocalCoeffs local_coeffs(const VelocitySpace& space, const Eigen::VectorXd& all, int tet) {
  const int n = space.element->n_dofs();
  LocalCoeffs lc;
  lc.coef.resize(3, n);
  for (int l = 0; l < n; ++l) {
    int sid = space.scalar_dof(tet, l);
    for (int c = 0; c < 3; ++c) lc.coef(c, l) = all[space.vector_id(c, sid)];
  }
  return lc;
}

}  // namespace

double h1_broken_seminorm(const Mesh& mesh, const VelocitySpace& space,
                          const Eigen::VectorXd& all_values) {
  RefTables& tab = tables_for(*space.element);
  const auto& rule = tet_rule(12);
  double total = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    TetGeometry geom = tet_geometry(mesh, t);
    LocalCoeffs lc = local_coeffs(space, all_values, t);
    double local = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      Eigen::Matrix3d grad = Eigen::Matrix3d::Zero();
      for (int p = 0; p < 4; ++p) {
        Eigen::Vector3d d = lc.coef * tab.dN[p].row(q).transpose();
        grad += d * geom.grad_lambda.row(p);
      }
      local += rule.weights[q] * grad.squaredNorm();
    }
    total += geom.volume * local;
  }
  return std::sqrt(total);
}

double l2_norm(const Mesh& mesh, const VelocitySpace& space, const Eigen::VectorXd& all_values) {
  RefTables& tab = tables_for(*space.element);
  const auto& rule = tet_rule(12);
  double total = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    TetGeometry geom = tet_geometry(mesh, t);
    LocalCoeffs lc = local_coeffs(space, all_values, t);
    double local = 0.0;
    for (int q = 0; q < rule.size(); ++q)
      local += rule.weights[q] * (lc.coef * tab.N.row(q).transpose()).squaredNorm();
    total += geom.volume * local;
  }
  return std::sqrt(total);
}

ErrorNorms solution_errors(const Mesh& mesh, const SpacePair& pair,
                           const Eigen::VectorXd& velocity_all, const Eigen::VectorXd& pressure,
                           const VectorFn& u_exact, const MatrixFn& grad_u_exact,
                           const ScalarFn& p_exact) {
  const VelocitySpace& vs = pair.velocity;
  RefTables& tab = tables_for(*vs.element);
  const auto& rule = tet_rule(12);
  double h1 = 0.0, l2u = 0.0, l2p = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    TetGeometry geom = tet_geometry(mesh, t);
    LocalCoeffs lc = local_coeffs(vs, velocity_all, t);
    double lh1 = 0.0, ll2 = 0.0, lp = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      std::span<const double> bary(rule.points[q].data(), 4);
      Vec3 x = tet_point(mesh, t, bary);
      Eigen::Vector3d vh = lc.coef * tab.N.row(q).transpose();
      Eigen::Matrix3d gh = Eigen::Matrix3d::Zero();
      for (int p = 0; p < 4; ++p) {
        Eigen::Vector3d d = lc.coef * tab.dN[p].row(q).transpose();
        gh += d * geom.grad_lambda.row(p);
      }
      ll2 += rule.weights[q] * (u_exact(x) - vh).squaredNorm();
      lh1 += rule.weights[q] * (grad_u_exact(x) - gh).squaredNorm();
      double ph = eval_pressure(pair.pressure, pressure, t, bary);
      lp += rule.weights[q] * std::pow(p_exact(x) - ph, 2);
    }
    h1 += geom.volume * lh1;
    l2u += geom.volume * ll2;
    l2p += geom.volume * lp;
  }
  return {std::sqrt(h1), std::sqrt(l2u), std::sqrt(l2p)};
}

double max_elementwise_divergence(const Mesh& mesh, const VelocitySpace& space,
                                  const Eigen::VectorXd& all_values) {
  RefTables& tab = tables_for(*space.element);
  const auto& rule = tet_rule(12);
  double worst = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    TetGeometry geom = tet_geometry(mesh, t);
    LocalCoeffs lc = local_coeffs(space, all_values, t);
    double local = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      double div = 0.0;
      for (int p = 0; p < 4; ++p) {
        Eigen::Vector3d d = lc.coef * tab.dN[p].row(q).transpose();
        div += d.dot(geom.grad_lambda.row(p));
      }
      local += rule.weights[q] * div * div;
    }
    worst = std::max(worst, std::sqrt(geom.volume * local));
  }
  return worst;
}

double div_in_pressure_space_residual(const Mesh& mesh, const VelocitySpace& space,
                                      const PressureSpace& pspace,
                                      const Eigen::VectorXd& all_values) {
  RefTables& tab = tables_for(*space.element);
  const auto psi = pressure_monomials(pspace.degree);
  const int m = static_cast<int>(psi.size());
  const auto& rule = tet_rule(12);
  Eigen::MatrixXd psi_at(rule.size(), m);
  for (int q = 0; q < rule.size(); ++q)
    for (int j = 0; j < m; ++j)
      psi_at(q, j) = psi[j](std::span<const double>(rule.points[q].data(), 4));
  double worst = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    TetGeometry geom = tet_geometry(mesh, t);
    LocalCoeffs lc = local_coeffs(space, all_values, t);
    Eigen::VectorXd div_at(rule.size());
    for (int q = 0; q < rule.size(); ++q) {
      double div = 0.0;
      for (int p = 0; p < 4; ++p)
        div += (lc.coef * tab.dN[p].row(q).transpose()).dot(geom.grad_lambda.row(p));
      div_at[q] = div;
    }
    // least-squares fit of div in span(psi), weighted by the rule
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), rule.size());
    Eigen::MatrixXd Aw = psi_at.array().colwise() * w.array().sqrt();
    Eigen::VectorXd bw = div_at.array() * w.array().sqrt();
    Eigen::VectorXd fit = Aw.colPivHouseholderQr().solve(bw);
    worst = std::max(worst, std::sqrt(geom.volume) * (Aw * fit - bw).norm());
  }
  return worst;
}

void write_matrix_market(const SparseMat& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  out.precision(17);
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

}  // namespace ncstokes
