#include "ncstokes/fe_space.hpp"

#include <algorithm>
#include <cmath>

#include "ncstokes/error.hpp"

namespace ncstokes {

namespace {

// barycentric point of tet `t` corresponding to face point mu on face F
// (canonical slots are the ascending positions of F's vertices inside the
// ascending vertex tuple of t)
std::array<double, 4> face_point_in_tet(const Mesh& mesh, int face, int tet,
                                        std::span<const double> mu) {
  const auto& fv = mesh.faces[face].vertices;
  const auto& tv = mesh.tets[tet];
  std::array<double, 4> bary{0.0, 0.0, 0.0, 0.0};
  for (int s = 0; s < 3; ++s) {
    auto it = std::find(tv.begin(), tv.end(), fv[s]);
    bary[std::distance(tv.begin(), it)] = mu[s];
  }
  return bary;
}

Vec3 face_physical_point(const Mesh& mesh, int face, std::span<const double> mu) {
  const auto& fv = mesh.faces[face].vertices;
  return mu[0] * mesh.vertices[fv[0]] + mu[1] * mesh.vertices[fv[1]] + mu[2] * mesh.vertices[fv[2]];
}

Vec3 tet_physical_point(const Mesh& mesh, int tet, std::span<const double> bary) {
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < 4; ++i) x += bary[i] * mesh.vertices[mesh.tets[tet][i]];
  return x;
}

}  // namespace

int VelocitySpace::scalar_dof(int tet, int local) const {
  const int mf = element->n_face_weights;
  if (local < 4 * mf) {
    int f = local / mf;
    int w = local % mf;
    return mesh->tet_faces[tet][f] * mf + w;
  }
  return mesh->n_faces() * mf + tet * element->n_interior + (local - 4 * mf);
}

SpacePair build_spaces(const Mesh& mesh, ElementKind kind, int pressure_degree) {
  if (pressure_degree < 0 || pressure_degree > 4)
    throw std::invalid_argument("build_spaces: pressure degree out of range");
  SpacePair pair;
  VelocitySpace& v = pair.velocity;
  v.mesh = &mesh;
  v.kind = kind;
  v.element = &element_def(kind);
  const int mf = v.element->n_face_weights;
  v.n_scalar = mesh.n_faces() * mf + mesh.n_tets() * v.element->n_interior;
  v.free_index.assign(v.n_scalar, -1);
  v.constrained_index.assign(v.n_scalar, -1);
  int nf = 0, nc = 0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    bool constrained = mesh.faces[f].tag == BoundaryTag::dirichlet;
    for (int w = 0; w < mf; ++w) {
      int sid = f * mf + w;
      if (constrained)
        v.constrained_index[sid] = nc++;
      else
        v.free_index[sid] = nf++;
    }
  }
  for (int sid = mesh.n_faces() * mf; sid < v.n_scalar; ++sid) v.free_index[sid] = nf++;
  v.n_scalar_free = nf;
  v.n_scalar_constrained = nc;

  PressureSpace& p = pair.pressure;
  p.mesh = &mesh;
  p.degree = pressure_degree;
  const auto& table = monomial_table(4, pressure_degree);
  for (int i = 0; i < table.size(); ++i) {
    int total = table.exponents[i][0] + table.exponents[i][1] + table.exponents[i][2] +
                table.exponents[i][3];
    if (total == pressure_degree) p.monomials.push_back(table.exponents[i]);
  }
  p.block = static_cast<int>(p.monomials.size());
  return pair;
}

SpacePair build_spaces(const Mesh& mesh, ElementKind kind) {
  return build_spaces(mesh, kind, canonical_pressure_degree(kind));
}

Eigen::VectorXd interpolate(const VelocitySpace& space, const VectorFn& u) {
  const Mesh& mesh = *space.mesh;
  const ElementDef& def = *space.element;
  const int mf = def.n_face_weights;
  const auto& frule = tri_rule(12);
  const auto& trule = tet_rule(12);
  const auto weights = face_weight_basis(def.order);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(3 * space.n_scalar);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int q = 0; q < frule.size(); ++q) {
      std::span<const double> mu(frule.points[q].data(), 3);
      Vec3 ux = u(face_physical_point(mesh, f, mu));
      for (int w = 0; w < mf; ++w) {
        double wq = frule.weights[q] * weights[w](mu);
        for (int c = 0; c < 3; ++c)
          values[space.vector_id(c, f * mf + w)] += wq * ux[c];
      }
    }
  }
  if (def.n_interior > 0) {
    for (int t = 0; t < mesh.n_tets(); ++t) {
      for (int q = 0; q < trule.size(); ++q) {
        std::span<const double> bary(trule.points[q].data(), 4);
        Vec3 ux = u(tet_physical_point(mesh, t, bary));
        for (int l = 0; l < def.n_interior; ++l) {
          const DofFunctional& dof = def.dofs[4 * mf + l];
          double wq = trule.weights[q];
          if (dof.tag == DofFunctional::Tag::interior_moment) wq *= dof.weight(bary);
          int sid = space.scalar_dof(t, 4 * mf + l);
          for (int c = 0; c < 3; ++c) values[space.vector_id(c, sid)] += wq * ux[c];
        }
      }
    }
  }
  return values;
}

Eigen::VectorXd interpolate_dirichlet(const VelocitySpace& space, const VectorFn& u_dirichlet) {
  const Mesh& mesh = *space.mesh;
  const int mf = space.element->n_face_weights;
  const auto& frule = tri_rule(12);
  const auto weights = face_weight_basis(space.element->order);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(space.n_constrained());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (mesh.faces[f].tag != BoundaryTag::dirichlet) continue;
    for (int q = 0; q < frule.size(); ++q) {
      std::span<const double> mu(frule.points[q].data(), 3);
      Vec3 ux = u_dirichlet(face_physical_point(mesh, f, mu));
      for (int w = 0; w < mf; ++w) {
        int ci = space.constrained_index[f * mf + w];
        double wq = frule.weights[q] * weights[w](mu);
        for (int c = 0; c < 3; ++c)
          values[c * space.n_scalar_constrained + ci] += wq * ux[c];
      }
    }
  }
  return values;
}

Eigen::VectorXd extract_free(const VelocitySpace& space, const Eigen::VectorXd& all) {
  Eigen::VectorXd out(space.n_free());
  for (int sid = 0; sid < space.n_scalar; ++sid) {
    int fi = space.free_index[sid];
    if (fi < 0) continue;
    for (int c = 0; c < 3; ++c)
      out[c * space.n_scalar_free + fi] = all[space.vector_id(c, sid)];
  }
  return out;
}

Eigen::VectorXd combine(const VelocitySpace& space, const Eigen::VectorXd& free_part,
                        const Eigen::VectorXd& constrained_part) {
  Eigen::VectorXd all = Eigen::VectorXd::Zero(3 * space.n_scalar);
  for (int sid = 0; sid < space.n_scalar; ++sid) {
    for (int c = 0; c < 3; ++c) {
      int fi = space.free_index[sid];
      int ci = space.constrained_index[sid];
      all[space.vector_id(c, sid)] = fi >= 0 ? free_part[c * space.n_scalar_free + fi]
                                             : constrained_part[c * space.n_scalar_constrained + ci];
    }
  }
  return all;
}

EvalResult eval_discrete(const VelocitySpace& space, const Eigen::VectorXd& all_values, int tet,
                         std::span<const double> bary) {
  if (tet < 0 || tet >= space.mesh->n_tets()) throw std::invalid_argument("eval_discrete: tet id");
  const ElementDef& def = *space.element;
  TetGeometry geom = tet_geometry(*space.mesh, tet);
  EvalResult r;
  for (int l = 0; l < def.n_dofs(); ++l) {
    int sid = space.scalar_dof(tet, l);
    double nv = def.nodal[l](bary);
    Vec3 ng = poly_grad(def.nodal[l], geom.grad_lambda, bary);
    for (int c = 0; c < 3; ++c) {
      double coef = all_values[space.vector_id(c, sid)];
      r.value[c] += coef * nv;
      r.gradient.row(c) += coef * ng.transpose();
    }
  }
  return r;
}

double eval_pressure(const PressureSpace& space, const Eigen::VectorXd& coefficients, int tet,
                     std::span<const double> bary) {
  double v = 0.0;
  for (int m = 0; m < space.block; ++m) {
    double mono = 1.0;
    for (int c = 0; c < 4; ++c)
      for (int e = 0; e < space.monomials[m][c]; ++e) mono *= bary[c];
    v += coefficients[tet * space.block + m] * mono;
  }
  return v;
}

double max_jump_moment(const VelocitySpace& space, const Eigen::VectorXd& all_values) {
  const Mesh& mesh = *space.mesh;
  const auto& frule = tri_rule(12);
  const auto weights = face_weight_basis(space.element->order);
  double worst = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (mesh.faces[f].n_tets != 2) continue;
    for (const auto& w : weights) {
      Vec3 moment = Vec3::Zero();
      for (int q = 0; q < frule.size(); ++q) {
        std::span<const double> mu(frule.points[q].data(), 3);
        auto b0 = face_point_in_tet(mesh, f, mesh.faces[f].tets[0], mu);
        auto b1 = face_point_in_tet(mesh, f, mesh.faces[f].tets[1], mu);
        Vec3 jump = eval_discrete(space, all_values, mesh.faces[f].tets[1], b1).value -
                    eval_discrete(space, all_values, mesh.faces[f].tets[0], b0).value;
        moment += frule.weights[q] * w(mu) * jump;
      }
      worst = std::max(worst, moment.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace ncstokes
