#include "ncstokes/ref_element.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <random>

#include "ncstokes/error.hpp"
#include "ncstokes/mesh.hpp"

namespace ncstokes {

int element_order(ElementKind kind) {
  switch (kind) {
    case ElementKind::NC2:
    case ElementKind::NC2R:
      return 2;
    case ElementKind::NC3:
    case ElementKind::NC3R:
      return 3;
  }
  return 0;
}

int canonical_pressure_degree(ElementKind kind) {
  switch (kind) {
    case ElementKind::NC2:
      return 2;
    case ElementKind::NC3:
      return 3;
    case ElementKind::NC2R:
      return 1;
    case ElementKind::NC3R:
      return 2;
  }
  return 0;
}

const char* element_name(ElementKind kind) {
  switch (kind) {
    case ElementKind::NC2:
      return "nc2";
    case ElementKind::NC3:
      return "nc3";
    case ElementKind::NC2R:
      return "nc2r";
    case ElementKind::NC3R:
      return "nc3r";
  }
  return "?";
}

std::optional<ElementKind> parse_element(const std::string& name) {
  for (ElementKind k : all_element_kinds())
    if (name == element_name(k)) return k;
  return std::nullopt;
}

std::vector<ElementKind> all_element_kinds() {
  return {ElementKind::NC2, ElementKind::NC3, ElementKind::NC2R, ElementKind::NC3R};
}

namespace {

BaryPoly lam(int i) { return BaryPoly::coordinate(4, i); }

BaryPoly tet_monomial(std::initializer_list<int> alpha, double c = 1.0) {
  std::vector<int> a(alpha);
  return BaryPoly::monomial(4, a, c);
}

BaryPoly from_terms(const std::vector<std::pair<std::array<int, 4>, double>>& terms) {
  BaryPoly p(4, 4);
  for (const auto& [e, c] : terms) p.add_coefficient(std::span<const int>(e.data(), 4), c);
  return p;
}

double max_face_moment(const std::vector<BaryPoly>& fns, int k) {
  double worst = 0.0;
  for (const auto& p : fns)
    for (int f = 0; f < 4; ++f) {
      auto slots = Mesh::local_face_vertices(f);
      std::array<int, 3> s{slots[0], slots[1], slots[2]};
      BaryPoly tr = p.trace_to_face(f, s);
      for (const auto& w : face_weight_basis(k))
        worst = std::max(worst, std::abs((tr * w).integral_scaled()));
    }
  return worst;
}

// principal lattice of the given order on the tetrahedron
std::vector<std::array<double, 4>> lattice_points(int order) {
  std::vector<std::array<double, 4>> pts;
  for (int a = 0; a <= order; ++a)
    for (int b = 0; b <= order - a; ++b)
      for (int c = 0; c <= order - a - b; ++c) {
        int d = order - a - b - c;
        pts.push_back({double(a) / order, double(b) / order, double(c) / order, double(d) / order});
      }
  return pts;
}

int svd_rank(const Eigen::MatrixXd& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * s(0)) ++rank;
  return rank;
}

Eigen::MatrixXd face_constraint_matrix(const std::vector<BaryPoly>& family, int k) {
  const auto weights = face_weight_basis(k);
  Eigen::MatrixXd C(4 * static_cast<int>(weights.size()), static_cast<int>(family.size()));
  for (size_t j = 0; j < family.size(); ++j) {
    int row = 0;
    for (int f = 0; f < 4; ++f) {
      auto slots = Mesh::local_face_vertices(f);
      std::array<int, 3> s{slots[0], slots[1], slots[2]};
      BaryPoly tr = family[j].trace_to_face(f, s);
      for (const auto& w : weights) C(row++, static_cast<int>(j)) = (tr * w).integral_scaled();
    }
  }
  return C;
}

}  // namespace

std::vector<BaryPoly> homogeneous_basis(int ncoords, int degree) {
  std::vector<BaryPoly> basis;
  const auto& table = monomial_table(ncoords, degree);
  for (int i = 0; i < table.size(); ++i) {
    int total = table.exponents[i][0] + table.exponents[i][1] + table.exponents[i][2] +
                table.exponents[i][3];
    if (total != degree) continue;
    std::array<int, 4> a{table.exponents[i][0], table.exponents[i][1], table.exponents[i][2],
                         table.exponents[i][3]};
    basis.push_back(BaryPoly::monomial(ncoords, std::span<const int>(a.data(), ncoords)));
  }
  return basis;
}

std::vector<BaryPoly> face_weight_basis(int k) {
  if (k != 2 && k != 3) throw std::invalid_argument("face_weight_basis: k must be 2 or 3");
  BaryPoly one = BaryPoly::constant(3, 1.0);
  BaryPoly a = BaryPoly::coordinate(3, 0);
  BaryPoly b = BaryPoly::coordinate(3, 1);
  if (k == 2) return {one, a, b};
  return {one, a, b, a * a, a * b, b * b};
}

std::vector<BaryPoly> bubble_basis(int k) {
  if (k != 2 && k != 3) throw std::invalid_argument("bubble_basis: k must be 2 or 3");
  std::vector<BaryPoly> basis;
  if (k == 2) {
    // vertex bubbles 5 l_i^3 - 5 l_i^2 + l_i
    for (int i = 0; i < 4; ++i) {
      BaryPoly li = lam(i);
      basis.push_back(5.0 * (li * li * li) - 5.0 * (li * li) + li);
    }
    // -2 l_i^2 + 4 l_i - 2 + 3 sum_{j != i} l_j^2 + 30 prod_{j != i} l_j
    for (int i = 0; i < 4; ++i) {
      BaryPoly li = lam(i);
      BaryPoly p = (-2.0) * (li * li) + 4.0 * li - BaryPoly::constant(4, 2.0);
      BaryPoly prod = BaryPoly::constant(4, 30.0);
      for (int j = 0; j < 4; ++j) {
        if (j == i) continue;
        p += 3.0 * (lam(j) * lam(j));
        prod = prod * lam(j);
      }
      basis.push_back(p + prod);
    }
  } else {
    // vertex bubbles 14 l_i^4 - 21 l_i^3 + 9 l_i^2 - l_i
    for (int i = 0; i < 4; ++i) {
      BaryPoly li = lam(i);
      BaryPoly l2 = li * li;
      basis.push_back(14.0 * (l2 * l2) - 21.0 * (l2 * li) + 9.0 * l2 - li);
    }
    // cell bubble
    basis.push_back(lam(0) * lam(1) * lam(2) * lam(3));
    // one edge-pair bubble per partition through vertex 0; the three
    // partitions' mirror copies are linearly dependent on these
    for (int j = 1; j <= 3; ++j) {
      int i = 0;
      std::array<int, 2> rest{};
      int r = 0;
      for (int m = 1; m < 4; ++m)
        if (m != j) rest[r++] = m;
      BaryPoly s = lam(i) + lam(j);
      BaryPoly t = lam(rest[0]) + lam(rest[1]);
      BaryPoly P = lam(i) * lam(j);
      BaryPoly Q = lam(rest[0]) * lam(rest[1]);
      BaryPoly s2 = s * s;
      BaryPoly p = 28.0 * (s2 * s2) - 53.0 * (s2 * s) + 27.0 * s2 - 18.0 * P + 3.0 * Q +
                   s * (21.0 * P - BaryPoly::constant(4, 2.0) - 3.0 * (t * t) - 21.0 * Q);
      basis.push_back(p);
    }
    // three exact rational null-space vectors of the face-moment constraint
    // matrix completing the basis to dimension 11
    basis.push_back(from_terms({{{0, 0, 0, 4}, -6},  {{0, 0, 1, 3}, 36},   {{0, 0, 2, 2}, -6},
                                {{0, 0, 3, 1}, -4},  {{0, 0, 4, 0}, -1},   {{0, 1, 0, 3}, 36},
                                {{0, 1, 1, 2}, -192},{{0, 1, 2, 1}, 48},   {{0, 1, 3, 0}, 16},
                                {{0, 2, 0, 2}, -6},  {{0, 2, 1, 1}, 48},   {{0, 2, 2, 0}, -36},
                                {{0, 3, 0, 1}, -4},  {{0, 3, 1, 0}, 16},   {{0, 4, 0, 0}, -1},
                                {{1, 0, 0, 3}, 40},  {{1, 0, 1, 2}, -240}, {{1, 0, 2, 1}, 120},
                                {{1, 1, 0, 2}, -240},{{1, 2, 0, 1}, 120}}));
    basis.push_back(from_terms({{{0, 0, 0, 4}, -1},  {{0, 0, 1, 3}, -4},   {{0, 0, 2, 2}, -6},
                                {{0, 0, 3, 1}, 36},  {{0, 0, 4, 0}, -6},   {{0, 1, 0, 3}, 16},
                                {{0, 1, 1, 2}, 48},  {{0, 1, 2, 1}, -192}, {{0, 1, 3, 0}, 36},
                                {{0, 2, 0, 2}, -36}, {{0, 2, 1, 1}, 48},   {{0, 2, 2, 0}, -6},
                                {{0, 3, 0, 1}, 16},  {{0, 3, 1, 0}, -4},   {{0, 4, 0, 0}, -1},
                                {{1, 0, 1, 2}, 120}, {{1, 0, 2, 1}, -240}, {{1, 0, 3, 0}, 40},
                                {{1, 1, 2, 0}, -240},{{1, 2, 1, 0}, 120}}));
    basis.push_back(from_terms({{{0, 0, 0, 4}, -14}, {{0, 0, 1, 3}, 84},   {{0, 0, 2, 2}, -54},
                                {{0, 0, 3, 1}, 4},   {{0, 0, 4, 0}, 1},    {{0, 1, 0, 3}, 84},
                                {{0, 1, 1, 2}, -288},{{0, 1, 2, 1}, 72},   {{0, 1, 3, 0}, -16},
                                {{0, 2, 0, 2}, -54}, {{0, 2, 1, 1}, 72},   {{0, 2, 2, 0}, 36},
                                {{0, 3, 0, 1}, 4},   {{0, 3, 1, 0}, -16},  {{0, 4, 0, 0}, 1},
                                {{1, 0, 0, 3}, 80},  {{1, 0, 1, 2}, -240}, {{1, 1, 0, 2}, -240},
                                {{2, 0, 0, 2}, -60}, {{2, 0, 1, 1}, 120},  {{2, 1, 0, 1}, 120}}));
  }
  const int want = (k == 2) ? 8 : 11;
  if (static_cast<int>(basis.size()) != want)
    throw InternalError("bubble_basis: wrong count");
  if (max_face_moment(basis, k) > 1e-12)
    throw InternalError("bubble_basis: face-moment self-check failed");
  if (family_rank(basis, k + 1) != want)
    throw InternalError("bubble_basis: linear-independence self-check failed");
  return basis;
}

BaryPoly pk_bubble(int k) {
  if (k != 2 && k != 3) throw std::invalid_argument("pk_bubble: k must be 2 or 3");
  BaryPoly b;
  if (k == 2) {
    b = BaryPoly::constant(4, 2.0);
    for (int i = 0; i < 4; ++i) b -= 4.0 * (lam(i) * lam(i));
  } else {
    b = BaryPoly(4, 3);
    for (int i = 0; i < 4; ++i) {
      BaryPoly li = lam(i);
      b += 11.0 * (li * li * li) - 9.0 * (li * li);
    }
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        for (int m = j + 1; m < 4; ++m) b += 72.0 * (lam(i) * lam(j) * lam(m));
  }
  if (max_face_moment({b}, k) > 1e-12)
    throw InternalError("pk_bubble: face-moment self-check failed");
  return b;
}

std::vector<BaryPoly> reduced_shape_basis(int k) {
  if (k != 2 && k != 3) throw std::invalid_argument("reduced_shape_basis: k must be 2 or 3");
  std::vector<BaryPoly> basis = homogeneous_basis(4, k);
  if (k == 2) {
    basis.push_back(tet_monomial({2, 1, 0, 0}));
    basis.push_back(tet_monomial({0, 2, 1, 0}));
    basis.push_back(tet_monomial({1, 0, 2, 0}));
  } else {
    basis.push_back(tet_monomial({2, 0, 1, 1}));
    basis.push_back(tet_monomial({1, 2, 0, 1}));
    basis.push_back(tet_monomial({1, 1, 2, 0}));
    basis.push_back(tet_monomial({0, 1, 1, 2}));
    basis.push_back(tet_monomial({1, 3, 0, 0}));
  }
  const int want = (k == 2) ? 13 : 25;
  if (family_rank(basis, k + 1) != want)
    throw InternalError("reduced_shape_basis: rank self-check failed");
  return basis;
}

std::vector<BaryPoly> complement_basis(int k) {
  std::vector<BaryPoly> basis;
  if (k == 2) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        basis.push_back(lam(i) * lam(i) * lam(j));
        basis.push_back(lam(i) * lam(j) * lam(j));
      }
  } else if (k == 3) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        basis.push_back(lam(i) * lam(i) * lam(i) * lam(j));
        basis.push_back(lam(i) * lam(j) * lam(j) * lam(j));
      }
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        for (int m = j + 1; m < 4; ++m) {
          basis.push_back(lam(i) * lam(i) * lam(j) * lam(m));
          basis.push_back(lam(i) * lam(j) * lam(j) * lam(m));
          basis.push_back(lam(i) * lam(j) * lam(m) * lam(m));
        }
  } else {
    throw std::invalid_argument("complement_basis: k must be 2 or 3");
  }
  return basis;
}

int family_rank(const std::vector<BaryPoly>& family, int lattice_degree) {
  auto pts = lattice_points(lattice_degree);
  Eigen::MatrixXd M(static_cast<int>(family.size()), static_cast<int>(pts.size()));
  for (size_t i = 0; i < family.size(); ++i)
    for (size_t j = 0; j < pts.size(); ++j)
      M(static_cast<int>(i), static_cast<int>(j)) =
          family[i](std::span<const double>(pts[j].data(), 4));
  return svd_rank(M);
}

int family_constraint_nullity(const std::vector<BaryPoly>& family, int k) {
  Eigen::MatrixXd C = face_constraint_matrix(family, k);
  return static_cast<int>(family.size()) - svd_rank(C);
}

int face_constraint_nullity(int degree, int k) {
  return family_constraint_nullity(homogeneous_basis(4, degree), k);
}

int bubble_space_dimension(int k) { return face_constraint_nullity(k + 1, k); }

int div_bubble_image_rank(int k, double* max_mean_abs) {
  const auto bubbles = bubble_basis(k);
  // fixed nondegenerate tet: the reference simplex
  Eigen::Matrix<double, 4, 3> grad_lambda;
  grad_lambda << -1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  std::vector<BaryPoly> images;
  double worst_mean = 0.0;
  for (const auto& phi : bubbles)
    for (int c = 0; c < 3; ++c) {
      BaryPoly d(4, std::max(0, phi.degree() - 1));
      for (int p = 0; p < 4; ++p) {
        BaryPoly term = phi.lambda_derivative(p);
        term *= grad_lambda(p, c);
        d += term;
      }
      worst_mean = std::max(worst_mean, std::abs(d.integral_scaled()));
      images.push_back(d);
    }
  if (max_mean_abs) *max_mean_abs = worst_mean;
  return family_rank(images, k);
}

double apply_dof(const DofFunctional& dof, const BaryPoly& p) {
  switch (dof.tag) {
    case DofFunctional::Tag::face_moment: {
      auto slots = Mesh::local_face_vertices(dof.local_face);
      std::array<int, 3> s{slots[0], slots[1], slots[2]};
      return (p.trace_to_face(dof.local_face, s) * dof.weight).integral_scaled();
    }
    case DofFunctional::Tag::interior_moment:
      return (p * dof.weight).integral_scaled();
    case DofFunctional::Tag::volume_average:
      return p.integral_scaled();
  }
  return 0.0;
}

namespace {

ElementDef build_element(ElementKind kind) {
  ElementDef def;
  def.kind = kind;
  def.order = element_order(kind);
  const int k = def.order;
  const bool reduced = (kind == ElementKind::NC2R || kind == ElementKind::NC3R);
  def.shape = reduced ? reduced_shape_basis(k) : homogeneous_basis(4, k + 1);
  def.n_face_weights = (k == 2) ? 3 : 6;
  for (int f = 0; f < 4; ++f)
    for (const auto& w : face_weight_basis(k)) {
      DofFunctional dof;
      dof.tag = DofFunctional::Tag::face_moment;
      dof.local_face = f;
      dof.weight = w;
      def.dofs.push_back(dof);
    }
  if (reduced) {
    DofFunctional dof;
    dof.tag = DofFunctional::Tag::volume_average;
    def.dofs.push_back(dof);
    def.n_interior = 1;
  } else {
    for (const auto& b : bubble_basis(k)) {
      DofFunctional dof;
      dof.tag = DofFunctional::Tag::interior_moment;
      // unit L2(T) scale keeps the Vandermonde well conditioned
      dof.weight = b * (1.0 / std::sqrt((b * b).integral_scaled()));
      def.dofs.push_back(dof);
    }
    def.n_interior = (k == 2) ? 8 : 11;
  }
  const int n = static_cast<int>(def.shape.size());
  if (static_cast<int>(def.dofs.size()) != n)
    throw InternalError("element_def: dof/shape count mismatch");
  def.vandermonde.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) def.vandermonde(i, j) = apply_dof(def.dofs[i], def.shape[j]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(def.vandermonde);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= 1e-12 * s(0))
    throw InternalError(std::string("element_def: unisolvence failure for ") + element_name(kind));
  def.vandermonde_condition = s(0) / s(s.size() - 1);
  def.dual = def.vandermonde.inverse();
  def.nodal.reserve(n);
  for (int j = 0; j < n; ++j) {
    BaryPoly nj(4, k + 1);
    for (int i = 0; i < n; ++i) {
      BaryPoly term = def.shape[i];
      term *= def.dual(i, j);
      nj += term;
    }
    def.nodal.push_back(nj);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = apply_dof(def.dofs[i], def.nodal[j]);
      if (std::abs(v - (i == j ? 1.0 : 0.0)) > 1e-9)
        throw InternalError("element_def: biorthogonality self-check failed");
    }
  return def;
}

}  // namespace

const ElementDef& element_def(ElementKind kind) {
  static std::mutex mutex;
  static std::map<ElementKind, ElementDef> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(kind);
  if (it != cache.end()) return it->second;
  return cache.emplace(kind, build_element(kind)).first->second;
}

// ---------------------------------------------------------------------------

namespace {

// Biorthogonality via the quadrature path on a physical tetrahedron: DoFs are
// re-evaluated with mapped simplex rules instead of the exact formula.
double biorthogonality_residual_quadrature(const ElementDef& def) {
  const auto& trule = tet_rule(8);
  const auto& frule = tri_rule(8);
  const int n = def.n_dofs();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& dof = def.dofs[i];
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      if (dof.tag == DofFunctional::Tag::face_moment) {
        auto slots = Mesh::local_face_vertices(dof.local_face);
        for (int q = 0; q < frule.size(); ++q) {
          std::array<double, 4> bary{0.0, 0.0, 0.0, 0.0};
          for (int s = 0; s < 3; ++s) bary[slots[s]] = frule.points[q][s];
          double w = dof.weight(std::span<const double>(frule.points[q].data(), 3));
          v += frule.weights[q] * w * def.nodal[j](bary);
        }
      } else {
        for (int q = 0; q < trule.size(); ++q) {
          double w = dof.tag == DofFunctional::Tag::volume_average
                         ? 1.0
                         : dof.weight(std::span<const double>(trule.points[q].data(), 4));
          v += trule.weights[q] * w *
               def.nodal[j](std::span<const double>(trule.points[q].data(), 4));
        }
      }
      worst = std::max(worst, std::abs(v - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

void push(std::vector<CertifyRow>& rows, const std::string& name, const std::string& expected,
          double computed, bool pass) {
  rows.push_back({name, expected, computed, pass});
}

}  // namespace

std::vector<CertifyRow> certify_element_report() {
  std::vector<CertifyRow> rows;
  for (int k : {2, 3}) {
    const std::string kk = std::to_string(k);
    int want_dim = (k == 2) ? 8 : 11;
    int dim = bubble_space_dimension(k);
    push(rows, "bubble_space_dim_k" + kk, std::to_string(want_dim), dim, dim == want_dim);

    auto bubbles = bubble_basis(k);
    double mom = max_face_moment(bubbles, k);
    push(rows, "bubble_face_moments_k" + kk, "<=1e-12", mom, mom <= 1e-12);
    int rank = family_rank(bubbles, k + 1);
    push(rows, "bubble_basis_rank_k" + kk, std::to_string(want_dim), rank, rank == want_dim);

    int pk_nullity = face_constraint_nullity(k, k);
    push(rows, "pk_bubble_nullity_k" + kk, "1", pk_nullity, pk_nullity == 1);
    double bmom = max_face_moment({pk_bubble(k)}, k);
    push(rows, "pk_bubble_moments_k" + kk, "<=1e-12", bmom, bmom <= 1e-12);

    auto reduced = reduced_shape_basis(k);
    int want_red = (k == 2) ? 13 : 25;
    int rrank = family_rank(reduced, k + 1);
    push(rows, "reduced_basis_rank_k" + kk, std::to_string(want_red), rrank, rrank == want_red);
    int rnull = family_constraint_nullity(reduced, k);
    push(rows, "reduced_bubble_content_k" + kk, "1", rnull, rnull == 1);

    auto direct_sum = bubbles;
    for (const auto& p : complement_basis(k)) direct_sum.push_back(p);
    int full_dim = (k == 2) ? 20 : 35;
    int dsrank = family_rank(direct_sum, k + 1);
    push(rows, "direct_sum_rank_k" + kk, std::to_string(full_dim), dsrank, dsrank == full_dim);

    double max_mean = 0.0;
    int divrank = div_bubble_image_rank(k, &max_mean);
    int want_div = (k == 2) ? 9 : 19;
    push(rows, "div_bubble_rank_k" + kk, std::to_string(want_div), divrank, divrank == want_div);
    push(rows, "div_bubble_zero_mean_k" + kk, "<=1e-12", max_mean, max_mean <= 1e-12);
  }
  for (ElementKind kind : all_element_kinds()) {
    const ElementDef& def = element_def(kind);
    const std::string name = element_name(kind);
    int want_n = 0;
    switch (kind) {
      case ElementKind::NC2: want_n = 20; break;
      case ElementKind::NC3: want_n = 35; break;
      case ElementKind::NC2R: want_n = 13; break;
      case ElementKind::NC3R: want_n = 25; break;
    }
    push(rows, "vandermonde_size_" + name, std::to_string(want_n), def.n_dofs(),
         def.n_dofs() == want_n);
    push(rows, "vandermonde_cond_" + name, "<1e6", def.vandermonde_condition,
         def.vandermonde_condition < 1e6);
    double biorth = biorthogonality_residual_quadrature(def);
    push(rows, "biorthogonality_" + name, "<=1e-9", biorth, biorth <= 1e-9);
  }
  return rows;
}

}  // namespace ncstokes
