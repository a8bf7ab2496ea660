#include "ncstokes/polyquad.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "ncstokes/error.hpp"

namespace ncstokes {

namespace {

std::uint32_t pack(const std::array<std::uint8_t, 4>& a) {
  return std::uint32_t(a[0]) | (std::uint32_t(a[1]) << 8) | (std::uint32_t(a[2]) << 16) |
         (std::uint32_t(a[3]) << 24);
}

MonomialTable build_table(int ncoords, int degree) {
  MonomialTable t;
  t.ncoords = ncoords;
  t.degree = degree;
  std::array<std::uint8_t, 4> e{0, 0, 0, 0};
  // by total degree, then lexicographic in the leading coordinates
  for (int d = 0; d <= degree; ++d) {
    if (ncoords == 3) {
      for (int a = d; a >= 0; --a)
        for (int b = d - a; b >= 0; --b) {
          e = {std::uint8_t(a), std::uint8_t(b), std::uint8_t(d - a - b), 0};
          t.exponents.push_back(e);
        }
    } else {
      for (int a = d; a >= 0; --a)
        for (int b = d - a; b >= 0; --b)
          for (int c = d - a - b; c >= 0; --c) {
            e = {std::uint8_t(a), std::uint8_t(b), std::uint8_t(c), std::uint8_t(d - a - b - c)};
            t.exponents.push_back(e);
          }
    }
  }
  return t;
}

struct TableCache {
  std::mutex mutex;
  std::map<std::pair<int, int>, MonomialTable> tables;
  std::map<std::pair<int, int>, std::map<std::uint32_t, int>> lookup;
};

TableCache& table_cache() {
  static TableCache cache;
  return cache;
}

const std::map<std::uint32_t, int>& lookup_for(int ncoords, int degree) {
  auto& cache = table_cache();
  std::lock_guard<std::mutex> lock(cache.mutex);
  auto key = std::make_pair(ncoords, degree);
  auto it = cache.lookup.find(key);
  if (it != cache.lookup.end()) return it->second;
  const MonomialTable& t = cache.tables.emplace(key, build_table(ncoords, degree)).first->second;
  std::map<std::uint32_t, int> m;
  for (int i = 0; i < t.size(); ++i) m[pack(t.exponents[i])] = i;
  return cache.lookup.emplace(key, std::move(m)).first->second;
}

}  // namespace

const MonomialTable& monomial_table(int ncoords, int degree) {
  if (ncoords != 3 && ncoords != 4) throw std::invalid_argument("monomial_table: ncoords must be 3 or 4");
  if (degree < 0) throw std::invalid_argument("monomial_table: negative degree");
  auto& cache = table_cache();
  std::lock_guard<std::mutex> lock(cache.mutex);
  auto key = std::make_pair(ncoords, degree);
  auto it = cache.tables.find(key);
  if (it != cache.tables.end()) return it->second;
  return cache.tables.emplace(key, build_table(ncoords, degree)).first->second;
}

int MonomialTable::index_of(std::span<const int> alpha) const {
  std::array<std::uint8_t, 4> e{0, 0, 0, 0};
  int total = 0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    e[i] = static_cast<std::uint8_t>(alpha[i]);
    total += alpha[i];
  }
  if (static_cast<int>(alpha.size()) != ncoords || total > degree)
    throw std::invalid_argument("MonomialTable::index_of: bad multi-index");
  const auto& m = lookup_for(ncoords, degree);
  auto it = m.find(pack(e));
  if (it == m.end()) throw std::invalid_argument("MonomialTable::index_of: not in table");
  return it->second;
}

double monomial_integral_scaled(std::span<const int> alpha, int simplex_dim) {
  // prod(alpha_i!) * d! / (|alpha| + d)!  computed as a running product of
  // small rationals to stay well scaled.
  int total = 0;
  for (int a : alpha) total += a;
  double value = 1.0;
  int denom_next = simplex_dim + 1;  // next factor of (|alpha|+d)! beyond d!
  for (int a : alpha) {
    for (int j = 1; j <= a; ++j) {
      value *= static_cast<double>(j) / static_cast<double>(denom_next);
      ++denom_next;
    }
  }
  (void)total;
  return value;
}

double monomial_integral_scaled(const std::array<std::uint8_t, 4>& alpha, int ncoords) {
  std::array<int, 4> a{alpha[0], alpha[1], alpha[2], alpha[3]};
  return monomial_integral_scaled(std::span<const int>(a.data(), ncoords), ncoords - 1);
}

BaryPoly::BaryPoly(int ncoords, int degree) : ncoords_(ncoords), degree_(degree) {
  coef_.assign(monomial_table(ncoords, degree).size(), 0.0);
}

BaryPoly BaryPoly::constant(int ncoords, double value) {
  BaryPoly p(ncoords, 0);
  p.coef_[0] = value;
  return p;
}

BaryPoly BaryPoly::coordinate(int ncoords, int i) {
  if (i < 0 || i >= ncoords) throw std::invalid_argument("BaryPoly::coordinate: index");
  BaryPoly p(ncoords, 1);
  std::array<int, 4> alpha{0, 0, 0, 0};
  alpha[i] = 1;
  p.set_coefficient(std::span<const int>(alpha.data(), ncoords), 1.0);
  return p;
}

BaryPoly BaryPoly::monomial(int ncoords, std::span<const int> alpha, double c) {
  int d = std::accumulate(alpha.begin(), alpha.end(), 0);
  BaryPoly p(ncoords, d);
  p.set_coefficient(alpha, c);
  return p;
}

double BaryPoly::coefficient(std::span<const int> alpha) const {
  return coef_[monomial_table(ncoords_, degree_).index_of(alpha)];
}

void BaryPoly::set_coefficient(std::span<const int> alpha, double value) {
  coef_[monomial_table(ncoords_, degree_).index_of(alpha)] = value;
}

void BaryPoly::add_coefficient(std::span<const int> alpha, double value) {
  coef_[monomial_table(ncoords_, degree_).index_of(alpha)] += value;
}

BaryPoly& BaryPoly::operator+=(const BaryPoly& other) {
  if (ncoords_ == 0) {
    *this = other;
    return *this;
  }
  if (other.ncoords_ != ncoords_) throw std::invalid_argument("BaryPoly: dimension mismatch");
  if (other.degree_ > degree_) {
    BaryPoly grown(ncoords_, other.degree_);
    const auto& t = monomial_table(ncoords_, degree_);
    for (int i = 0; i < t.size(); ++i) grown.coef_[i] = coef_[i];  // shared degree-major prefix
    *this = grown;
  }
  for (size_t i = 0; i < other.coef_.size(); ++i) coef_[i] += other.coef_[i];
  return *this;
}

BaryPoly& BaryPoly::operator-=(const BaryPoly& other) {
  BaryPoly neg = other;
  neg *= -1.0;
  return *this += neg;
}

BaryPoly& BaryPoly::operator*=(double s) {
  for (double& c : coef_) c *= s;
  return *this;
}

BaryPoly operator*(const BaryPoly& a, const BaryPoly& b) {
  if (a.ncoords_ != b.ncoords_) throw std::invalid_argument("BaryPoly: dimension mismatch");
  BaryPoly r(a.ncoords_, a.degree_ + b.degree_);
  const auto& ta = monomial_table(a.ncoords_, a.degree_);
  const auto& tb = monomial_table(b.ncoords_, b.degree_);
  const auto& tr = monomial_table(r.ncoords_, r.degree_);
  for (int i = 0; i < ta.size(); ++i) {
    if (a.coef_[i] == 0.0) continue;
    for (int j = 0; j < tb.size(); ++j) {
      if (b.coef_[j] == 0.0) continue;
      std::array<int, 4> e{};
      for (int k = 0; k < 4; ++k) e[k] = ta.exponents[i][k] + tb.exponents[j][k];
      r.coef_[tr.index_of(std::span<const int>(e.data(), r.ncoords_))] += a.coef_[i] * b.coef_[j];
    }
  }
  return r;
}

double BaryPoly::operator()(std::span<const double> bary) const {
  if (static_cast<int>(bary.size()) < ncoords_) throw std::invalid_argument("BaryPoly eval: point size");
  // powers up to degree for each coordinate
  double pw[4][13];
  for (int c = 0; c < ncoords_; ++c) {
    pw[c][0] = 1.0;
    for (int d = 1; d <= degree_; ++d) pw[c][d] = pw[c][d - 1] * bary[c];
  }
  const auto& t = monomial_table(ncoords_, degree_);
  double result = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    if (coef_[i] == 0.0) continue;
    double term = coef_[i];
    for (int c = 0; c < ncoords_; ++c) term *= pw[c][t.exponents[i][c]];
    result += term;
  }
  return result;
}

BaryPoly BaryPoly::lambda_derivative(int i) const {
  if (i < 0 || i >= ncoords_) throw std::invalid_argument("lambda_derivative: index");
  BaryPoly r(ncoords_, std::max(0, degree_ - 1));
  const auto& t = monomial_table(ncoords_, degree_);
  for (int m = 0; m < t.size(); ++m) {
    if (coef_[m] == 0.0 || t.exponents[m][i] == 0) continue;
    std::array<int, 4> e{t.exponents[m][0], t.exponents[m][1], t.exponents[m][2], t.exponents[m][3]};
    double c = coef_[m] * e[i];
    e[i] -= 1;
    r.add_coefficient(std::span<const int>(e.data(), ncoords_), c);
  }
  return r;
}

double BaryPoly::integral_scaled() const {
  const auto& t = monomial_table(ncoords_, degree_);
  double total = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    if (coef_[i] == 0.0) continue;
    total += coef_[i] * monomial_integral_scaled(t.exponents[i], ncoords_);
  }
  return total;
}

BaryPoly BaryPoly::trace_to_face(int local_face, std::span<const int> slot_to_local) const {
  if (ncoords_ != 4) throw std::invalid_argument("trace_to_face: needs a tetrahedron polynomial");
  if (local_face < 0 || local_face > 3) throw std::invalid_argument("trace_to_face: face index");
  std::array<bool, 4> seen{false, false, false, false};
  if (slot_to_local.size() != 3) throw std::invalid_argument("trace_to_face: permutation size");
  for (int s = 0; s < 3; ++s) {
    int v = slot_to_local[s];
    if (v < 0 || v > 3 || v == local_face || seen[v])
      throw std::invalid_argument("trace_to_face: invalid permutation");
    seen[v] = true;
  }
  BaryPoly r(3, degree_);
  const auto& t = monomial_table(4, degree_);
  for (int m = 0; m < t.size(); ++m) {
    if (coef_[m] == 0.0 || t.exponents[m][local_face] != 0) continue;
    std::array<int, 4> e{0, 0, 0, 0};
    for (int s = 0; s < 3; ++s) e[s] = t.exponents[m][slot_to_local[s]];
    r.add_coefficient(std::span<const int>(e.data(), 3), coef_[m]);
  }
  return r;
}

double BaryPoly::max_abs_coefficient() const {
  double m = 0.0;
  for (double c : coef_) m = std::max(m, std::abs(c));
  return m;
}

Vec3 poly_grad(const BaryPoly& p, const Eigen::Matrix<double, 4, 3>& grad_lambda,
               std::span<const double> bary) {
  Vec3 g = Vec3::Zero();
  for (int i = 0; i < 4; ++i) {
    double d = p.lambda_derivative(i)(bary);
    g += d * grad_lambda.row(i).transpose();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Quadrature: conical (Stroud) product of Gauss-Jacobi rules.

namespace {

// Nodes/weights on [0,1] for weight (1-x)^alpha, via Golub-Welsch.
void gauss_jacobi01(int npts, int alpha, std::vector<double>& x, std::vector<double>& w) {
  const double a = alpha, b = 0.0;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(npts, npts);
  for (int k = 0; k < npts; ++k) {
    double diag;
    if (k == 0)
      diag = (b - a) / (a + b + 2.0);
    else {
      double m = 2.0 * k + a + b;
      diag = (b * b - a * a) / (m * (m + 2.0));
    }
    J(k, k) = diag;
    if (k >= 1) {
      double m = 2.0 * k + a + b;
      double num = 4.0 * k * (k + a) * (k + b) * (k + a + b);
      double den = m * m * (m + 1.0) * (m - 1.0);
      double off = std::sqrt(num / den);
      J(k, k - 1) = J(k - 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) throw InternalError("gauss_jacobi01: eigensolve failed");
  const double mu0 = std::pow(2.0, a + b + 1.0) / (a + 1.0);  // integer alpha, beta = 0
  x.resize(npts);
  w.resize(npts);
  for (int k = 0; k < npts; ++k) {
    x[k] = 0.5 * (es.eigenvalues()(k) + 1.0);  // map [-1,1] -> [0,1]
    double v = es.eigenvectors()(0, k);
    w[k] = mu0 * v * v / std::pow(2.0, a + 1.0);  // include weight rescaling (1-x) = 2(1-t)
  }
}

QuadratureRule make_rule(int simplex_dim, int exactness) {
  if (exactness < 0) throw std::invalid_argument("quadrature exactness negative");
  if (exactness > kMaxQuadratureExactness)
    throw UnsupportedError("quadrature exactness > 12 is not supported");
  const int m = exactness / 2 + 1;  // Gauss: m points exact to degree 2m-1 >= exactness
  QuadratureRule rule;
  rule.simplex_dim = simplex_dim;
  rule.exactness = exactness;
  std::vector<double> xa, wa, xb, wb, xc, wc;
  gauss_jacobi01(m, 0, xa, wa);
  gauss_jacobi01(m, 1, xb, wb);
  if (simplex_dim == 2) {
    // x = a(1-b), y = b on {x,y>=0, x+y<=1}; measure 1/2
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double x = xa[i] * (1.0 - xb[j]);
        double y = xb[j];
        rule.points.push_back({x, y, 1.0 - x - y, 0.0});
        rule.weights.push_back(wa[i] * wb[j] * 2.0);
      }
  } else {
    gauss_jacobi01(m, 2, xc, wc);
    // x = a(1-b)(1-c), y = b(1-c), z = c; measure 1/6
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
          double z = xc[k];
          double y = xb[j] * (1.0 - z);
          double x = xa[i] * (1.0 - xb[j]) * (1.0 - z);
          rule.points.push_back({x, y, z, 1.0 - x - y - z});
          rule.weights.push_back(wa[i] * wb[j] * wc[k] * 6.0);
        }
  }
  // barycentric convention: the rule's coordinates are (lambda_1..lambda_d+1);
  // above we produced (x, y[, z], last) with last = 1 - sum, already barycentric.
  // Validate against the factorial-formula oracle.
  const int ncoords = simplex_dim + 1;
  const auto& table = monomial_table(ncoords, exactness);
  for (int t = 0; t < table.size(); ++t) {
    std::array<int, 4> alpha{table.exponents[t][0], table.exponents[t][1], table.exponents[t][2],
                             table.exponents[t][3]};
    double exact = monomial_integral_scaled(std::span<const int>(alpha.data(), ncoords), simplex_dim);
    double approx = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      double term = rule.weights[q];
      for (int c = 0; c < ncoords; ++c) term *= std::pow(rule.points[q][c], alpha[c]);
      approx += term;
    }
    if (std::abs(approx - exact) > 1e-13 * std::abs(exact))
      throw InternalError("quadrature self-validation failed at exactness " +
                          std::to_string(exactness));
  }
  return rule;
}

const QuadratureRule& cached_rule(int simplex_dim, int exactness) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(simplex_dim, exactness);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  return cache.emplace(key, make_rule(simplex_dim, exactness)).first->second;
}

}  // namespace

const QuadratureRule& tet_rule(int exactness) { return cached_rule(3, exactness); }
const QuadratureRule& tri_rule(int exactness) { return cached_rule(2, exactness); }

}  // namespace ncstokes
