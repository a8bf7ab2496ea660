#include "ncstokes/manufactured.hpp"

#include <cmath>

#include "ncstokes/error.hpp"

namespace ncstokes {

TriPoly TriPoly::constant(double v) {
  TriPoly p;
  p.coef_[0] = v;
  return p;
}

TriPoly TriPoly::variable(int axis) {
  TriPoly p;
  p.deg_ = {0, 0, 0};
  p.deg_[axis] = 1;
  p.coef_.assign(2, 0.0);
  p.coef_[1] = 1.0;
  return p;
}

double TriPoly::operator()(const Vec3& x) const {
  double result = 0.0;
  for (int k = deg_[2]; k >= 0; --k) {
    double ry = 0.0;
    for (int j = deg_[1]; j >= 0; --j) {
      double rx = 0.0;
      for (int i = deg_[0]; i >= 0; --i) rx = rx * x[0] + coef_[idx(i, j, k)];
      ry = ry * x[1] + rx;
    }
    result = result * x[2] + ry;
  }
  return result;
}

TriPoly TriPoly::derivative(int axis) const {
  TriPoly r;
  r.deg_ = deg_;
  r.deg_[axis] = std::max(0, deg_[axis] - 1);
  r.coef_.assign((r.deg_[0] + 1) * (r.deg_[1] + 1) * (r.deg_[2] + 1), 0.0);
  for (int k = 0; k <= r.deg_[2]; ++k)
    for (int j = 0; j <= r.deg_[1]; ++j)
      for (int i = 0; i <= r.deg_[0]; ++i) {
        std::array<int, 3> e{i, j, k};
        e[axis] += 1;
        if (e[0] > deg_[0] || e[1] > deg_[1] || e[2] > deg_[2]) continue;
        r.coef_[r.idx(i, j, k)] = coef_[idx(e[0], e[1], e[2])] * e[axis];
      }
  return r;
}

double TriPoly::integral_unit_cube() const {
  double total = 0.0;
  for (int k = 0; k <= deg_[2]; ++k)
    for (int j = 0; j <= deg_[1]; ++j)
      for (int i = 0; i <= deg_[0]; ++i)
        total += coef_[idx(i, j, k)] / ((i + 1.0) * (j + 1.0) * (k + 1.0));
  return total;
}

bool TriPoly::is_zero(double tol) const {
  for (double c : coef_)
    if (std::abs(c) > tol) return false;
  return true;
}

TriPoly& TriPoly::operator+=(const TriPoly& o) {
  std::array<int, 3> nd{std::max(deg_[0], o.deg_[0]), std::max(deg_[1], o.deg_[1]),
                        std::max(deg_[2], o.deg_[2])};
  TriPoly r;
  r.deg_ = nd;
  r.coef_.assign((nd[0] + 1) * (nd[1] + 1) * (nd[2] + 1), 0.0);
  for (int k = 0; k <= deg_[2]; ++k)
    for (int j = 0; j <= deg_[1]; ++j)
      for (int i = 0; i <= deg_[0]; ++i) r.coef_[r.idx(i, j, k)] += coef_[idx(i, j, k)];
  for (int k = 0; k <= o.deg_[2]; ++k)
    for (int j = 0; j <= o.deg_[1]; ++j)
      for (int i = 0; i <= o.deg_[0]; ++i) r.coef_[r.idx(i, j, k)] += o.coef_[o.idx(i, j, k)];
  *this = r;
  return *this;
}

TriPoly& TriPoly::operator-=(const TriPoly& o) {
  TriPoly neg = o;
  neg *= -1.0;
  return *this += neg;
}

TriPoly& TriPoly::operator*=(double s) {
  for (double& c : coef_) c *= s;
  return *this;
}

TriPoly operator*(const TriPoly& a, const TriPoly& b) {
  TriPoly r;
  r.deg_ = {a.deg_[0] + b.deg_[0], a.deg_[1] + b.deg_[1], a.deg_[2] + b.deg_[2]};
  r.coef_.assign((r.deg_[0] + 1) * (r.deg_[1] + 1) * (r.deg_[2] + 1), 0.0);
  for (int k = 0; k <= a.deg_[2]; ++k)
    for (int j = 0; j <= a.deg_[1]; ++j)
      for (int i = 0; i <= a.deg_[0]; ++i) {
        double ca = a.coef_[a.idx(i, j, k)];
        if (ca == 0.0) continue;
        for (int n = 0; n <= b.deg_[2]; ++n)
          for (int m = 0; m <= b.deg_[1]; ++m)
            for (int l = 0; l <= b.deg_[0]; ++l)
              r.coef_[r.idx(i + l, j + m, k + n)] += ca * b.coef_[b.idx(l, m, n)];
      }
  return r;
}

StokesSolution make_solution(std::array<TriPoly, 3> u, TriPoly p, double mu) {
  StokesSolution s;
  s.mu = mu;
  s.u = std::move(u);
  s.p = p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s.grad[i][j] = s.u[i].derivative(j);
  // f_i = -mu (lap u_i + d_i div u) + d_i p
  TriPoly div = s.grad[0][0] + s.grad[1][1] + s.grad[2][2];
  for (int i = 0; i < 3; ++i) {
    TriPoly lap = s.grad[i][0].derivative(0) + s.grad[i][1].derivative(1) +
                  s.grad[i][2].derivative(2);
    s.f[i] = (-mu) * (lap + div.derivative(i)) + s.p.derivative(i);
  }
  return s;
}

VectorFn StokesSolution::velocity() const {
  auto self = *this;
  return [self](const Vec3& x) { return Vec3(self.u[0](x), self.u[1](x), self.u[2](x)); };
}

MatrixFn StokesSolution::velocity_gradient() const {
  auto self = *this;
  return [self](const Vec3& x) {
    Eigen::Matrix3d g;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g(i, j) = self.grad[i][j](x);
    return g;
  };
}

ScalarFn StokesSolution::pressure() const {
  auto self = *this;
  return [self](const Vec3& x) { return self.p(x); };
}

StokesData StokesSolution::data() const {
  StokesData d;
  auto self = *this;
  d.body_force = [self](const Vec3& x) { return Vec3(self.f[0](x), self.f[1](x), self.f[2](x)); };
  d.traction = [self](const Vec3& x, const Vec3& n) {
    Eigen::Matrix3d g;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g(i, j) = self.grad[i][j](x);
    Eigen::Matrix3d sigma = self.mu * (g + g.transpose());
    double pv = self.p(x);
    for (int i = 0; i < 3; ++i) sigma(i, i) -= pv;
    return Vec3(sigma * n);
  };
  d.dirichlet = velocity();
  return d;
}

StokesSolution experiment_solution(double mu) {
  TriPoly x = TriPoly::variable(0), y = TriPoly::variable(1), z = TriPoly::variable(2);
  TriPoly one = TriPoly::constant(1.0);
  auto sq = [](const TriPoly& a) { return a * a; };
  TriPoly psi1 = sq(y) * sq(one - y) * (x * (one - x)) * sq(z) * (sq(one - z) * (one - z));
  TriPoly psi2 = sq(x) * sq(one - x) * (y * (one - y)) * sq(z) * (sq(one - z) * (one - z));
  std::array<TriPoly, 3> u{TriPoly::constant(0.0) - psi2.derivative(2), psi1.derivative(2),
                           psi2.derivative(0) - psi1.derivative(1)};
  TriPoly p = (x - TriPoly::constant(0.5)) * (y - TriPoly::constant(0.5)) * (one - z);
  StokesSolution s = make_solution(std::move(u), p, mu);
  TriPoly div = s.grad[0][0] + s.grad[1][1] + s.grad[2][2];
  if (!div.is_zero(1e-14)) throw InternalError("experiment solution is not divergence-free");
  if (std::abs(s.p.integral_unit_cube()) > 1e-14)
    throw InternalError("experiment pressure is not mean-zero");
  return s;
}

StokesSolution patch_solution(int k, double mu) {
  if (k != 2 && k != 3) throw std::invalid_argument("patch_solution: k must be 2 or 3");
  TriPoly x = TriPoly::variable(0), y = TriPoly::variable(1), z = TriPoly::variable(2);
  std::array<TriPoly, 3> u;
  TriPoly p;
  if (k == 2) {
    u = {y * y, z * z, x * x};
    p = x + y + z - TriPoly::constant(1.5);
  } else {
    u = {y * y * y + z * z, z * z * z + x * x, x * x * x + y * y};
    p = x * x + y * z - TriPoly::constant(7.0 / 12.0);
  }
  StokesSolution s = make_solution(std::move(u), p, mu);
  TriPoly div = s.grad[0][0] + s.grad[1][1] + s.grad[2][2];
  if (!div.is_zero() || std::abs(s.p.integral_unit_cube()) > 1e-15)
    throw InternalError("patch solution data inconsistent");
  return s;
}

}  // namespace ncstokes
