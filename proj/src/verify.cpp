#include "ncstokes/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <Eigen/SparseCholesky>

#include "ncstokes/error.hpp"

namespace ncstokes {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// per-tet block Cholesky factors of the pressure mass matrix
std::vector<Eigen::MatrixXd> pressure_mass_cholesky(const Mesh& mesh, const PressureSpace& ps) {
  std::vector<BaryPoly> psi = homogeneous_basis(4, ps.degree);
  Eigen::MatrixXd block(ps.block, ps.block);
  for (int i = 0; i < ps.block; ++i)
    for (int j = i; j < ps.block; ++j)
      block(i, j) = block(j, i) = (psi[i] * psi[j]).integral_scaled();
  std::vector<Eigen::MatrixXd> L(mesh.n_tets());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    double vol = tet_geometry(mesh, t).volume;
    Eigen::LLT<Eigen::MatrixXd> llt(vol * block);
    if (llt.info() != Eigen::Success) throw SolverError("pressure mass not positive definite");
    L[t] = llt.matrixL();
  }
  return L;
}

void block_lower_solve_rows(const std::vector<Eigen::MatrixXd>& L, Eigen::MatrixXd& M) {
  // M <- L^{-1} M, L block diagonal
  const int b = static_cast<int>(L.empty() ? 0 : L[0].rows());
  for (size_t t = 0; t < L.size(); ++t)
    M.middleRows(static_cast<int>(t) * b, b) =
        L[t].triangularView<Eigen::Lower>().solve(M.middleRows(static_cast<int>(t) * b, b));
}

}  // namespace

std::string csv_header() { return "check,pair,level,metric,expected,computed,pass"; }

std::string to_csv(const std::vector<CheckRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.check + "," + r.pair + "," + std::to_string(r.level) + "," + r.metric + "," +
           r.expected + "," + fmt(r.computed) + "," + (r.pass ? "1" : "0") + "\n";
  }
  return out;
}

InfSupResult infsup_constant(const Mesh& mesh, ElementKind kind, int pressure_degree) {
  SpacePair pair = build_spaces(mesh, kind, pressure_degree);
  SaddleSystem sys = assemble(mesh, pair, 1.0, zero_data());
  SparseMat G = assemble_velocity_gram(mesh, pair.velocity);
  Eigen::SimplicialLDLT<SparseMat> ldlt(G);
  if (ldlt.info() != Eigen::Success)
    throw SolverError("velocity Gram factorization failed (seminorm not definite?)");

  const int np = sys.n_p;
  Eigen::MatrixXd S(np, np);
  Eigen::MatrixXd Bt = Eigen::MatrixXd(sys.B.transpose());
  constexpr int kBlock = 256;
  for (int c0 = 0; c0 < np; c0 += kBlock) {
    int nb = std::min(kBlock, np - c0);
    Eigen::MatrixXd X = ldlt.solve(Bt.middleCols(c0, nb));
    S.middleCols(c0, nb) = sys.B * X;
  }
  S = 0.5 * (S + S.transpose()).eval();

  auto L = pressure_mass_cholesky(mesh, pair.pressure);
  // Shat = L^{-1} S L^{-T}
  block_lower_solve_rows(L, S);
  Eigen::MatrixXd St = S.transpose();
  block_lower_solve_rows(L, St);
  Eigen::MatrixXd Shat = 0.5 * (St + St.transpose());

  // mean-zero restriction: Householder reflecting w = L^{-1} c onto e_1
  Eigen::MatrixXd ccol = sys.mean_row;
  ccol.resize(np, 1);
  block_lower_solve_rows(L, ccol);
  Eigen::VectorXd w = ccol.col(0);
  Eigen::VectorXd v = w;
  v[0] += (w[0] >= 0.0 ? 1.0 : -1.0) * w.norm();
  double vtv = v.squaredNorm();
  if (vtv == 0.0) throw SolverError("infsup: zero mean vector");
  // H = I - 2 v v^T / v^T v;  reduced = (H Shat H) minor(1..)
  Eigen::VectorXd t1 = (2.0 / vtv) * (Shat * v);
  Eigen::MatrixXd HS = Shat - t1 * v.transpose();
  Eigen::VectorXd t2 = (2.0 / vtv) * (HS.transpose() * v);
  Eigen::MatrixXd HSH = HS - v * t2.transpose();
  Eigen::MatrixXd R = 0.5 * (HSH.bottomRightCorner(np - 1, np - 1) +
                             HSH.bottomRightCorner(np - 1, np - 1).transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
  if (es.info() != Eigen::Success) throw SolverError("infsup eigensolve failed");
  double lmin = es.eigenvalues()(0);
  Eigen::VectorXd y = es.eigenvectors().col(0);
  InfSupResult result;
  result.level = mesh.level;
  result.beta = std::sqrt(std::max(lmin, 0.0));
  result.eig_residual = (R * y - lmin * y).norm();
  return result;
}

namespace {

// B_M^T on the macro-element around `vertex`, optionally restricted to
// mean-zero pressures via a Householder reflection; `restrict_to_full`
// maps restricted pressure vectors back to the full coefficient space.
struct MacroDivergence {
  MacroElement macro;
  Eigen::MatrixXd Bt;  // n_u x cols
  Eigen::VectorXd householder;  // empty when not mean-zero restricted
  int n_p = 0;
  int block = 0;

  Eigen::VectorXd restrict_to_full(const Eigen::VectorXd& reduced) const {
    if (householder.size() == 0) return reduced;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n_p);
    q.tail(n_p - 1) = reduced;
    q -= householder * (2.0 * householder.dot(q) / householder.squaredNorm());
    return q;
  }
};

MacroDivergence macro_divergence(const Mesh& mesh, ElementKind kind, int pressure_degree,
                                 int vertex, bool mean_zero) {
  MacroDivergence md;
  md.macro = macro_element(mesh, vertex);
  SpacePair pair = build_spaces(md.macro.mesh, kind, pressure_degree);
  SaddleSystem sys = assemble(md.macro.mesh, pair, 1.0, zero_data());
  md.Bt = Eigen::MatrixXd(sys.B.transpose());  // n_u x n_p
  md.n_p = sys.n_p;
  md.block = pair.pressure.block;
  if (mean_zero) {
    Eigen::VectorXd c = sys.mean_row;
    Eigen::VectorXd v = c;
    v[0] += (c[0] >= 0.0 ? 1.0 : -1.0) * c.norm();
    Eigen::VectorXd t = (2.0 / v.squaredNorm()) * (md.Bt * v);
    md.Bt -= t * v.transpose();
    md.Bt = md.Bt.rightCols(sys.n_p - 1).eval();
    md.householder = v;
  }
  return md;
}

}  // namespace

int macro_nullspace_dim(const Mesh& mesh, ElementKind kind, int pressure_degree, int vertex,
                        bool mean_zero) {
  MacroDivergence md = macro_divergence(mesh, kind, pressure_degree, vertex, mean_zero);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(md.Bt);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * s(0)) ++rank;
  return static_cast<int>(md.Bt.cols()) - rank;
}

double macro_midedge_mismatch(const Mesh& mesh, ElementKind kind, int pressure_degree, int vertex,
                              bool mean_zero) {
  MacroDivergence md = macro_divergence(mesh, kind, pressure_degree, vertex, mean_zero);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(md.Bt, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * s(0)) ++rank;
  const int cols = static_cast<int>(md.Bt.cols());
  if (rank == cols) return 0.0;
  SpacePair pair = build_spaces(md.macro.mesh, kind, pressure_degree);
  // opposite-edge midpoint pairs: {01|23}, {02|13}, {03|12}
  static const int pairs[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
  double worst = 0.0;
  for (int v = rank; v < cols; ++v) {
    Eigen::VectorXd q = md.restrict_to_full(svd.matrixV().col(v));
    for (int t = 0; t < md.macro.mesh.n_tets(); ++t)
      for (const auto& pr : pairs) {
        std::array<double, 4> m1{0, 0, 0, 0}, m2{0, 0, 0, 0};
        m1[pr[0]] = m1[pr[1]] = 0.5;
        m2[pr[2]] = m2[pr[3]] = 0.5;
        worst = std::max(worst, std::abs(eval_pressure(pair.pressure, q, t, m1) -
                                         eval_pressure(pair.pressure, q, t, m2)));
      }
  }
  return worst;
}

double korn_coercivity(const Mesh& mesh, ElementKind kind) {
  SpacePair pair = build_spaces(mesh, kind);
  // mu = 1/2 makes the form int eps(u):eps(v)
  SaddleSystem sys = assemble(mesh, pair, 0.5, zero_data());
  SparseMat G = assemble_velocity_gram(mesh, pair.velocity);
  const double shift = 1e-10;
  SparseMat As = sys.A + shift * G;
  Eigen::SimplicialLDLT<SparseMat> ldlt(As);
  if (ldlt.info() != Eigen::Success) throw SolverError("korn: factorization failed");
  // inverse power iteration on (A + shift G)^{-1} G
  Eigen::VectorXd y = Eigen::VectorXd::Ones(sys.n_u);
  for (int i = 0; i < sys.n_u; ++i) y[i] += 1e-3 * std::sin(0.7 * i);  // deterministic de-symmetrization
  y.normalize();
  double nu = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd z = ldlt.solve(G * y);
    double zn = z.norm();
    if (zn == 0.0) break;
    z /= zn;
    double nu_new = z.dot(G * z) / z.dot(As * z);
    bool converged = std::abs(nu_new - nu) <= 1e-10 * std::abs(nu_new);
    nu = nu_new;
    y = z;
    if (converged) break;
  }
  if (nu <= 0.0) throw SolverError("korn: iteration failed");
  return std::max(1.0 / nu - shift, 0.0);
}

DivFreeResult divfree_check(const Mesh& mesh, ElementKind kind, const SpacePair& pair,
                            const SaddleSystem& system, const SolveReport& solution) {
  Eigen::VectorXd all =
      combine(pair.velocity, solution.velocity, system.dirichlet_values);
  DivFreeResult r;
  r.pointwise = max_elementwise_divergence(mesh, pair.velocity, all);
  bool full = (kind == ElementKind::NC2 || kind == ElementKind::NC3);
  if (full) {
    r.elementwise = true;
    r.value = r.pointwise;
  } else {
    r.elementwise = false;
    Eigen::VectorXd weak = system.B * solution.velocity - system.g;
    if (solution.gauge_used == PressureGauge::multiplier)
      weak += solution.multiplier * system.mean_row;
    r.value = weak.cwiseAbs().maxCoeff();
  }
  return r;
}

ConvergenceReport convergence_study(ElementKind kind, const std::vector<int>& levels, double mu,
                                    const SolverOptions& options, int threads) {
  if (levels.empty()) throw std::invalid_argument("convergence_study: no levels");
  StokesSolution exact = experiment_solution(mu);
  ConvergenceReport report;
  report.kind = kind;
  for (int n : levels) {
    Mesh mesh = build_cube_mesh(n);
    SpacePair pair = build_spaces(mesh, kind);
    SaddleSystem sys = assemble(mesh, pair, mu, exact.data(), threads);
    SolveReport sol = solve(sys, options);
    Eigen::VectorXd all = combine(pair.velocity, sol.velocity, sys.dirichlet_values);
    ErrorNorms err = solution_errors(mesh, pair, all, sol.pressure, exact.velocity(),
                                     exact.velocity_gradient(), exact.pressure());
    report.levels.push_back({n, 1.0 / n, err});
  }
  for (size_t i = 1; i < report.levels.size(); ++i) {
    const auto& a = report.levels[i - 1];
    const auto& b = report.levels[i];
    double r = std::log(a.h / b.h);
    report.rates.push_back({std::log(a.errors.h1_velocity / b.errors.h1_velocity) / r,
                            std::log(a.errors.l2_velocity / b.errors.l2_velocity) / r,
                            std::log(a.errors.l2_pressure / b.errors.l2_pressure) / r});
  }
  return report;
}

CensusRow census_formula(ElementKind kind, int n) {
  const ElementDef& def = element_def(kind);
  long n3 = long(n) * n * n, n2 = long(n) * n;
  long faces_free = 12 * n3 - 4 * n2;  // interior + Neumann top
  long mf = def.n_face_weights, mi = def.n_interior;
  CensusRow row;
  row.level = n;
  row.velocity = 3 * (mf * faces_free + mi * 6 * n3);
  long block = 0;
  for (int d = 0; d <= canonical_pressure_degree(kind); ++d) block += (d + 1) * (d + 2) / 2;
  row.pressure = 6 * n3 * block;
  return row;
}

std::vector<CensusRow> dof_census(ElementKind kind, const std::vector<int>& levels) {
  std::vector<CensusRow> rows;
  for (int n : levels) {
    Mesh mesh = build_cube_mesh(n);
    SpacePair pair = build_spaces(mesh, kind);
    rows.push_back({n, pair.velocity.n_free(), long(pair.pressure.n())});
  }
  return rows;
}

int center_vertex(const Mesh& mesh) {
  int best = -1;
  double best_d = 1e300;
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    if (mesh.vertex_on_boundary[v]) continue;
    double d = (mesh.vertices[v] - Vec3(0.5, 0.5, 0.5)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  if (best < 0) throw std::invalid_argument("mesh has no interior vertex");
  return best;
}

// ---------------------------------------------------------------------------
// orchestration

namespace {

std::vector<int> levels_or(const RunConfig& config, std::vector<int> defaults, int cap = 0) {
  std::vector<int> lv = config.levels.empty() ? defaults : config.levels;
  if (cap > 0) {
    std::vector<int> out;
    for (int n : lv)
      if (n <= cap) out.push_back(n);
    if (!out.empty()) lv = out;
  }
  return lv;
}

void run_certify(std::vector<CheckRow>& rows) {
  for (const auto& r : certify_element_report())
    rows.push_back({"certify", "-", 0, r.name, r.expected, r.computed, r.pass});
}

void run_infsup(const RunConfig& config, std::vector<CheckRow>& rows) {
  for (ElementKind kind : config.pairs) {
    std::vector<int> levels = levels_or(config, {1, 2, 3}, 3);
    double bmin = 1e300, bmax = 0.0;
    for (int n : levels) {
      Mesh mesh = build_cube_mesh(n);
      InfSupResult r = infsup_constant(mesh, kind, canonical_pressure_degree(kind));
      bmin = std::min(bmin, r.beta);
      bmax = std::max(bmax, r.beta);
      rows.push_back({"infsup", element_name(kind), n, "beta_h", ">1e-8", r.beta, r.beta > 1e-8});
      rows.push_back({"infsup", element_name(kind), n, "eig_residual", "<=1e-8", r.eig_residual,
                      r.eig_residual <= 1e-8});
    }
    double ratio = bmax > 0.0 ? bmin / bmax : 0.0;
    rows.push_back({"infsup", element_name(kind), 0, "beta_min_over_max", ">=0.5", ratio,
                    ratio >= 0.5});
  }
  // discriminative control: order-two velocity against a discontinuous
  // pressure of the same total degree as the shape space
  Mesh mesh = build_cube_mesh(1);
  InfSupResult r = infsup_constant(mesh, ElementKind::NC2, 3);
  rows.push_back({"infsup", "nc2/q3-control", 1, "beta_h", "<1e-8", r.beta, r.beta < 1e-8});
}

void run_macro(const RunConfig& config, std::vector<CheckRow>& rows) {
  Mesh mesh = build_cube_mesh(2);
  int vertex = center_vertex(mesh);
  for (ElementKind kind : config.pairs) {
    int nullity = macro_nullspace_dim(mesh, kind, canonical_pressure_degree(kind), vertex, true);
    rows.push_back({"macro", element_name(kind), 2, "nullspace_dim", "0", double(nullity),
                    nullity == 0});
    if (nullity != 0) {
      // triage: null pressures must take equal values at opposite edge midpoints
      double diag =
          macro_midedge_mismatch(mesh, kind, canonical_pressure_degree(kind), vertex, true);
      rows.push_back({"macro", element_name(kind), 2, "midedge_mismatch_diagnostic", "<=1e-8",
                      diag, diag <= 1e-8});
    }
  }
  int control = macro_nullspace_dim(mesh, ElementKind::NC3R, 2, vertex, false);
  rows.push_back({"macro", "nc3r-no-meanzero", 2, "nullspace_dim", "1", double(control),
                  control == 1});
}

void run_korn(const RunConfig& config, std::vector<CheckRow>& rows) {
  for (ElementKind kind : config.pairs) {
    std::vector<int> levels = levels_or(config, {1, 2, 3}, 3);
    double lmin = 1e300, lmax = 0.0;
    for (int n : levels) {
      Mesh mesh = build_cube_mesh(n);
      double l = korn_coercivity(mesh, kind);
      lmin = std::min(lmin, l);
      lmax = std::max(lmax, l);
      rows.push_back({"korn", element_name(kind), n, "lambda_min", ">0", l, l > 1e-8});
    }
    double ratio = lmax > 0.0 ? lmin / lmax : 0.0;
    rows.push_back({"korn", element_name(kind), 0, "lambda_min_over_max", ">=0.5", ratio,
                    ratio >= 0.5});
  }
  // control: no Dirichlet part leaves the rigid rotations in the kernel
  Mesh mesh = build_cube_mesh(
      1, [](const Vec3&) { return false; }, [](const Vec3&) { return true; });
  double l = korn_coercivity(mesh, ElementKind::NC2);
  rows.push_back({"korn", "nc2-no-dirichlet", 1, "lambda_min", "<1e-6", l, l < 1e-6});
}

void run_divfree(const RunConfig& config, std::vector<CheckRow>& rows) {
  StokesSolution exact = experiment_solution(config.mu);
  SolverOptions options;
  options.mode = config.solver;
  const int n = 2;
  for (ElementKind kind : config.pairs) {
    Mesh mesh = build_cube_mesh(n);
    SpacePair pair = build_spaces(mesh, kind);
    SaddleSystem sys = assemble(mesh, pair, config.mu, exact.data(), config.threads);
    if (!config.dump_matrices.empty()) {
      std::filesystem::create_directories(config.dump_matrices);
      write_matrix_market(sys.A, config.dump_matrices + "/A_" + element_name(kind) + "_n" +
                                     std::to_string(n) + ".mtx");
      write_matrix_market(sys.B, config.dump_matrices + "/B_" + element_name(kind) + "_n" +
                                     std::to_string(n) + ".mtx");
    }
    SolveReport sol = solve(sys, options);
    DivFreeResult r = divfree_check(mesh, kind, pair, sys, sol);
    if (r.elementwise) {
      rows.push_back({"divfree", element_name(kind), n, "max_elementwise_div", "<=1e-9", r.value,
                      r.value <= 1e-9});
    } else {
      rows.push_back({"divfree", element_name(kind), n, "weak_residual", "<=1e-10", r.value,
                      r.value <= 1e-10});
      rows.push_back({"divfree", element_name(kind), n, "pointwise_div_info", "-", r.pointwise,
                      true});
    }
  }
}

void run_rates(const RunConfig& config, std::vector<CheckRow>& rows, std::ostream& log) {
  SolverOptions options;
  options.mode = config.solver;
  for (ElementKind kind : config.pairs) {
    const int k = element_order(kind);
    std::vector<int> levels = levels_or(config, k == 2 ? std::vector<int>{2, 3, 4}
                                                       : std::vector<int>{1, 2, 3});
    ConvergenceReport rep = convergence_study(kind, levels, config.mu, options, config.threads);
    // per-level error table
    std::string path = config.out_dir + "/rates_" + element_name(kind) + ".csv";
    std::ofstream out(path);
    out << "level,h,err_h1_u,err_l2_u,err_l2_p,rate_h1_u,rate_l2_u,rate_l2_p\n";
    for (size_t i = 0; i < rep.levels.size(); ++i) {
      const auto& L = rep.levels[i];
      out << L.level << "," << fmt(L.h) << "," << fmt(L.errors.h1_velocity) << ","
          << fmt(L.errors.l2_velocity) << "," << fmt(L.errors.l2_pressure);
      if (i == 0)
        out << ",,,\n";
      else
        out << "," << fmt(rep.rates[i - 1][0]) << "," << fmt(rep.rates[i - 1][1]) << ","
            << fmt(rep.rates[i - 1][2]) << "\n";
    }
    log << "wrote " << path << "\n";
    if (rep.rates.empty()) continue;
    const auto& last = rep.rates.back();
    const int lvl = rep.levels.back().level;
    auto expect = [&](const char* name, double rate, double target) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g+-0.3", target);
      rows.push_back({"rates", element_name(kind), lvl, name, buf, rate,
                      std::abs(rate - target) <= 0.3});
    };
    expect("rate_h1_velocity", last[0], k);
    expect("rate_l2_pressure", last[2], k);
    expect("rate_l2_velocity", last[1], k + 1);
  }
}

void run_census(const RunConfig& config, std::vector<CheckRow>& rows) {
  std::vector<int> levels = levels_or(config, {1, 2, 3});
  for (int n : levels) {
    for (ElementKind kind : config.pairs) {
      CensusRow measured = dof_census(kind, {n})[0];
      CensusRow formula = census_formula(kind, n);
      bool okv = measured.velocity == formula.velocity;
      bool okp = measured.pressure == formula.pressure;
      rows.push_back({"census", element_name(kind), n, "velocity_dofs",
                      std::to_string(formula.velocity), double(measured.velocity), okv});
      rows.push_back({"census", element_name(kind), n, "pressure_dofs",
                      std::to_string(formula.pressure), double(measured.pressure), okp});
    }
    // reduced strictly below full
    auto count = [&](ElementKind k) {
      CensusRow c = census_formula(k, n);
      return c.velocity + c.pressure;
    };
    bool r2 = count(ElementKind::NC2R) < count(ElementKind::NC2);
    bool r3 = count(ElementKind::NC3R) < count(ElementKind::NC3);
    rows.push_back({"census", "nc2r<nc2", n, "total_dofs_reduced_smaller", "1",
                    r2 ? 1.0 : 0.0, r2});
    rows.push_back({"census", "nc3r<nc3", n, "total_dofs_reduced_smaller", "1",
                    r3 ? 1.0 : 0.0, r3});
  }
}

}  // namespace

int run_checks(const RunConfig& config, std::ostream& log) {
  std::vector<CheckRow> rows;
  std::filesystem::create_directories(config.out_dir);
  auto has = [&](const char* name) {
    return std::find(config.checks.begin(), config.checks.end(), name) != config.checks.end();
  };
  // certification of the element tables comes first; solves depend on them
  if (has("certify")) run_certify(rows);
  if (has("census")) run_census(config, rows);
  if (has("infsup")) run_infsup(config, rows);
  if (has("macro")) run_macro(config, rows);
  if (has("korn")) run_korn(config, rows);
  if (has("divfree")) run_divfree(config, rows);
  if (has("rates")) run_rates(config, rows, log);

  std::string csv = to_csv(rows);
  std::string path = config.out_dir + "/report.csv";
  std::ofstream out(path);
  out << csv;
  int failures = 0;
  for (const auto& r : rows) {
    if (!r.pass) ++failures;
    log << (r.pass ? "pass" : "FAIL") << "  " << r.check << " " << r.pair << " n=" << r.level
        << " " << r.metric << " = " << fmt(r.computed) << " (expect " << r.expected << ")\n";
  }
  log << "report: " << path << " (" << rows.size() << " rows, " << failures << " failures)\n";
  return failures;
}

}  // namespace ncstokes
