#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncstokes/error.hpp"
#include "ncstokes/verify.hpp"

namespace {

const std::vector<std::string> kKnownChecks = {"certify", "infsup", "macro", "korn",
                                               "divfree", "rates",  "census"};

int run(const std::string& pair, const std::vector<int>& levels, double mu,
        const std::vector<std::string>& checks, const std::string& out,
        const std::string& solver, int threads, const std::string& dump) {
  ncstokes::RunConfig config;
  if (pair != "all") {
    auto kind = ncstokes::parse_element(pair);
    if (!kind) {
      std::cerr << "unknown pair: " << pair << " (use nc2, nc3, nc2r, nc3r or all)\n";
      return 2;
    }
    config.pairs = {*kind};
  }
  for (int n : levels)
    if (n < 1) {
      std::cerr << "levels must be positive\n";
      return 2;
    }
  config.levels = levels;
  if (mu <= 0.0) {
    std::cerr << "mu must be positive\n";
    return 2;
  }
  config.mu = mu;
  if (!checks.empty()) {
    for (const auto& c : checks)
      if (std::find(kKnownChecks.begin(), kKnownChecks.end(), c) == kKnownChecks.end()) {
        std::cerr << "unknown check: " << c << "\n";
        return 2;
      }
    config.checks = checks;
  }
  config.out_dir = out;
  if (solver == "direct")
    config.solver = ncstokes::SolverMode::direct;
  else if (solver == "iter")
    config.solver = ncstokes::SolverMode::iterative;
  else {
    std::cerr << "unknown solver: " << solver << " (use direct or iter)\n";
    return 2;
  }
  if (threads < 1) {
    std::cerr << "threads must be positive\n";
    return 2;
  }
  config.threads = threads;
  config.dump_matrices = dump;
  try {
    int failures = ncstokes::run_checks(config, std::cout);
    return failures == 0 ? 0 : 1;
  } catch (const ncstokes::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonconforming tetrahedral Stokes elements: certification and convergence runs"};
  app.set_config("--config", "", "configuration file (key = value lines; flags override)");
  app.allow_config_extras(false);

  std::string pair = "all";
  std::vector<int> levels;
  double mu = 1.0;
  std::vector<std::string> checks;
  std::string out = "out";
  std::string solver = "direct";
  int threads = 1;
  std::string dump;

  app.add_option("--pair", pair, "element pair: nc2, nc3, nc2r, nc3r, or all")
      ->default_str("all");
  app.add_option("--levels", levels, "mesh levels (cells per edge), comma separated")
      ->delimiter(',');
  app.add_option("--mu", mu, "viscosity")->default_str("1");
  app.add_option("--checks", checks,
                 "checks to run: certify,infsup,macro,korn,divfree,rates,census")
      ->delimiter(',');
  app.add_option("--out", out, "output directory for CSV artifacts")->default_str("out");
  app.add_option("--solver", solver, "linear solver: direct or iter")->default_str("direct");
  app.add_option("--threads", threads, "assembly worker threads")->default_str("1");
  app.add_option("--dump-matrices", dump, "directory for Matrix Market dumps of A and B");

  CLI::App* certify = app.add_subcommand("certify", "run the element certification report only");
  certify->fallthrough();  // accept the main options after the subcommand

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (certify->parsed()) checks = {"certify"};
  return run(pair, levels, mu, checks, out, solver, threads, dump);
}
