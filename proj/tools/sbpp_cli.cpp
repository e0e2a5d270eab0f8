// sbpp_cli: runs one experiment described by a key=value config file.
//
// Exit status: 0 all runs converged, 2 partial (some flag set),
// 1 usage, config or I/O error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sbpp/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Nehari-manifold solver for the Schrodinger-Bopp-Podolsky-Proca system on 3-tori"};
  std::string config_path, mode, out;
  std::optional<double> eps, p, tol;
  std::optional<int> grid, parallel, max_iter;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "key=value config file")->required();
  app.add_option("--mode", mode, "override mode (ground, photography, cone, constant, sweep, audit)");
  app.add_option("--eps", eps, "override model.eps");
  app.add_option("--p", p, "override model.p");
  app.add_option("--grid", grid, "override torus.N on every axis");
  app.add_option("--out", out, "override output.dir");
  app.add_option("--seed", seed, "override seed");
  app.add_option("--parallel", parallel, "worker threads for independent runs");
  app.add_option("--tol", tol, "override solver.tol");
  app.add_option("--max-iter", max_iter, "override solver.max_iter");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    std::ifstream is(config_path);
    if (!is) throw sbpp::InputError("cannot open config: " + config_path);
    std::stringstream buf;
    buf << is.rdbuf();
    sbpp::ExperimentConfig cfg = sbpp::validate_config(buf.str());
    if (!mode.empty()) cfg.mode = sbpp::parse_mode(mode);
    if (eps) cfg.model.eps = *eps;
    if (p) {
      if (!(*p > 4.0 && *p < 6.0)) throw sbpp::InputError("--p: must lie in the open interval (4,6)");
      cfg.model.p = *p;
    }
    if (grid) cfg.resolution = {*grid, *grid, *grid};
    if (!out.empty()) cfg.output_dir = out;
    if (seed) cfg.seed = *seed;
    if (parallel) cfg.parallel = *parallel;
    if (tol) cfg.tol = *tol;
    if (max_iter) cfg.max_iter = *max_iter;
    cfg.validate();

    const sbpp::RunReport rep = sbpp::run_experiment(cfg);
    std::cout << rep.text;
    std::cerr << "report written to " << (rep.directory / "report.txt").string() << "\n";
    return rep.exit_code();
  } catch (const sbpp::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
