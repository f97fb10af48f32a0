#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <CLI11.hpp>

#include "ivbounds/diagnostics.hpp"
#include "ivbounds/errors.hpp"

namespace ivbounds::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

nlohmann::json whitening_json(const Whitening& w) { return {{"mean", w.mean}, {"std", w.std}}; }

}  // namespace

ResponseBasis make_basis(const RunConfig& config, const Dataset& dataset) {
  if (!config.basis_file.empty()) {
    std::ifstream in(config.basis_file);
    if (!in) throw DataError("cannot open basis file '" + config.basis_file + "'");
    nlohmann::json j;
    try {
      in >> j;
      return ResponseBasis::from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("basis file '" + config.basis_file + "': " + e.what());
    }
  }
  const std::uint64_t seed = derive_seed(config.solver.seed, 0xba515ULL);
  switch (config.basis) {
    case BasisKind::polynomial:
      return polynomial_basis(config.k);
    case BasisKind::mlp:
      return fit_mlp_basis(dataset, config.k, MlpFitConfig{}, seed);
    case BasisKind::gp:
      return fit_gp_basis(dataset, config.k, GpFitConfig{}, seed);
  }
  throw ConfigError("unknown basis kind");
}

int cmd_generate(const GenerateOptions& options, std::ostream& log) {
  if (options.out.empty()) throw ConfigError("generate: --out is required");
  const SyntheticData data = generate(options.spec);
  write_csv(options.out, data.z, data.x, data.y);

  const std::vector<double> grid = options.x_star ? *options.x_star : default_x_star_grid(data.dataset());
  std::vector<double> truth;
  for (double x : grid) truth.push_back(true_effect(options.spec.design, x));
  fs::path truth_path = options.truth;
  if (truth_path.empty()) truth_path = fs::path(options.out).replace_extension(".truth.json");
  write_json(truth_path, {{"spec", options.spec.to_json()}, {"x_star", grid}, {"true_effect", truth}});
  log << "wrote " << data.z.size() << " rows to " << options.out << " and truth to " << truth_path.string()
      << '\n';
  return kOk;
}

int cmd_bounds(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Dataset dataset = load_csv(config.input, config.columns);
  const ResponseBasis basis = make_basis(config, dataset);
  const std::vector<double> grid = resolve_x_star_grid(dataset, config.solver);

  const fs::path dir(config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());

  write_json(dir / "basis.json", basis.to_json());
  write_json(dir / "config.json",
             {{"config", config.to_json()},
              {"resolved_x_star_grid", grid},
              {"n", dataset.size()},
              {"whitening",
               {{"z", whitening_json(dataset.z_stats)},
                {"x", whitening_json(dataset.x_stats)},
                {"y", whitening_json(dataset.y_stats)}}},
              {"basis", {{"kind", to_string(basis.kind())}, {"k", basis.k_count()}, {"provenance", basis.provenance()}}}});

  const std::size_t total = grid.size() * 2 * config.solver.eps_rel_schedule.size();
  std::size_t done = 0;
  const auto results = sweep(config.solver, dataset, basis, resolved_jobs(config.jobs), [&](const BoundResult& r) {
    ++done;
    log << "[" << done << "/" << total << "] x*=" << fmt(r.x_star) << ' ' << to_string(r.sense)
        << " eps_rel=" << r.eps_rel;
    if (r.ok()) {
      log << " bound=" << r.bound << (r.feasible ? "" : " (infeasible)") << '\n';
    } else {
      log << " aborted: " << r.error << '\n';
    }
  });

  std::ofstream csv(dir / "results.csv");
  std::ofstream trace(dir / "trace.jsonl");
  if (!csv || !trace) throw DataError("cannot write results into '" + dir.string() + "'");
  csv << "x_star,sense,eps_rel,bound,feasible,max_violation,mc_std_error\n";
  int aborted = 0;
  for (const auto& r : results) {
    csv << fmt(r.x_star) << ',' << to_string(r.sense) << ',' << fmt(r.eps_rel) << ',' << fmt(r.bound) << ','
        << (r.feasible ? "true" : "false") << ',' << fmt(r.max_violation) << ',' << fmt(r.mc_std_error) << '\n';
    trace << r.to_json().dump() << '\n';
    if (!r.ok()) ++aborted;
  }
  if (!csv || !trace) throw DataError("failed writing results into '" + dir.string() + "'");
  log << "wrote " << results.size() << " results to " << (dir / "results.csv").string() << '\n';
  if (aborted > 0) {
    log << aborted << " solve(s) aborted; see trace.jsonl\n";
    return kSolverAbort;
  }
  return kOk;
}

int cmd_baseline(const BaselineOptions& options, std::ostream& out, std::ostream& log) {
  if (options.input.empty()) throw ConfigError("baseline: --input is required");
  const Dataset dataset = load_csv(options.input, options.columns);
  const TwoSlsResult fit = two_stage_least_squares(dataset);
  nlohmann::json report = {{"method", "2sls"}, {"n", dataset.size()}};
  report.update(fit.to_json());
  const std::vector<double> grid = options.x_star ? *options.x_star : default_x_star_grid(dataset);
  nlohmann::json effect = nlohmann::json::array();
  for (double x : grid) effect.push_back({{"x_star", x}, {"effect", fit.effect(x)}});
  report["effect"] = effect;
  if (!options.out.empty()) {
    write_json(options.out, report);
    log << "wrote " << options.out << '\n';
  }
  out << report.dump(2) << '\n';
  return kOk;
}

int cmd_check(const RunConfig& config, const CheckOptions& options, std::ostream& out, std::ostream& log) {
  config.validate();
  const SolverConfig& sc = config.solver;
  const Dataset dataset = load_csv(config.input, config.columns);
  const ResponseBasis basis = make_basis(config, dataset);
  const int k = basis.k_count();
  Rng rng(derive_seed(sc.seed, 0xc4ecULL));

  EtaParams eta = EtaParams::standard(k);
  if (options.eta == CheckEta::init) {
    eta = init_eta(basis, dataset.x, sc.seed);
  } else if (options.eta == CheckEta::random) {
    boost::random::normal_distribution<double> normal(0.0, 0.5);
    Eigen::VectorXd flat(EtaParams::free_count(k));
    for (auto& v : flat) v = normal(rng);
    eta = EtaParams::unflatten(k, flat);
  }

  const ZGrid z_grid = make_z_grid(dataset, sc.m_count);
  const Eigen::MatrixXd x_hat = freeze_x_samples(dataset, z_grid, sc.batch);
  nlohmann::json checks = nlohmann::json::object();
  bool all = true;
  auto record = [&](const std::string& name, nlohmann::json j) {
    all = all && j.at("passed").get<bool>();
    checks[name] = std::move(j);
  };

  record("marginal_ks", check_marginals(eta, x_hat, rng).to_json());
  record("bin_independence_ks",
         check_bin_independence(eta, x_hat.row(0).transpose(), x_hat.row(x_hat.rows() - 1).transpose(), rng)
             .to_json());
  const double diag_err = correlation_diagonal_error(eta);
  record("correlation_diagonal",
         {{"max_error", diag_err}, {"tolerance", 1e-12}, {"margin", 1e-12 - diag_err}, {"passed", diag_err <= 1e-12}});
  const Eigen::VectorXd row = x_hat.row(0).transpose();
  const CopulaSample sample = sample_theta_given_bin(eta, row, rng);
  record("x_row_preserved", {{"passed", sample.x_row == row}});

  const ProblemSetup setup = prepare_problem(dataset, basis, sc);
  const auto layout = setup.layouts.back();
  const Problem problem(layout, basis, 0.0);
  LagrangianState state;
  boost::random::uniform_real_distribution<double> unit(0.0, 1.0);
  state.lambda.resize(layout->lhs.rows(), layout->lhs.cols());
  for (auto& v : state.lambda.reshaped()) v = unit(rng);
  state.tau = 1.0;
  GradientTamper tamper;
  if (options.corrupt_gradient) tamper = [](Eigen::VectorXd& g) { g(0) += 0.1 * (std::abs(g(0)) + 1.0); };
  record("gradient_fd", check_gradient(problem, eta, state, problem.draw_noise(rng), 1e-5, 1e-4, 1e-6, tamper).to_json());

  nlohmann::json continuity = nlohmann::json::array();
  bool continuity_ok = true;
  for (auto [lambda, tau] : {std::pair{1.0, 2.0}, std::pair{0.5, 0.1}, std::pair{3.0, 10.0}}) {
    const ContinuityCheck c = check_penalty_continuity(lambda, tau);
    continuity_ok = continuity_ok && c.passed;
    nlohmann::json j = c.to_json();
    j["lambda"] = lambda;
    j["tau"] = tau;
    continuity.push_back(j);
  }
  record("penalty_continuity", {{"cases", continuity}, {"passed", continuity_ok}});

  const nlohmann::json report = {{"passed", all}, {"k", k}, {"basis", to_string(basis.kind())},
                                 {"eta", eta.to_json()}, {"checks", checks}};
  if (!options.report.empty()) {
    write_json(options.report, report);
    log << "wrote " << options.report << '\n';
  }
  out << report.dump(2) << '\n';
  log << (all ? "all checks passed\n" : "some checks failed\n");
  return kOk;
}

namespace {

// Binds optional flags that override config values only when given.
class Overrides {
 public:
  template <class T, class Set>
  void add(CLI::App* app, const std::string& name, const std::string& help, Set set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    appliers_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
  }
  void apply(RunConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

void add_run_flags(CLI::App* app, Overrides& o) {
  o.add<std::string>(app, "--input,-i", "input CSV", [](RunConfig& c, const std::string& v) { c.input = v; });
  o.add<std::string>(app, "--z-col", "instrument column", [](RunConfig& c, const std::string& v) { c.columns.z = v; });
  o.add<std::string>(app, "--x-col", "treatment column", [](RunConfig& c, const std::string& v) { c.columns.x = v; });
  o.add<std::string>(app, "--y-col", "outcome column", [](RunConfig& c, const std::string& v) { c.columns.y = v; });
  o.add<std::string>(app, "--basis", "polynomial | mlp | gp",
                     [](RunConfig& c, const std::string& v) { c.basis = basis_kind_from_string(v); });
  o.add<int>(app, "--k", "number of basis functions", [](RunConfig& c, int v) { c.k = v; });
  o.add<std::string>(app, "--basis-file", "reuse a serialized basis",
                     [](RunConfig& c, const std::string& v) { c.basis_file = v; });
  o.add<std::string>(app, "--out,-o", "output directory", [](RunConfig& c, const std::string& v) { c.out = v; });
  o.add<int>(app, "--jobs,-j", "sweep workers (0 = all cores)", [](RunConfig& c, int v) { c.jobs = v; });
  o.add<std::string>(app, "--mode", "marginal | joint",
                     [](RunConfig& c, const std::string& v) { c.solver.mode = constraint_mode_from_string(v); });
  o.add<int>(app, "--rounds", "outer rounds", [](RunConfig& c, int v) { c.solver.rounds = v; });
  o.add<int>(app, "--steps-per-round", "SGD steps per round", [](RunConfig& c, int v) { c.solver.steps_per_round = v; });
  o.add<double>(app, "--learning-rate", "SGD step size", [](RunConfig& c, double v) { c.solver.learning_rate = v; });
  o.add<double>(app, "--momentum", "SGD momentum", [](RunConfig& c, double v) { c.solver.momentum = v; });
  o.add<double>(app, "--tau0", "initial temperature", [](RunConfig& c, double v) { c.solver.tau0 = v; });
  o.add<double>(app, "--tau-growth", "temperature growth factor", [](RunConfig& c, double v) { c.solver.alpha = v; });
  o.add<double>(app, "--tau-max", "temperature cap", [](RunConfig& c, double v) { c.solver.tau_max = v; });
  o.add<double>(app, "--eps-abs", "absolute tolerance", [](RunConfig& c, double v) { c.solver.eps_abs = v; });
  o.add<std::vector<double>>(app, "--eps-rel", "relative tolerance schedule",
                             [](RunConfig& c, const std::vector<double>& v) { c.solver.eps_rel_schedule = v; });
  o.add<int>(app, "--batch", "draws per bin (B)", [](RunConfig& c, int v) { c.solver.batch = v; });
  o.add<int>(app, "--m", "z-grid size (M)", [](RunConfig& c, int v) { c.solver.m_count = v; });
  o.add<int>(app, "--dict-size", "number of raw moments", [](RunConfig& c, int v) { c.solver.dict_size = v; });
  o.add<double>(app, "--lhs-smoothing", "LHS smoothing budget (0 disables)",
                [](RunConfig& c, double v) { c.solver.lhs_smoothing = v; });
  o.add<std::vector<double>>(app, "--x-star", "intervention levels (original units)",
                             [](RunConfig& c, const std::vector<double>& v) { c.solver.x_star_grid = v; });
  o.add<double>(app, "--feasibility-threshold", "max violation for a feasible bound",
                [](RunConfig& c, double v) { c.solver.feasibility_threshold = v; });
  o.add<int>(app, "--verification-factor", "verification draw size in batches",
             [](RunConfig& c, int v) { c.solver.verification_factor = v; });
  o.add<int>(app, "--multiplier-batches", "batches averaged per multiplier update",
             [](RunConfig& c, int v) { c.solver.multiplier_batches = v; });
  o.add<double>(app, "--gradient-clip", "gradient norm clip (0 disables)",
                [](RunConfig& c, double v) { c.solver.gradient_clip = v; });
  o.add<int>(app, "--joint-grid", "joint-mode grid size per axis", [](RunConfig& c, int v) { c.solver.joint_grid = v; });
  o.add<int>(app, "--joint-min-count", "joint-mode minimum cell count",
             [](RunConfig& c, int v) { c.solver.joint_min_count = v; });
  o.add<std::uint64_t>(app, "--seed", "master seed", [](RunConfig& c, std::uint64_t v) { c.solver.seed = v; });
}

RunConfig resolve(const std::string& config_file, const Overrides& o) {
  RunConfig c;
  if (!config_file.empty()) c = RunConfig::from_file(config_file, c);
  o.apply(c);
  return c;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Bounds on E[Y | do(x)] in continuous instrumental-variable models"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::string design = "linear-gaussian";
  std::vector<double> gen_grid;
  auto* g = app.add_subcommand("generate", "write a synthetic dataset and its true effect");
  g->add_option("--design", design, "linear-gaussian | nonadditive")->capture_default_str();
  g->add_option("--alpha", gen.spec.alpha, "instrument strength")->capture_default_str();
  g->add_option("--beta", gen.spec.beta, "confounding strength")->capture_default_str();
  g->add_option("--n", gen.spec.n, "rows")->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "seed")->capture_default_str();
  g->add_option("--out,-o", gen.out, "CSV path")->required();
  g->add_option("--truth", gen.truth, "truth sidecar path");
  auto* gen_grid_opt = g->add_option("--x-star", gen_grid, "intervention levels for the sidecar");

  std::string bounds_config;
  Overrides bounds_flags;
  auto* b = app.add_subcommand("bounds", "sweep lower and upper bounds over x*");
  b->add_option("--config,-c", bounds_config, "JSON config file");
  add_run_flags(b, bounds_flags);

  BaselineOptions base;
  std::vector<double> base_grid;
  auto* bl = app.add_subcommand("baseline", "two-stage least squares");
  bl->add_option("--input,-i", base.input, "input CSV")->required();
  bl->add_option("--z-col", base.columns.z, "instrument column");
  bl->add_option("--x-col", base.columns.x, "treatment column");
  bl->add_option("--y-col", base.columns.y, "outcome column");
  bl->add_option("--out,-o", base.out, "JSON report path");
  auto* base_grid_opt = bl->add_option("--x-star", base_grid, "intervention levels");

  std::string check_config;
  Overrides check_flags;
  CheckOptions check;
  std::string check_eta = "identity";
  auto* ck = app.add_subcommand("check", "copula, gradient and penalty invariant checks");
  ck->add_option("--config,-c", check_config, "JSON config file");
  add_run_flags(ck, check_flags);
  ck->add_option("--eta", check_eta, "identity | init | random")->capture_default_str();
  ck->add_flag("--corrupt-gradient", check.corrupt_gradient, "perturb the analytic gradient (test hook)");
  ck->add_option("--report", check.report, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) {
      gen.spec.design = design_from_string(design);
      if (gen_grid_opt->count() > 0) gen.x_star = gen_grid;
      return cmd_generate(gen, std::cerr);
    }
    if (*b) return cmd_bounds(resolve(bounds_config, bounds_flags), std::cerr);
    if (*bl) {
      if (base_grid_opt->count() > 0) base.x_star = base_grid;
      return cmd_baseline(base, std::cout, std::cerr);
    }
    if (*ck) {
      if (check_eta == "identity") check.eta = CheckEta::identity;
      else if (check_eta == "init") check.eta = CheckEta::init;
      else if (check_eta == "random") check.eta = CheckEta::random;
      else throw ConfigError("unknown --eta '" + check_eta + "' (expected identity, init or random)");
      return cmd_check(resolve(check_config, check_flags), check, std::cout, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolverAbort;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverAbort;
  }
  return kUsage;
}

}  // namespace ivbounds::cli
