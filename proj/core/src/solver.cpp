#include "ivbounds/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/random/normal_distribution.hpp>

#include "ivbounds/errors.hpp"
#include "ivbounds/stats.hpp"

namespace ivbounds {

std::string to_string(ConstraintMode mode) { return mode == ConstraintMode::marginal ? "marginal" : "joint"; }

ConstraintMode constraint_mode_from_string(const std::string& name) {
  if (name == "marginal") return ConstraintMode::marginal;
  if (name == "joint") return ConstraintMode::joint;
  throw ConfigError("unknown constraint mode '" + name + "' (expected marginal or joint)");
}

std::vector<std::string> SolverConfig::problems() const {
  std::vector<std::string> out;
  if (rounds < 1) out.push_back("rounds must be >= 1");
  if (steps_per_round < 0) out.push_back("steps_per_round must be >= 0");
  if (!(learning_rate >= 0.0)) out.push_back("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) out.push_back("momentum must be in [0, 1)");
  if (!(tau0 > 0.0)) out.push_back("tau0 must be > 0");
  if (!(alpha > 1.0)) out.push_back("alpha must be > 1");
  if (!(tau_max >= tau0)) out.push_back("tau_max must be >= tau0");
  if (!(eps_abs > 0.0)) out.push_back("eps_abs must be > 0");
  if (eps_rel_schedule.empty()) out.push_back("eps_rel_schedule must not be empty");
  for (std::size_t i = 0; i < eps_rel_schedule.size(); ++i) {
    if (!(eps_rel_schedule[i] > 0.0)) out.push_back("eps_rel_schedule entries must be > 0");
    if (i > 0 && eps_rel_schedule[i] > eps_rel_schedule[i - 1]) {
      out.push_back("eps_rel_schedule must be non-increasing");
    }
  }
  if (batch < 2) out.push_back("batch must be >= 2");
  if (m_count < 1) out.push_back("m_count must be >= 1");
  if (dict_size < 1) out.push_back("dict_size must be >= 1");
  if (!(lhs_smoothing >= 0.0)) out.push_back("lhs_smoothing must be >= 0");
  if (!(feasibility_threshold >= 0.0)) out.push_back("feasibility_threshold must be >= 0");
  if (verification_factor < 1) out.push_back("verification_factor must be >= 1");
  if (multiplier_batches < 1) out.push_back("multiplier_batches must be >= 1");
  if (!(gradient_clip >= 0.0)) out.push_back("gradient_clip must be >= 0");
  if (x_star_grid) {
    for (double v : *x_star_grid) {
      if (!std::isfinite(v)) out.push_back("x_star_grid entries must be finite");
    }
  }
  if (joint_grid < 1) out.push_back("joint_grid must be >= 1");
  if (joint_min_count < 1) out.push_back("joint_min_count must be >= 1");
  if (joint_objective_groups < 1) out.push_back("joint_objective_groups must be >= 1");
  return out;
}

void SolverConfig::validate() const {
  const auto list = problems();
  if (list.empty()) return;
  std::ostringstream msg;
  msg << "invalid configuration:";
  for (const auto& p : list) msg << "\n  - " << p;
  throw ConfigError(msg.str());
}

nlohmann::json SolverConfig::to_json() const {
  nlohmann::json j = {
      {"rounds", rounds},
      {"steps_per_round", steps_per_round},
      {"learning_rate", learning_rate},
      {"momentum", momentum},
      {"tau0", tau0},
      {"alpha", alpha},
      {"tau_max", tau_max},
      {"eps_abs", eps_abs},
      {"eps_rel_schedule", eps_rel_schedule},
      {"batch", batch},
      {"m_count", m_count},
      {"dict_size", dict_size},
      {"lhs_smoothing", lhs_smoothing},
      {"feasibility_threshold", feasibility_threshold},
      {"verification_factor", verification_factor},
      {"multiplier_batches", multiplier_batches},
      {"gradient_clip", gradient_clip},
      {"seed", seed},
      {"mode", to_string(mode)},
      {"joint_grid", joint_grid},
      {"joint_min_count", joint_min_count},
      {"joint_objective_groups", joint_objective_groups},
  };
  j["x_star_grid"] = x_star_grid ? nlohmann::json(*x_star_grid) : nlohmann::json(nullptr);
  return j;
}

SolverConfig SolverConfig::from_json(const nlohmann::json& j, SolverConfig c) {
  if (!j.is_object()) throw ConfigError("solver config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "rounds") c.rounds = v.get<int>();
      else if (key == "steps_per_round") c.steps_per_round = v.get<int>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "momentum") c.momentum = v.get<double>();
      else if (key == "tau0") c.tau0 = v.get<double>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "tau_max") c.tau_max = v.get<double>();
      else if (key == "eps_abs") c.eps_abs = v.get<double>();
      else if (key == "eps_rel_schedule") c.eps_rel_schedule = v.get<std::vector<double>>();
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "m_count") c.m_count = v.get<int>();
      else if (key == "dict_size") c.dict_size = v.get<int>();
      else if (key == "lhs_smoothing") c.lhs_smoothing = v.get<double>();
      else if (key == "feasibility_threshold") c.feasibility_threshold = v.get<double>();
      else if (key == "verification_factor") c.verification_factor = v.get<int>();
      else if (key == "multiplier_batches") c.multiplier_batches = v.get<int>();
      else if (key == "gradient_clip") c.gradient_clip = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "mode") c.mode = constraint_mode_from_string(v.get<std::string>());
      else if (key == "joint_grid") c.joint_grid = v.get<int>();
      else if (key == "joint_min_count") c.joint_min_count = v.get<int>();
      else if (key == "joint_objective_groups") c.joint_objective_groups = v.get<int>();
      else if (key == "x_star_grid") {
        if (v.is_null()) c.x_star_grid.reset();
        else c.x_star_grid = v.get<std::vector<double>>();
      } else {
        throw ConfigError("unknown solver config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("solver config key '" + key + "': " + e.what());
    }
  }
  return c;
}

MomentumSgd::MomentumSgd(double learning_rate, double momentum, Eigen::Index size, double max_grad_norm)
    : lr_(learning_rate), momentum_(momentum), max_norm_(max_grad_norm), velocity_(Eigen::VectorXd::Zero(size)) {}

void MomentumSgd::step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient) {
  if (gradient.size() != velocity_.size() || params.size() != velocity_.size()) {
    throw ConfigError("sgd: parameter and gradient sizes differ from the optimizer's");
  }
  const double norm = gradient.norm();
  if (max_norm_ > 0.0 && norm > max_norm_) {
    velocity_ = momentum_ * velocity_ + (max_norm_ / norm) * gradient;
  } else {
    velocity_ = momentum_ * velocity_ + gradient;
  }
  params -= lr_ * velocity_;
}

void optimize_subproblem(Eigen::VectorXd& params, MomentumSgd& sgd, int steps, const GradientFn& gradient) {
  for (int s = 0; s < steps; ++s) sgd.step(params, gradient(params));
}

EtaParams optimize_subproblem(const EtaParams& eta, const Problem& problem,
                              const LagrangianState& state, MomentumSgd& sgd, int steps, Rng& rng) {
  const int k = eta.k();
  Eigen::VectorXd flat = eta.flatten();
  for (int s = 0; s < steps; ++s) {
    const EtaParams current = EtaParams::unflatten(k, flat);
    const NoiseBatch noise = problem.draw_noise(rng);
    sgd.step(flat, grad_lagrangian(current, problem, state, noise));
    flat.segment(k, k) = flat.segment(k, k).cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  }
  return EtaParams::unflatten(k, flat);
}

LagrangianState update_multipliers(const LagrangianState& state, const ConstraintResiduals& residuals,
                                   double alpha, double tau_max) {
  if (state.lambda.rows() != residuals.c.rows() || state.lambda.cols() != residuals.c.cols()) {
    throw ConfigError("update_multipliers: multiplier shape does not match constraints");
  }
  LagrangianState next = state;
  next.lambda = (state.lambda - state.tau * residuals.c).cwiseMax(0.0);
  next.tau = std::min(alpha * state.tau, tau_max);
  return next;
}

EtaParams init_eta(const ResponseBasis& basis, const std::vector<double>& x_points, std::uint64_t seed) {
  const int k = basis.k_count();
  EtaParams eta = EtaParams::standard(k);
  Rng rng(seed);
  boost::random::normal_distribution<double> lower(0.0, 0.05);
  for (int a = 1; a <= k; ++a)
    for (int b = 0; b < a; ++b) eta.chol(a, b) = lower(rng);
  if (basis.kind() != BasisKind::polynomial && !x_points.empty()) {
    const Eigen::MatrixXd psi = basis.evaluate_many(x_points);
    const Eigen::VectorXd ms = psi.colwise().squaredNorm().transpose() / static_cast<double>(psi.rows());
    const double live = std::max<double>(1.0, static_cast<double>((ms.array() >= 1e-12).count()));
    for (int i = 0; i < k; ++i) eta.log_var(i) = ms(i) < 1e-12 ? 0.0 : -std::log(live * ms(i));
    eta.clamp_log_var();
  }
  return eta;
}

nlohmann::json TraceRecord::to_json() const {
  return {{"round", round},       {"objective", objective}, {"lagrangian", lagrangian},
          {"max_violation", max_violation}, {"lambda_norm", lambda_norm}, {"tau", tau}};
}

nlohmann::json BoundResult::to_json() const {
  nlohmann::json trace_json = nlohmann::json::array();
  for (const auto& t : trace) trace_json.push_back(t.to_json());
  nlohmann::json j = {
      {"x_star", x_star},
      {"sense", to_string(sense)},
      {"eps_rel", eps_rel},
      {"bound", bound},
      {"mc_std_error", mc_std_error},
      {"feasible", feasible},
      {"max_violation", max_violation},
      {"violation_count", violation_count},
      {"seed", seed},
      {"trace", trace_json},
  };
  if (ok()) j["eta"] = eta.to_json();
  else j["error"] = error;
  return j;
}

std::shared_ptr<const ConstraintLayout> ProblemSetup::layout_for(double eps_rel) const {
  for (std::size_t i = 0; i < eps_levels.size(); ++i) {
    if (eps_levels[i] == eps_rel) return layouts[i];
  }
  throw ConfigError("no constraint layout prepared for eps_rel = " + std::to_string(eps_rel));
}

ProblemSetup prepare_problem(const Dataset& dataset, const ResponseBasis& basis, const SolverConfig& config) {
  config.validate();
  ProblemSetup setup;
  setup.dataset = &dataset;
  setup.basis = &basis;
  setup.dict.count = config.dict_size;
  for (double e : config.eps_rel_schedule) {
    if (std::find(setup.eps_levels.begin(), setup.eps_levels.end(), e) == setup.eps_levels.end()) {
      setup.eps_levels.push_back(e);
    }
  }
  setup.basis_x_points = dataset.x;

  if (config.mode == ConstraintMode::marginal) {
    setup.z_grid = make_z_grid(dataset, config.m_count);
    setup.constraint_set = build_constraint_set(dataset, *setup.z_grid, setup.dict, config.batch,
                                                config.eps_abs, setup.eps_levels.front(), config.lhs_smoothing);
    const ConstraintSet& cs = *setup.constraint_set;
    for (double e : setup.eps_levels) {
      const Eigen::MatrixXd b = compute_tolerances(cs.lhs_smoothed, config.eps_abs, e);
      setup.layouts.push_back(std::make_shared<const ConstraintLayout>(
          marginal_layout(cs.lhs_smoothed, b, cs.x_hat, basis, setup.dict)));
    }
  } else {
    setup.joint_grid = build_joint_constraints(dataset, config.joint_grid, config.joint_grid, setup.dict,
                                               config.joint_min_count);
    const JointGrid& grid = *setup.joint_grid;
    for (double e : setup.eps_levels) {
      const Eigen::MatrixXd b = compute_tolerances(grid.lhs, config.eps_abs, e);
      setup.layouts.push_back(std::make_shared<const ConstraintLayout>(
          joint_layout(grid, b, basis, setup.dict, config.batch, config.joint_objective_groups)));
    }
  }
  return setup;
}

namespace {

struct Verification {
  double objective = 0.0;
  double objective_se = 0.0;
  ConstraintResiduals residuals;
};

// Averages `repeats` independent evaluations, which equals one evaluation on
// a batch `repeats` times larger.
Verification verify(const Problem& problem, const EtaParams& eta, int repeats, Rng& rng) {
  const ConstraintLayout& lay = problem.layout();
  Eigen::MatrixXd rhs_sum = Eigen::MatrixXd::Zero(lay.lhs.rows(), lay.lhs.cols());
  Verification out;
  double se_sq = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const Evaluation ev = problem.evaluate(eta, problem.draw_noise(rng));
    out.objective += ev.objective;
    se_sq += ev.objective_se * ev.objective_se;
    rhs_sum += ev.residuals.rhs;
  }
  out.objective /= repeats;
  out.objective_se = std::sqrt(se_sq) / repeats;
  out.residuals = constraints(lay.lhs, lay.b, rhs_sum / repeats);
  return out;
}

}  // namespace

BoundResult solve_bound(const ProblemSetup& setup, double x_star, Sense sense, double eps_rel,
                        const SolverConfig& config, std::uint64_t seed) {
  if (setup.dataset == nullptr || setup.basis == nullptr) throw ConfigError("solve_bound: setup is incomplete");
  const Dataset& data = *setup.dataset;
  const Whitening& ys = data.y_stats;
  const Problem problem(setup.layout_for(eps_rel), *setup.basis, data.x_stats.apply(x_star));

  BoundResult result;
  result.x_star = x_star;
  result.sense = sense;
  result.eps_rel = eps_rel;
  result.seed = seed;

  EtaParams eta = init_eta(*setup.basis, setup.basis_x_points, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));
  LagrangianState state;
  state.lambda = Eigen::MatrixXd::Zero(problem.layout().lhs.rows(), problem.layout().lhs.cols());
  state.tau = config.tau0;
  state.sense = sense;
  MomentumSgd sgd(config.learning_rate, config.momentum, EtaParams::free_count(eta.k()), config.gradient_clip);

  for (int round = 0; round < config.rounds; ++round) {
    eta = optimize_subproblem(eta, problem, state, sgd, config.steps_per_round, rng);
    const Verification ev = verify(problem, eta, config.multiplier_batches, rng);
    const double lag = lagrangian(ev.objective, ev.residuals, state);
    if (!std::isfinite(lag)) {
      throw SolverError("non-finite Lagrangian in round " + std::to_string(round));
    }
    TraceRecord rec;
    rec.round = round;
    rec.objective = ys.invert(ev.objective);
    rec.lagrangian = lag;
    rec.max_violation = ev.residuals.max_violation();
    rec.tau = state.tau;
    state = update_multipliers(state, ev.residuals, config.alpha, config.tau_max);
    rec.lambda_norm = state.lambda.norm();
    result.trace.push_back(rec);
  }

  const Verification check = verify(problem, eta, config.verification_factor, rng);
  result.bound = ys.invert(check.objective);
  result.mc_std_error = check.objective_se * ys.std;
  result.max_violation = check.residuals.max_violation();
  result.violation_count = check.residuals.violation_count;
  result.feasible = result.max_violation <= config.feasibility_threshold;
  result.eta = eta;
  return result;
}

std::vector<double> default_x_star_grid(const Dataset& dataset) {
  const auto x = dataset.original_x();
  const EmpiricalCdf cdf(x);
  std::vector<double> grid;
  for (int i = 0; i < 15; ++i) grid.push_back(cdf.inverse(0.05 + 0.9 * i / 14.0));
  return grid;
}

std::vector<double> resolve_x_star_grid(const Dataset& dataset, const SolverConfig& config) {
  return config.x_star_grid ? *config.x_star_grid : default_x_star_grid(dataset);
}

std::vector<BoundResult> sweep(const SolverConfig& config, const Dataset& dataset,
                               const ResponseBasis& basis, int jobs, const ResultCallback& on_result) {
  const ProblemSetup setup = prepare_problem(dataset, basis, config);
  const std::vector<double> grid = resolve_x_star_grid(dataset, config);

  struct Task {
    std::size_t x_index;
    Sense sense;
    double eps;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (Sense s : {Sense::lower, Sense::upper})
      for (double e : config.eps_rel_schedule) tasks.push_back({i, s, e});

  std::vector<BoundResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex emit;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const Task& task = tasks[t];
      const std::uint64_t seed = derive_seed(config.seed, task.x_index);
      BoundResult r;
      try {
        r = solve_bound(setup, grid[task.x_index], task.sense, task.eps, config, seed);
      } catch (const Error& e) {
        r.x_star = grid[task.x_index];
        r.sense = task.sense;
        r.eps_rel = task.eps;
        r.seed = seed;
        r.bound = std::nan("");
        r.error = e.what();
      }
      results[t] = std::move(r);
      if (on_result) {
        std::lock_guard<std::mutex> lock(emit);
        on_result(results[t]);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::stable_sort(results.begin(), results.end(), [](const BoundResult& a, const BoundResult& b) {
    if (a.x_star != b.x_star) return a.x_star < b.x_star;
    if (a.sense != b.sense) return a.sense == Sense::lower;
    return a.eps_rel < b.eps_rel;
  });
  return results;
}

}  // namespace ivbounds
