// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <boost/random/uniform_real_distribution.hpp>

#include "ivbounds/baselines.hpp"
#include "ivbounds/diagnostics.hpp"
#include "ivbounds/errors.hpp"
#include "ivbounds/solver.hpp"

namespace ivbounds {
namespace {

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct PointBounds {
  const BoundResult* lower = nullptr;
  const BoundResult* upper = nullptr;

  bool both_feasible() const { return lower && upper && lower->ok() && upper->ok() && lower->feasible && upper->feasible; }
  bool any_infeasible() const { return !lower || !upper || !lower->ok() || !upper->ok() || !lower->feasible || !upper->feasible; }
};

// x* -> bounds at one tolerance level.
std::map<double, PointBounds> at_level(const std::vector<BoundResult>& results, double eps_rel) {
  std::map<double, PointBounds> out;
  for (const auto& r : results) {
    if (r.eps_rel != eps_rel) continue;
    (r.sense == Sense::lower ? out[r.x_star].lower : out[r.x_star].upper) = &r;
  }
  return out;
}

Dataset synthetic(Design design, double alpha, double beta, std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.design = design;
  spec.alpha = alpha;
  spec.beta = beta;
  spec.n = n;
  spec.seed = seed;
  return generate(spec).dataset();
}

std::vector<BoundResult> run_sweep(const std::string& label, const SolverConfig& config, const Dataset& data,
                                   const ResponseBasis& basis) {
  const auto start = std::chrono::steady_clock::now();
  auto results = sweep(config, data, basis, workers());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  int feasible = 0, aborted = 0;
  for (const auto& r : results) {
    feasible += r.ok() && r.feasible;
    aborted += !r.ok();
  }
  std::printf("  sweep %-28s %3zu solves, %3d feasible, %d aborted, %.0f s\n", label.c_str(), results.size(), feasible,
              aborted, secs);
  std::fflush(stdout);
  return results;
}

void print_points(const std::map<double, PointBounds>& points, Design design, double std_y) {
  for (const auto& [x, p] : points) {
    const auto show = [](const BoundResult* r) {
      if (!r || !r->ok()) return std::string("   aborted");
      char buf[64];
      std::snprintf(buf, sizeof buf, "%9.3f%s (viol %.3f)", r->bound, r->feasible ? " " : "*", r->max_violation);
      return std::string(buf);
    };
    std::printf("    x*=%7.3f truth=%7.3f  lower %s  upper %s  std_y=%.3f\n", x, true_effect(design, x),
                show(p.lower).c_str(), show(p.upper).c_str(), std_y);
  }
}

// Shared by the linear-Gaussian bracketing and tolerance-monotonicity checks.
struct LinearStrongRun {
  Dataset data = synthetic(Design::linear_gaussian, 3.0, 0.5, 5000, 1);
  ResponseBasis basis = polynomial_basis(2);
  std::vector<BoundResult> results;

  LinearStrongRun() {
    SolverConfig c;
    c.eps_rel_schedule = {0.3, 0.05};
    c.seed = 1;
    results = run_sweep("linear-gaussian strong", c, data, basis);
  }
};

Outcome bracketing(const std::vector<BoundResult>& results, double eps_rel, Design design, double std_y, double slack,
                   double max_gap) {
  const auto points = at_level(results, eps_rel);
  print_points(points, design, std_y);
  int feasible_bounds = 0, violations = 0, gaps = 0, wide = 0;
  double worst_gap = 0.0;
  for (const auto& [x, p] : points) {
    const double truth = true_effect(design, x);
    if (p.lower && p.lower->ok() && p.lower->feasible) {
      ++feasible_bounds;
      violations += p.lower->bound > truth + slack * std_y;
    }
    if (p.upper && p.upper->ok() && p.upper->feasible) {
      ++feasible_bounds;
      violations += p.upper->bound < truth - slack * std_y;
    }
    if (p.both_feasible()) {
      ++gaps;
      const double gap = (p.upper->bound - p.lower->bound) / std_y;
      worst_gap = std::max(worst_gap, gap);
      wide += !(gap < max_gap);
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%d feasible bounds, %d outside truth +/- %.2f std_y; %d points with both bounds, widest gap %.3f std_y "
                "(limit %.2f)",
                feasible_bounds, violations, slack, gaps, worst_gap, max_gap);
  return {feasible_bounds > 0 && violations == 0 && wide == 0, buf};
}

Outcome criterion_1(const LinearStrongRun& run) {
  return bracketing(run.results, 0.05, Design::linear_gaussian, run.data.y_stats.std, 0.15, 1.5);
}

Outcome criterion_2() {
  const Dataset data = synthetic(Design::nonadditive, 3.0, 0.5, 5000, 1);
  SolverConfig c;
  c.eps_rel_schedule = {0.05};
  c.seed = 1;
  const ResponseBasis quadratic = polynomial_basis(3);
  const ResponseBasis linear = polynomial_basis(2);
  const auto quad_results = run_sweep("nonadditive quadratic", c, data, quadratic);
  const auto quad = at_level(quad_results, 0.05);
  print_points(quad, Design::nonadditive, data.y_stats.std);
  const auto lin_results = run_sweep("nonadditive linear", c, data, linear);
  const auto lin = at_level(lin_results, 0.05);
  print_points(lin, Design::nonadditive, data.y_stats.std);

  int contained = 0, infeasible = 0;
  for (const auto& [x, p] : quad) {
    const double truth = true_effect(Design::nonadditive, x);
    contained += p.both_feasible() && p.lower->bound <= truth && truth <= p.upper->bound;
  }
  for (const auto& [x, p] : lin) infeasible += p.any_infeasible();
  char buf[200];
  std::snprintf(buf, sizeof buf, "quadratic basis contains truth at %d/%zu (need 13); linear basis infeasible at %d/%zu (need 5)",
                contained, quad.size(), infeasible, lin.size());
  return {contained >= 13 && infeasible >= 5, buf};
}

double mean_gap(const std::vector<BoundResult>& results, double eps_rel, int& points) {
  double sum = 0.0;
  points = 0;
  for (const auto& [x, p] : at_level(results, eps_rel)) {
    if (!p.lower || !p.upper || !p.lower->ok() || !p.upper->ok()) continue;
    sum += p.upper->bound - p.lower->bound;
    ++points;
  }
  return points > 0 ? sum / points : NAN;
}

Outcome criterion_3() {
  SolverConfig c;
  c.eps_rel_schedule = {0.05};
  c.seed = 1;
  constexpr int kMlpUnits = 7;
  double gaps[2];
  int counts[2];
  const std::pair<double, double> settings[2] = {{3.0, 0.5}, {0.5, 3.0}};
  for (int i = 0; i < 2; ++i) {
    const Dataset data = synthetic(Design::linear_gaussian, settings[i].first, settings[i].second, 5000, 1);
    const ResponseBasis basis = fit_mlp_basis(data, kMlpUnits, MlpFitConfig{}, derive_seed(1, 0xba515ULL));
    const auto results = run_sweep(i == 0 ? "mlp strong" : "mlp weak", c, data, basis);
    print_points(at_level(results, 0.05), Design::linear_gaussian, data.y_stats.std);
    gaps[i] = mean_gap(results, 0.05, counts[i]);
  }
  const double ratio = gaps[1] / gaps[0];
  char buf[200];
  std::snprintf(buf, sizeof buf, "mean gap strong %.3f (%d pts), weak %.3f (%d pts), ratio %.3f (need >= 1.5)", gaps[0],
                counts[0], gaps[1], counts[1], ratio);
  return {std::isfinite(ratio) && ratio >= 1.5, buf};
}

Outcome criterion_4() {
  std::string detail;
  bool ok = true;
  for (auto [alpha, beta] : {std::pair{3.0, 0.5}, std::pair{0.5, 3.0}}) {
    SyntheticSpec spec;
    spec.alpha = alpha;
    spec.beta = beta;
    spec.seed = 1;
    const auto d = generate(spec);
    char buf[128];
    try {
      const TwoSlsResult fit = two_stage_least_squares(d.z, d.x, d.y);
      ok = ok && std::abs(fit.slope - 1.0) <= 0.05;
      std::snprintf(buf, sizeof buf, "alpha=%.1f beta=%.1f slope %.4f (F %.0f); ", alpha, beta, fit.slope,
                    fit.first_stage_f);
    } catch (const Error& e) {
      ok = false;
      std::snprintf(buf, sizeof buf, "alpha=%.1f beta=%.1f error: %s; ", alpha, beta, e.what());
    }
    detail += buf;
  }
  return {ok, detail + "tolerance 0.05"};
}

Outcome criterion_5(const LinearStrongRun& run) {
  const auto loose = at_level(run.results, 0.3);
  const auto tight = at_level(run.results, 0.05);
  int compared = 0, broken = 0;
  double worst = -INFINITY;
  for (const auto& [x, t] : tight) {
    const PointBounds& l = loose.at(x);
    for (Sense sense : {Sense::lower, Sense::upper}) {
      const BoundResult* a = sense == Sense::lower ? l.lower : l.upper;
      const BoundResult* b = sense == Sense::lower ? t.lower : t.upper;
      if (!a || !b || !a->ok() || !b->ok() || !a->feasible || !b->feasible) continue;
      ++compared;
      const double tol = 2.0 * std::hypot(a->mc_std_error, b->mc_std_error);
      // Positive excess means the looser level produced a tighter bound.
      const double excess = (sense == Sense::lower ? a->bound - b->bound : b->bound - a->bound) - tol;
      worst = std::max(worst, excess);
      broken += excess > 0.0;
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d mutually feasible bound pairs, %d not enclosed beyond 2 MC s.e. (worst excess %.4f)",
                compared, broken, compared > 0 ? worst : 0.0);
  return {compared > 0 && broken == 0, buf};
}

Outcome criterion_6() {
  const Dataset data = synthetic(Design::linear_gaussian, 3.0, 0.5, 2000, 7);
  Rng rng(606);
  boost::random::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  int checks = 0, failed = 0, excluded = 0, checked = 0;
  for (int k : {2, 3}) {
    const ResponseBasis basis = polynomial_basis(k);
    for (int m : {3, 5}) {
      const MomentDictionary dict{2};
      const ConstraintSet cs = build_constraint_set(data, make_z_grid(data, m), dict, 256, 0.2, 0.1);
      const auto layout =
          std::make_shared<const ConstraintLayout>(marginal_layout(cs.lhs_smoothed, cs.b, cs.x_hat, basis, dict));
      for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd flat(EtaParams::free_count(k));
        fill_standard_normal(rng, {flat.data(), static_cast<std::size_t>(flat.size())});
        const EtaParams eta = EtaParams::unflatten(k, 0.5 * flat);
        const Problem problem(layout, basis, 2.0 * unit(rng) - 1.0);
        LagrangianState state;
        state.lambda = Eigen::MatrixXd(layout->lhs.rows(), layout->lhs.cols());
        for (auto& v : state.lambda.reshaped()) v = unit(rng);
        state.tau = 0.1 + 9.9 * unit(rng);
        state.sense = t % 2 == 0 ? Sense::lower : Sense::upper;
        const GradientCheck g = check_gradient(problem, eta, state, problem.draw_noise(rng));
        ++checks;
        failed += !g.passed;
        excluded += g.excluded;
        checked += g.checked;
        worst = std::max(worst, g.max_rel_error);
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d eta draws, %d entries compared (%d straddling a kink skipped), max rel error %.2e (limit 1e-4)",
                checks, checked, excluded, worst);
  return {failed == 0, buf};
}

Outcome criterion_7() {
  Rng rng(707);
  constexpr int kEtas = 10, kK = 3, kDraws = 10000;
  Eigen::MatrixXd x_hat(4, kDraws / 4);
  for (int m = 0; m < 4; ++m)
    for (int j = 0; j < x_hat.cols(); ++j) x_hat(m, j) = (m - 1.5) + std::sin(0.37 * j);
  Eigen::VectorXd row_a(kDraws), row_b(kDraws);
  for (int j = 0; j < kDraws; ++j) {
    row_a(j) = -3.0 + 0.1 * std::cos(j);
    row_b(j) = 4.0 + std::exp(std::sin(0.01 * j));
  }
  KsCheck marginals, bins;
  double diag = 0.0;
  bool preserved = true;
  for (int t = 0; t < kEtas; ++t) {
    Eigen::VectorXd flat(EtaParams::free_count(kK));
    fill_standard_normal(rng, {flat.data(), static_cast<std::size_t>(flat.size())});
    const EtaParams eta = EtaParams::unflatten(kK, 0.8 * flat);
    const KsCheck m = check_marginals(eta, x_hat, rng);
    const KsCheck b = check_bin_independence(eta, row_a, row_b, rng);
    marginals.tests += m.tests;
    marginals.min_p_value = std::min(marginals.min_p_value, m.min_p_value);
    marginals.passed = marginals.passed && m.passed;
    bins.tests += b.tests;
    bins.min_p_value = std::min(bins.min_p_value, b.min_p_value);
    bins.passed = bins.passed && b.passed;
    diag = std::max(diag, correlation_diagonal_error(eta));
    preserved = preserved && sample_theta_given_bin(eta, row_b, rng).x_row == row_b;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "marginal KS %d tests min p %.4f; cross-bin KS %d tests min p %.4f (alpha 0.01); max |diag-1| %.1e; "
                "x rows preserved: %s",
                marginals.tests, marginals.min_p_value, bins.tests, bins.min_p_value, diag, preserved ? "yes" : "no");
  return {marginals.passed && bins.passed && diag <= 1e-12 && preserved, buf};
}

Outcome criterion_8() {
  std::vector<std::string> failures;
  const auto expect = [&](bool ok, const char* what) {
    if (!ok) failures.push_back(what);
  };
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  const auto state = [](double lambda, double tau) {
    LagrangianState s;
    s.lambda = Eigen::MatrixXd::Constant(1, 1, lambda);
    s.tau = tau;
    return s;
  };
  const auto residual = [](double c) {
    ConstraintResiduals r;
    r.c = Eigen::MatrixXd::Constant(1, 1, c);
    return r;
  };
  expect(near(update_multipliers(state(1.0, 2.0), residual(0.2), 1.08, 10.0).lambda(0, 0), 0.6), "lambda 1 -> 0.6");
  expect(update_multipliers(state(0.1, 2.0), residual(5.0), 1.08, 10.0).lambda(0, 0) == 0.0, "lambda clamps at 0");
  expect(update_multipliers(state(0.0, 9.5), residual(0.0), 1.08, 10.0).tau == 10.0, "tau capped at 10");
  expect(near(penalty(0.2, 1.0, 2.0), -0.16), "penalty branch 1");
  expect(near(penalty(5.0, 1.0, 2.0), -0.25), "penalty branch 2");
  expect(near(penalty(0.5, 1.0, 2.0), -0.25), "branches meet at lambda / tau");
  const double eps = 1e-9;
  expect(std::abs(penalty(0.5 - eps, 1.0, 2.0) - penalty(0.5 + eps, 1.0, 2.0)) < 1e-8, "no jump at switch");
  for (auto [lambda, tau] : {std::pair{1.0, 2.0}, std::pair{0.0, 0.1}, std::pair{4.0, 10.0}})
    expect(check_penalty_continuity(lambda, tau).passed, "dense-grid continuity");

  MomentumSgd sgd(0.01, 0.9, 2);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  const Eigen::Vector2d target(1.0, -2.0);
  optimize_subproblem(x, sgd, 1000, [&](const Eigen::VectorXd& p) { return Eigen::VectorXd(p - target); });
  expect((x - target).cwiseAbs().maxCoeff() < 1e-3, "sgd converges on quadratic");

  std::string detail = "multiplier update, temperature cap, penalty branches, continuity, sgd";
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

Outcome criterion_9() {
  const Dataset data = synthetic(Design::linear_gaussian, 3.0, 0.5, 500, 1);
  SolverConfig c;
  c.m_count = 6;
  c.eps_rel_schedule = {0.05};
  c.seed = 1;
  const ResponseBasis basis = polynomial_basis(2);
  const auto results = run_sweep("small data n=500 M=6", c, data, basis);
  const auto points = at_level(results, 0.05);
  int feasible = 0;
  for (const auto& [x, p] : points) feasible += p.both_feasible();
  Outcome bracket = bracketing(results, 0.05, Design::linear_gaussian, data.y_stats.std, 0.25, INFINITY);
  char buf[128];
  std::snprintf(buf, sizeof buf, "both bounds feasible at %d/%zu (need 10); ", feasible, points.size());
  return {feasible >= 10 && bracket.passed, buf + bracket.detail};
}

Outcome stand_in_sweep() {
  const Dataset data = synthetic(Design::linear_gaussian, 3.0, 0.5, 1650, 17);
  SolverConfig c;
  c.seed = 1;
  const ResponseBasis basis = polynomial_basis(2);
  const auto results = run_sweep("1650-row stand-in", c, data, basis);
  int aborted = 0;
  for (const auto& r : results) aborted += !r.ok();
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu results (expect 120), %d aborted", results.size(), aborted);
  return {results.size() == 120 && aborted == 0, buf};
}

}  // namespace
}  // namespace ivbounds

int main() {
  using namespace ivbounds;
  std::map<std::string, Outcome> outcomes;
  const auto report = [&](const std::string& name, const std::function<Outcome()>& run) {
    std::printf("[%s] running\n", name.c_str());
    std::fflush(stdout);
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("  -> %s\n", o.passed ? "pass" : "fail");
    std::fflush(stdout);
    outcomes[name] = o;
  };

  report("4 2sls recovery", criterion_4);
  report("6 gradient suite", criterion_6);
  report("7 copula suite", criterion_7);
  report("8 lagrangian micro", criterion_8);
  {
    const LinearStrongRun linear;
    report("1 linear bracketing", [&] { return criterion_1(linear); });
    report("5 tolerance monotone", [&] { return criterion_5(linear); });
  }
  report("2 nonadditive", criterion_2);
  report("3 weak looseness", criterion_3);
  report("9 small data", criterion_9);
  report("x stand-in sweep", stand_in_sweep);

  int failed = 0;
  std::printf("\n");
  for (const auto& [name, o] : outcomes) {
    failed += !o.passed;
    std::printf("%s [%s] %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  }
  std::printf("%d of %zu failed\n", failed, outcomes.size());
  return failed == 0 ? 0 : 1;
}
