#include "ivbounds/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ivbounds/errors.hpp"

namespace ivbounds {

nlohmann::json GradientCheck::to_json() const {
  return {{"max_rel_error", max_rel_error}, {"worst_index", worst_index}, {"checked", checked},
          {"excluded", excluded}, {"tolerance", tolerance}, {"margin", tolerance - max_rel_error},
          {"passed", passed}};
}

namespace {

// Sign pattern of every non-smooth locus: lhs - rhs and tau c - lambda.
Eigen::ArrayXi kink_pattern(const ConstraintLayout& lay, const ConstraintResiduals& r,
                            const LagrangianState& state) {
  const Eigen::Index n = r.c.size();
  Eigen::ArrayXi out(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = lay.lhs(i) - r.rhs(i) > 0.0 ? 1 : -1;
    out(n + i) = state.tau * r.c(i) - state.lambda(i) > 0.0 ? 1 : -1;
  }
  return out;
}

double min_kink_distance(const ConstraintLayout& lay, const ConstraintResiduals& r,
                         const LagrangianState& state) {
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < r.c.size(); ++i) {
    d = std::min(d, std::abs(lay.lhs(i) - r.rhs(i)));
    d = std::min(d, std::abs(state.tau * r.c(i) - state.lambda(i)));
  }
  return d;
}

}  // namespace

GradientCheck check_gradient(const Problem& problem, const EtaParams& eta, const LagrangianState& state,
                             const NoiseBatch& noise, double step, double tolerance, double floor,
                             const GradientTamper& tamper) {
  GradientCheck out;
  out.tolerance = tolerance;
  const int k = eta.k();
  const ConstraintLayout& lay = problem.layout();
  const Evaluation center = problem.evaluate(eta, noise, &state, true);
  Eigen::VectorXd grad = center.gradient;
  if (tamper) tamper(grad);
  const Eigen::ArrayXi base = kink_pattern(lay, center.residuals, state);
  const bool near_kink = min_kink_distance(lay, center.residuals, state) < 1e-6;

  const Eigen::VectorXd flat = eta.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd up = flat, down = flat;
    up(i) += step;
    down(i) -= step;
    const Evaluation ep = problem.evaluate(EtaParams::unflatten(k, up), noise, &state);
    const Evaluation em = problem.evaluate(EtaParams::unflatten(k, down), noise, &state);
    if (near_kink || (kink_pattern(lay, ep.residuals, state) != base).any() ||
        (kink_pattern(lay, em.residuals, state) != base).any()) {
      ++out.excluded;
      continue;
    }
    const double fd = (ep.lagrangian - em.lagrangian) / (2.0 * step);
    const double err = std::abs(grad(i) - fd) / std::max({std::abs(grad(i)), std::abs(fd), floor});
    ++out.checked;
    if (err > out.max_rel_error || out.worst_index < 0) {
      out.max_rel_error = std::max(out.max_rel_error, err);
      out.worst_index = static_cast<int>(i);
    }
  }
  out.passed = out.checked > 0 && out.max_rel_error < tolerance;
  return out;
}

void KsCheck::add(const KsResult& r) {
  ++tests;
  min_p_value = std::min(min_p_value, r.p_value);
  max_statistic = std::max(max_statistic, r.statistic);
  passed = passed && r.p_value > alpha;
}

nlohmann::json KsCheck::to_json() const {
  return {{"tests", tests}, {"min_p_value", min_p_value}, {"max_statistic", max_statistic},
          {"alpha", alpha}, {"margin", min_p_value - alpha}, {"passed", passed}};
}

KsCheck check_marginals(const EtaParams& eta, const Eigen::MatrixXd& x_hat, Rng& rng, double alpha) {
  KsCheck out;
  out.alpha = alpha;
  const Eigen::MatrixXd pooled = sample_theta_marginal(eta, x_hat, rng);
  const Eigen::VectorXd sigma = eta.sigma();
  for (int c = 0; c < eta.k(); ++c) {
    const Eigen::VectorXd col = pooled.col(c);
    out.add(ks_test_normal({col.data(), static_cast<std::size_t>(col.size())}, eta.mu(c), sigma(c)));
  }
  return out;
}

KsCheck check_bin_independence(const EtaParams& eta, const Eigen::VectorXd& row_a,
                               const Eigen::VectorXd& row_b, Rng& rng, double alpha) {
  KsCheck out;
  out.alpha = alpha;
  const CopulaSample a = sample_theta_given_bin(eta, row_a, rng);
  const CopulaSample b = sample_theta_given_bin(eta, row_b, rng);
  for (int c = 0; c < eta.k(); ++c) {
    const Eigen::VectorXd ca = a.theta.col(c), cb = b.theta.col(c);
    out.add(ks_test_two_sample({ca.data(), static_cast<std::size_t>(ca.size())},
                               {cb.data(), static_cast<std::size_t>(cb.size())}));
  }
  return out;
}

double correlation_diagonal_error(const EtaParams& eta) {
  const CorrelationFactor f = rescale_to_correlation(eta.chol);
  return (f.correlation.diagonal().array() - 1.0).abs().maxCoeff();
}

nlohmann::json ContinuityCheck::to_json() const {
  return {{"max_jump", max_jump}, {"tolerance", tolerance}, {"margin", tolerance - max_jump}, {"passed", passed}};
}

ContinuityCheck check_penalty_continuity(double lambda, double tau, int points) {
  if (!(tau > 0.0) || lambda < 0.0 || points < 3) throw ConfigError("continuity check: invalid inputs");
  const double pivot = lambda / tau;
  const double width = std::max(1.0, std::abs(pivot));
  const double h = 2.0 * width / (points - 1);
  ContinuityCheck out;
  double slope_bound = 0.0;
  double prev = penalty(pivot - width, lambda, tau);
  for (int i = 1; i < points; ++i) {
    const double c = pivot - width + i * h;
    const double v = penalty(c, lambda, tau);
    out.max_jump = std::max(out.max_jump, std::abs(v - prev));
    slope_bound = std::max(slope_bound, std::abs(penalty_slope(c, lambda, tau)));
    prev = v;
  }
  slope_bound = std::max(slope_bound, std::abs(penalty_slope(pivot - width, lambda, tau)));
  // A continuous piecewise-C1 function moves at most slope * h per cell.
  out.tolerance = slope_bound * h * (1.0 + 1e-9) + 1e-12;
  out.passed = out.max_jump <= out.tolerance;
  return out;
}

}  // namespace ivbounds
