#pragma once

#include <functional>

#include <Eigen/Dense>
#include <json.hpp>

#include "ivbounds/copula.hpp"
#include "ivbounds/estimator.hpp"
#include "ivbounds/problem.hpp"

namespace ivbounds {

/// Test hook applied to the analytic gradient before comparison.
using GradientTamper = std::function<void(Eigen::VectorXd&)>;

struct GradientCheck {
  double max_rel_error = 0.0;
  int worst_index = -1;
  int checked = 0;
  /// Parameters whose stencil straddles a kink of |lhs - rhs| or the
  /// penalty branch point.
  int excluded = 0;
  double tolerance = 0.0;
  bool passed = false;

  nlohmann::json to_json() const;
};

/// Central differences of the Lagrangian under pinned noise against
/// grad_lagrangian. Error per entry is |g - fd| / max(|g|, |fd|, floor).
GradientCheck check_gradient(const Problem& problem, const EtaParams& eta, const LagrangianState& state,
                             const NoiseBatch& noise, double step = 1e-5, double tolerance = 1e-4,
                             double floor = 1e-6, const GradientTamper& tamper = {});

struct KsCheck {
  double min_p_value = 1.0;
  double max_statistic = 0.0;
  int tests = 0;
  double alpha = 0.01;
  bool passed = true;

  void add(const KsResult& r);
  nlohmann::json to_json() const;
};

/// One-sample KS of every pooled theta_k against N(mu_k, sigma_k^2).
KsCheck check_marginals(const EtaParams& eta, const Eigen::MatrixXd& x_hat, Rng& rng, double alpha = 0.01);

/// Two-sample KS of theta_k between two bins' draws.
KsCheck check_bin_independence(const EtaParams& eta, const Eigen::VectorXd& row_a,
                               const Eigen::VectorXd& row_b, Rng& rng, double alpha = 0.01);

/// max |diag(S) - 1| of the rescaled correlation matrix.
double correlation_diagonal_error(const EtaParams& eta);

struct ContinuityCheck {
  double max_jump = 0.0;
  double tolerance = 0.0;
  bool passed = false;

  nlohmann::json to_json() const;
};

/// Scans the per-constraint penalty on a dense c-grid straddling tau c = lambda
/// and reports the largest jump relative to the grid's Lipschitz bound.
ContinuityCheck check_penalty_continuity(double lambda, double tau, int points = 20001);

}  // namespace ivbounds
