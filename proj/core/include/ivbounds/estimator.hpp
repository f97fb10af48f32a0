#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ivbounds/preprocess.hpp"
#include "ivbounds/response.hpp"

namespace ivbounds {

enum class Sense { lower, upper };

std::string to_string(Sense sense);
Sense sense_from_string(const std::string& name);

/// Augmented-Lagrangian multipliers (one per constraint, same shape as the
/// constraint matrix) and temperature.
struct LagrangianState {
  Eigen::MatrixXd lambda;
  double tau = 0.1;
  Sense sense = Sense::lower;

  /// +1 when minimizing (lower bound), -1 when maximizing (upper bound).
  double sign() const { return sense == Sense::lower ? 1.0 : -1.0; }
};

struct ConstraintResiduals {
  Eigen::MatrixXd rhs;
  Eigen::MatrixXd c;  // b - |lhs - rhs|
  int violation_count = 0;

  /// max(0, -min c).
  double max_violation() const;
};

/// Mean of f_theta(x_star) over pooled draws (rows of theta_pool).
double objective(const ResponseBasis& basis, double x_star, const Eigen::MatrixXd& theta_pool);

/// RHS(m, l) = mean_j phi_l(f_{theta_j}(x_hat(m, j))), draw j of bin m paired
/// with column j of x_hat.
Eigen::MatrixXd rhs(const ResponseBasis& basis, const Eigen::MatrixXd& x_hat,
                    const MomentDictionary& dict, const std::vector<Eigen::MatrixXd>& per_bin_theta);

ConstraintResiduals constraints(const Eigen::MatrixXd& lhs_smoothed, const Eigen::MatrixXd& b,
                                const Eigen::MatrixXd& rhs);

/// Per-constraint augmented-Lagrangian term for inequality c >= 0:
/// -lambda c + tau c^2 / 2 while tau c <= lambda, else -lambda^2 / (2 tau).
double penalty(double c, double lambda, double tau);
/// d penalty / d c.
double penalty_slope(double c, double lambda, double tau);

/// sign * objective + sum of penalties.
double lagrangian(double objective_value, const ConstraintResiduals& residuals,
                  const LagrangianState& state);

}  // namespace ivbounds
