#include "ivbounds/estimator.hpp"

#include <cmath>

#include "ivbounds/errors.hpp"

namespace ivbounds {

std::string to_string(Sense sense) { return sense == Sense::lower ? "lower" : "upper"; }

Sense sense_from_string(const std::string& name) {
  if (name == "lower") return Sense::lower;
  if (name == "upper") return Sense::upper;
  throw ConfigError("unknown bound sense '" + name + "' (expected lower or upper)");
}

double ConstraintResiduals::max_violation() const {
  if (c.size() == 0) return 0.0;
  return std::max(0.0, -c.minCoeff());
}

double objective(const ResponseBasis& basis, double x_star, const Eigen::MatrixXd& theta_pool) {
  if (theta_pool.rows() == 0) throw ConfigError("objective: no draws");
  return (theta_pool * basis.evaluate(x_star)).mean();
}

Eigen::MatrixXd rhs(const ResponseBasis& basis, const Eigen::MatrixXd& x_hat,
                    const MomentDictionary& dict, const std::vector<Eigen::MatrixXd>& per_bin_theta) {
  if (static_cast<Eigen::Index>(per_bin_theta.size()) != x_hat.rows()) {
    throw ConfigError("rhs: need one draw matrix per bin");
  }
  Eigen::MatrixXd out(x_hat.rows(), dict.count);
  std::vector<double> xs(static_cast<std::size_t>(x_hat.cols()));
  for (Eigen::Index m = 0; m < x_hat.rows(); ++m) {
    const auto& theta = per_bin_theta[m];
    if (theta.rows() != x_hat.cols()) throw ConfigError("rhs: draws must pair with x_hat columns");
    for (Eigen::Index j = 0; j < x_hat.cols(); ++j) xs[j] = x_hat(m, j);
    const Eigen::VectorXd f = theta.cwiseProduct(basis.evaluate_many(xs)).rowwise().sum();
    for (int l = 1; l <= dict.count; ++l) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < f.size(); ++j) acc += dict.value(l, f(j));
      out(m, l - 1) = acc / static_cast<double>(f.size());
    }
  }
  return out;
}

ConstraintResiduals constraints(const Eigen::MatrixXd& lhs_smoothed, const Eigen::MatrixXd& b,
                                const Eigen::MatrixXd& rhs) {
  if (lhs_smoothed.rows() != b.rows() || lhs_smoothed.cols() != b.cols() ||
      rhs.rows() != b.rows() || rhs.cols() != b.cols()) {
    throw ConfigError("constraints: shape mismatch");
  }
  ConstraintResiduals out;
  out.rhs = rhs;
  out.c = (b.array() - (lhs_smoothed - rhs).array().abs()).matrix();
  out.violation_count = static_cast<int>((out.c.array() < 0.0).count());
  return out;
}

double penalty(double c, double lambda, double tau) {
  if (tau * c <= lambda) return -lambda * c + 0.5 * tau * c * c;
  return -lambda * lambda / (2.0 * tau);
}

double penalty_slope(double c, double lambda, double tau) {
  return tau * c <= lambda ? -lambda + tau * c : 0.0;
}

double lagrangian(double objective_value, const ConstraintResiduals& residuals,
                  const LagrangianState& state) {
  if (state.lambda.rows() != residuals.c.rows() || state.lambda.cols() != residuals.c.cols()) {
    throw ConfigError("lagrangian: multiplier shape does not match constraints");
  }
  double total = state.sign() * objective_value;
  for (Eigen::Index i = 0; i < residuals.c.size(); ++i) {
    total += penalty(residuals.c(i), state.lambda(i), state.tau);
  }
  return total;
}

}  // namespace ivbounds
