#pragma once

#include <Eigen/Dense>

namespace ivbounds {

/// Natural cubic smoothing spline (Reinsch form) evaluated at its knots:
/// minimizes sum (g_i - y_i)^2 + lambda * integral g''^2.
Eigen::VectorXd natural_smoothing_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                         double lambda);

/// Least-squares polynomial of the given degree, evaluated at `x`.
Eigen::VectorXd polynomial_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int degree);

/// Smooths a series sampled at x = 1..n under a residual budget:
/// the returned values g satisfy sum (g_i - y_i)^2 <= smoothing_factor.
///
/// A single cubic is tried first and kept when it fits within budget, so
/// polynomials up to degree three pass through unchanged. Otherwise a
/// natural smoothing spline is used whose penalty is chosen so the residual
/// sum of squares equals the budget. Fewer than four points pass through.
Eigen::VectorXd smooth_series(const Eigen::VectorXd& y, double smoothing_factor);

}  // namespace ivbounds
