#include "ivbounds/smoothing.hpp"

#include <algorithm>
#include <cmath>

#include "ivbounds/errors.hpp"

namespace ivbounds {

Eigen::VectorXd natural_smoothing_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                         double lambda) {
  const Eigen::Index n = x.size();
  if (y.size() != n) throw ConfigError("natural_smoothing_spline: size mismatch");
  if (n < 3 || lambda <= 0.0) return y;

  const Eigen::VectorXd h = x.tail(n - 1) - x.head(n - 1);
  if ((h.array() <= 0.0).any()) throw ConfigError("natural_smoothing_spline: knots must increase");

  // Second-difference operator Q (n x n-2) and band matrix R (n-2 x n-2).
  const Eigen::Index m = n - 2;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, m);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    q(j, j) = 1.0 / h(j);
    q(j + 1, j) = -1.0 / h(j) - 1.0 / h(j + 1);
    q(j + 2, j) = 1.0 / h(j + 1);
    r(j, j) = (h(j) + h(j + 1)) / 3.0;
    if (j + 1 < m) {
      r(j, j + 1) = h(j + 1) / 6.0;
      r(j + 1, j) = h(j + 1) / 6.0;
    }
  }
  const Eigen::MatrixXd system = r + lambda * q.transpose() * q;
  const Eigen::VectorXd gamma = system.ldlt().solve(q.transpose() * y);
  return y - lambda * q * gamma;
}

Eigen::VectorXd polynomial_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int degree) {
  const Eigen::Index n = x.size();
  const double centre = x.mean();
  const double half_range = std::max(1e-12, (x.maxCoeff() - x.minCoeff()) / 2.0);
  Eigen::MatrixXd design(n, degree + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = (x(i) - centre) / half_range;
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      design(i, d) = p;
      p *= t;
    }
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(y);
  return design * coef;
}

Eigen::VectorXd smooth_series(const Eigen::VectorXd& y, double smoothing_factor) {
  const Eigen::Index n = y.size();
  if (n < 4) return y;
  if (smoothing_factor < 0.0) throw ConfigError("smooth_series: smoothing factor must be >= 0");
  if (smoothing_factor == 0.0) return y;

  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
  const Eigen::VectorXd cubic = polynomial_fit(x, y, 3);
  if ((cubic - y).squaredNorm() <= smoothing_factor) return cubic;

  const auto rss = [&](double log_lambda) {
    return (natural_smoothing_spline(x, y, std::exp(log_lambda)) - y).squaredNorm();
  };
  // rss is increasing in lambda, from 0 (interpolation) towards the residual
  // of the straight-line fit, which exceeds the cubic's and hence the budget.
  double lo = std::log(1e-10);
  double hi = std::log(1e12);
  if (rss(hi) <= smoothing_factor) return natural_smoothing_spline(x, y, std::exp(hi));
  for (int it = 0; it < 100 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rss(mid) > smoothing_factor) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return natural_smoothing_spline(x, y, std::exp(lo));
}

}  // namespace ivbounds
