#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include "ivbounds/stats.hpp"

namespace ivbounds {

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 20.0;

/// Parameters of the Gaussian-copula distribution over response coefficients.
///
/// `chol` is the (K+1) x (K+1) lower-triangular mixing factor. Coordinate 0
/// carries the Gaussianized treatment rank and coordinates 1..K the
/// coefficients. Its diagonal is fixed at one; only the strictly lower
/// entries are free, giving K(K+1)/2 + 2K free scalars in total.
struct EtaParams {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_var;
  Eigen::MatrixXd chol;

  int k() const { return static_cast<int>(mu.size()); }
  Eigen::VectorXd sigma() const { return (0.5 * log_var.array()).exp().matrix(); }

  static EtaParams standard(int k);
  static int free_count(int k) { return k * (k + 1) / 2 + 2 * k; }

  /// Layout: mu (K), log_var (K), then chol(a, b) for a = 1..K, b < a, row-major.
  Eigen::VectorXd flatten() const;
  static EtaParams unflatten(int k, const Eigen::VectorXd& flat);

  /// Throws ConfigError on shape mismatch, non-finite entries, or a
  /// non-unit diagonal / non-zero upper triangle.
  void validate() const;
  void clamp_log_var();

  nlohmann::json to_json() const;
  static EtaParams from_json(const nlohmann::json& j);
};

struct CorrelationFactor {
  Eigen::MatrixXd correlation;  // S = mixing * mixing^T, unit diagonal
  Eigen::MatrixXd mixing;       // rows of chol scaled to unit norm
  Eigen::VectorXd row_norms;
};

/// Rescales each row of a lower-triangular factor to unit norm so that the
/// induced covariance is a correlation matrix. A zero row throws ConfigError.
CorrelationFactor rescale_to_correlation(const Eigen::MatrixXd& chol);

/// Gradient with respect to chol (lower triangle, including the diagonal)
/// given the gradient with respect to the rescaled mixing factor.
Eigen::MatrixXd mixing_gradient_to_chol(const Eigen::MatrixXd& chol, const CorrelationFactor& factor,
                                        const Eigen::MatrixXd& d_mixing);

struct CopulaSample {
  Eigen::MatrixXd theta;       // B x K
  Eigen::VectorXd x_row;       // the frozen treatment samples, unchanged
  Eigen::MatrixXd base_noise;  // B x K standard normal draws
};

/// B x K standard normal draws.
Eigen::MatrixXd draw_base_noise(int batch, int k, Rng& rng);

/// Mixed Gaussian coordinates 1..K (B x K) for rank coordinate `ranks` (B)
/// and base noise (B x K).
Eigen::MatrixXd mix_gaussian(const CorrelationFactor& factor, const Eigen::VectorXd& ranks,
                             const Eigen::MatrixXd& noise);

/// theta = mu + sigma * mixed. Mapping the standard normal marginal through
/// Phi and then the N(mu, sigma^2) quantile is exactly this affine map.
Eigen::MatrixXd theta_from_mixed(const EtaParams& eta, const Eigen::MatrixXd& mixed);

/// Draws theta jointly with a bin's frozen x samples; draw j is paired with
/// the Gaussianized rank of x_hat_row[j].
CopulaSample sample_theta_given_bin(const EtaParams& eta, const Eigen::VectorXd& x_hat_row,
                                    const Eigen::MatrixXd& base_noise);
CopulaSample sample_theta_given_bin(const EtaParams& eta, const Eigen::VectorXd& x_hat_row, Rng& rng);

/// Pools per-bin draws over all rows of x_hat: (M * B) x K, bin-major.
Eigen::MatrixXd sample_theta_marginal(const EtaParams& eta, const Eigen::MatrixXd& x_hat, Rng& rng);

}  // namespace ivbounds
