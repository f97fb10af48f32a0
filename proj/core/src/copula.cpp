#include "ivbounds/copula.hpp"

#include <cmath>
#include <span>

#include "ivbounds/errors.hpp"

namespace ivbounds {

EtaParams EtaParams::standard(int k) {
  if (k < 1) throw ConfigError("eta: K must be >= 1");
  return {Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Identity(k + 1, k + 1)};
}

Eigen::VectorXd EtaParams::flatten() const {
  const int kk = k();
  Eigen::VectorXd flat(free_count(kk));
  flat.head(kk) = mu;
  flat.segment(kk, kk) = log_var;
  Eigen::Index i = 2 * kk;
  for (int a = 1; a <= kk; ++a)
    for (int b = 0; b < a; ++b) flat(i++) = chol(a, b);
  return flat;
}

EtaParams EtaParams::unflatten(int k, const Eigen::VectorXd& flat) {
  if (flat.size() != free_count(k)) throw ConfigError("eta: flat parameter vector has wrong length");
  EtaParams eta = standard(k);
  eta.mu = flat.head(k);
  eta.log_var = flat.segment(k, k);
  Eigen::Index i = 2 * k;
  for (int a = 1; a <= k; ++a)
    for (int b = 0; b < a; ++b) eta.chol(a, b) = flat(i++);
  return eta;
}

void EtaParams::validate() const {
  const int kk = k();
  if (kk < 1) throw ConfigError("eta: K must be >= 1");
  if (log_var.size() != kk || chol.rows() != kk + 1 || chol.cols() != kk + 1) {
    throw ConfigError("eta: inconsistent shapes");
  }
  if (!mu.allFinite() || !log_var.allFinite() || !chol.allFinite()) {
    throw ConfigError("eta: non-finite parameter");
  }
  for (int a = 0; a <= kk; ++a) {
    if (chol(a, a) != 1.0) throw ConfigError("eta: mixing factor must have a unit diagonal");
    for (int b = a + 1; b <= kk; ++b) {
      if (chol(a, b) != 0.0) throw ConfigError("eta: mixing factor must be lower-triangular");
    }
  }
}

void EtaParams::clamp_log_var() { log_var = log_var.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax); }

nlohmann::json EtaParams::to_json() const {
  nlohmann::json chol_rows = nlohmann::json::array();
  for (Eigen::Index a = 0; a < chol.rows(); ++a)
    for (Eigen::Index b = 0; b < chol.cols(); ++b) chol_rows.push_back(chol(a, b));
  return {
      {"k", k()},
      {"mu", std::vector<double>(mu.data(), mu.data() + mu.size())},
      {"log_var", std::vector<double>(log_var.data(), log_var.data() + log_var.size())},
      {"chol", chol_rows},
  };
}

EtaParams EtaParams::from_json(const nlohmann::json& j) {
  const int k = j.at("k").get<int>();
  EtaParams eta = standard(k);
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto lv = j.at("log_var").get<std::vector<double>>();
  const auto chol = j.at("chol").get<std::vector<double>>();
  if (static_cast<int>(mu.size()) != k || static_cast<int>(lv.size()) != k ||
      static_cast<int>(chol.size()) != (k + 1) * (k + 1)) {
    throw ConfigError("eta json: array lengths do not match k");
  }
  for (int i = 0; i < k; ++i) {
    eta.mu(i) = mu[i];
    eta.log_var(i) = lv[i];
  }
  for (int a = 0; a <= k; ++a)
    for (int b = 0; b <= k; ++b) eta.chol(a, b) = chol[a * (k + 1) + b];
  eta.validate();
  return eta;
}

CorrelationFactor rescale_to_correlation(const Eigen::MatrixXd& chol) {
  if (chol.rows() != chol.cols() || chol.rows() < 1) {
    throw ConfigError("rescale_to_correlation: factor must be square");
  }
  CorrelationFactor out;
  out.row_norms = chol.rowwise().norm();
  for (Eigen::Index a = 0; a < chol.rows(); ++a) {
    if (out.row_norms(a) == 0.0) {
      throw ConfigError("rescale_to_correlation: row " + std::to_string(a) +
                        " is zero (degenerate correlation)");
    }
  }
  out.mixing = out.row_norms.cwiseInverse().asDiagonal() * chol;
  out.correlation = out.mixing * out.mixing.transpose();
  return out;
}

Eigen::MatrixXd mixing_gradient_to_chol(const Eigen::MatrixXd& chol, const CorrelationFactor& factor,
                                        const Eigen::MatrixXd& d_mixing) {
  // mixing_a = chol_a / |chol_a|, so d/dchol_a = (I - m_a m_a^T) / |chol_a| applied to d_mixing_a.
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(chol.rows(), chol.cols());
  for (Eigen::Index a = 0; a < chol.rows(); ++a) {
    const double norm = factor.row_norms(a);
    const double proj = d_mixing.row(a).dot(factor.mixing.row(a));
    grad.row(a) = (d_mixing.row(a) - proj * factor.mixing.row(a)) / norm;
  }
  return grad.triangularView<Eigen::Lower>();
}

Eigen::MatrixXd draw_base_noise(int batch, int k, Rng& rng) {
  Eigen::MatrixXd noise(batch, k);
  fill_standard_normal(rng, std::span<double>(noise.data(), static_cast<std::size_t>(noise.size())));
  return noise;
}

Eigen::MatrixXd mix_gaussian(const CorrelationFactor& factor, const Eigen::VectorXd& ranks,
                             const Eigen::MatrixXd& noise) {
  const Eigen::Index k = noise.cols();
  const auto rows = factor.mixing.bottomRows(k);
  // Row j of [ranks, noise] times rows 1..K of the mixing factor, transposed.
  Eigen::MatrixXd mixed = ranks * rows.col(0).transpose();
  mixed.noalias() += noise * rows.rightCols(k).transpose();
  return mixed;
}

Eigen::MatrixXd theta_from_mixed(const EtaParams& eta, const Eigen::MatrixXd& mixed) {
  return (mixed * eta.sigma().asDiagonal()).rowwise() + eta.mu.transpose();
}

CopulaSample sample_theta_given_bin(const EtaParams& eta, const Eigen::VectorXd& x_hat_row,
                                    const Eigen::MatrixXd& base_noise) {
  const auto batch = static_cast<int>(x_hat_row.size());
  if (batch < 2) throw ConfigError("sample_theta_given_bin: need B >= 2");
  if (base_noise.rows() != batch || base_noise.cols() != eta.k()) {
    throw ConfigError("sample_theta_given_bin: base noise must be B x K");
  }
  const auto ranks_vec = gaussianized_ranks(batch);
  const Eigen::Map<const Eigen::VectorXd> ranks(ranks_vec.data(), batch);
  const CorrelationFactor factor = rescale_to_correlation(eta.chol);
  return {theta_from_mixed(eta, mix_gaussian(factor, ranks, base_noise)), x_hat_row, base_noise};
}

CopulaSample sample_theta_given_bin(const EtaParams& eta, const Eigen::VectorXd& x_hat_row, Rng& rng) {
  return sample_theta_given_bin(eta, x_hat_row,
                                draw_base_noise(static_cast<int>(x_hat_row.size()), eta.k(), rng));
}

Eigen::MatrixXd sample_theta_marginal(const EtaParams& eta, const Eigen::MatrixXd& x_hat, Rng& rng) {
  const Eigen::Index batch = x_hat.cols();
  Eigen::MatrixXd pooled(x_hat.rows() * batch, eta.k());
  for (Eigen::Index m = 0; m < x_hat.rows(); ++m) {
    pooled.middleRows(m * batch, batch) =
        sample_theta_given_bin(eta, x_hat.row(m).transpose(), rng).theta;
  }
  return pooled;
}

}  // namespace ivbounds
