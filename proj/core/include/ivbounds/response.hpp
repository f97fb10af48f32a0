#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include <Eigen/Dense>
#include <json.hpp>

#include "ivbounds/data.hpp"

namespace ivbounds {

enum class BasisKind { polynomial, mlp, gp };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

/// psi_k(x) = x^(k-1).
struct PolynomialBasis {
  int k = 2;
};

/// Two rectifier layers: 1 -> hidden -> K. The K activations of the last
/// hidden layer are the basis; the trained regressor is their linear
/// combination with `output_weights` (no output bias).
struct MlpBasis {
  Eigen::VectorXd w1;   // hidden
  Eigen::VectorXd b1;   // hidden
  Eigen::MatrixXd w2;   // K x hidden
  Eigen::VectorXd b2;   // K
  Eigen::VectorXd output_weights;  // K
};

/// K posterior function draws tabulated on a uniform grid, linearly
/// interpolated between nodes and held constant outside the grid.
struct GpBasis {
  Eigen::VectorXd grid;
  Eigen::MatrixXd values;  // K x grid size
};

/// Fixed set of K basis functions psi_k defining f_theta(x) = sum_k theta_k psi_k(x).
class ResponseBasis {
 public:
  using Impl = std::variant<PolynomialBasis, MlpBasis, GpBasis>;

  ResponseBasis(Impl impl, nlohmann::json provenance = nlohmann::json::object());

  int k_count() const;
  BasisKind kind() const;

  void evaluate(double x, std::span<double> out) const;
  Eigen::VectorXd evaluate(double x) const;
  /// Row i holds psi(xs[i]).
  Eigen::MatrixXd evaluate_many(std::span<const double> xs) const;
  double combine(const Eigen::VectorXd& theta, double x) const;

  const Impl& impl() const { return impl_; }
  /// Fit diagnostics and seeds for learned bases.
  const nlohmann::json& provenance() const { return provenance_; }

  nlohmann::json to_json() const;
  static ResponseBasis from_json(const nlohmann::json& j);

 private:
  Impl impl_;
  nlohmann::json provenance_;
};

inline constexpr int kMaxPolynomialK = 8;

ResponseBasis polynomial_basis(int k_count);

struct MlpFitConfig {
  int hidden_width = 64;
  int epochs = 100;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

/// Trains y ~ g(x) by mean squared error with Adam and returns the last
/// hidden layer as the basis. Deterministic given `seed`.
ResponseBasis fit_mlp_basis(std::span<const double> x, std::span<const double> y, int k_count,
                            const MlpFitConfig& config, std::uint64_t seed);
ResponseBasis fit_mlp_basis(const Dataset& dataset, int k_count, const MlpFitConfig& config,
                            std::uint64_t seed);

/// Sum kernel (offset + a b)^degree + rbf + white noise.
struct GpFitConfig {
  int subsample = 200;
  int poly_degree = 3;
  double poly_offset = 1.0;
  double rbf_variance = 1.0;
  double rbf_length_scale = 1.0;
  double white_noise = 0.4;
  int grid_size = 256;
  double range_extension = 0.2;
};

double gp_kernel(const GpFitConfig& config, double a, double b);

/// Fits K independent Gaussian processes on random subsamples (without
/// replacement) and draws one latent posterior function from each.
ResponseBasis fit_gp_basis(std::span<const double> x, std::span<const double> y, int k_count,
                           const GpFitConfig& config, std::uint64_t seed);
ResponseBasis fit_gp_basis(const Dataset& dataset, int k_count, const GpFitConfig& config,
                           std::uint64_t seed);

}  // namespace ivbounds
