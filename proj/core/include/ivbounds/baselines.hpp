#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivbounds/data.hpp"

namespace ivbounds {

enum class Design { linear_gaussian, nonadditive };

std::string to_string(Design design);
/// Accepts "linear_gaussian" / "linear-gaussian" and "nonadditive".
Design design_from_string(const std::string& name);

struct SyntheticSpec {
  Design design = Design::linear_gaussian;
  double alpha = 3.0;
  double beta = 0.5;
  std::size_t n = 5000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// Observations in original units.
struct SyntheticData {
  std::vector<double> z;
  std::vector<double> x;
  std::vector<double> y;
  Design design = Design::linear_gaussian;

  Dataset dataset() const { return Dataset::from_columns(z, x, y); }
};

/// Z, C, e_X, e_Y iid N(0, 1); X = alpha Z + beta C + e_X.
/// linear_gaussian: Y = X - 6C + e_Y. nonadditive: Y = 0.3 X^2 - 1.5 X C + e_Y.
SyntheticData generate(const SyntheticSpec& spec);

/// E[Y | do(x)]: x for linear_gaussian, 0.3 x^2 for nonadditive.
double true_effect(Design design, double x);

struct TwoSlsResult {
  double slope = 0.0;
  double intercept = 0.0;
  double first_stage_f = 0.0;

  double effect(double x) const { return intercept + slope * x; }
  nlohmann::json to_json() const;
};

inline constexpr double kWeakInstrumentF = 10.0;

/// Just-identified IV: slope = Cov(Z, Y) / Cov(Z, X). Throws DataError when the
/// first-stage F statistic is below `min_f` (including Cov(Z, X) = 0).
TwoSlsResult two_stage_least_squares(std::span<const double> z, std::span<const double> x,
                                     std::span<const double> y, double min_f = kWeakInstrumentF);
/// Same, on the dataset's original units.
TwoSlsResult two_stage_least_squares(const Dataset& dataset, double min_f = kWeakInstrumentF);

}  // namespace ivbounds
