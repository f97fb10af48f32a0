#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ivbounds/data.hpp"

namespace ivbounds {

/// Grid over the instrument at the interior quantiles m / (M + 1) together
/// with the nearest-grid-point assignment of every observation.
struct ZGrid {
  std::vector<double> points;
  std::vector<int> bin_of;                    // observation -> bin (0-based)
  std::vector<std::vector<std::size_t>> members;  // bin -> observations

  int size() const { return static_cast<int>(points.size()); }
};

/// Index of the grid value closest to `v`; ties resolve to the higher index.
/// `grid` must be sorted ascending.
int nearest_index(std::span<const double> grid, double v);

/// Throws DataError naming the empty bin when any bin has no observations.
ZGrid make_z_grid(const Dataset& dataset, int m_count);

/// Raw-moment dictionary: phi_l(y) = y^l for l = 1..count.
struct MomentDictionary {
  int count = 2;

  double value(int l, double y) const;
  double derivative(int l, double y) const;
};

/// M x L matrix of per-bin sample means of phi_l(y).
Eigen::MatrixXd estimate_lhs(const Dataset& dataset, const ZGrid& grid,
                             const MomentDictionary& dict);

/// Residual budget used when smoothing constraint targets across the grid.
inline constexpr double kLhsSmoothingFactor = 0.2;

/// Smooths each column across the grid index. Fewer than four rows pass through.
Eigen::MatrixXd smooth_lhs(const Eigen::MatrixXd& lhs, double smoothing_factor = kLhsSmoothingFactor);

/// b = max(eps_abs, eps_rel * |lhs|) elementwise.
Eigen::MatrixXd compute_tolerances(const Eigen::MatrixXd& lhs_smoothed, double eps_abs,
                                   double eps_rel);

/// Row m holds the bin's empirical x-quantiles at (j - 1) / (B - 1), j = 1..B.
Eigen::MatrixXd freeze_x_samples(const Dataset& dataset, const ZGrid& grid, int batch);

struct ConstraintSet {
  Eigen::MatrixXd lhs;
  Eigen::MatrixXd lhs_smoothed;
  Eigen::MatrixXd b;
  Eigen::MatrixXd x_hat;
  double eps_abs = 0.0;
  double eps_rel = 0.0;

  int m_count() const { return static_cast<int>(lhs.rows()); }
  int dict_size() const { return static_cast<int>(lhs.cols()); }
  int batch() const { return static_cast<int>(x_hat.cols()); }

  nlohmann::json to_json() const;
};

ConstraintSet build_constraint_set(const Dataset& dataset, const ZGrid& grid,
                                   const MomentDictionary& dict, int batch, double eps_abs,
                                   double eps_rel, double smoothing_factor = kLhsSmoothingFactor);

/// Row-major nested-array encoding used by every JSON writer in the library.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace ivbounds
