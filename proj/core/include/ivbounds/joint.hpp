#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ivbounds/copula.hpp"
#include "ivbounds/data.hpp"
#include "ivbounds/preprocess.hpp"
#include "ivbounds/response.hpp"

namespace ivbounds {

/// One retained (x, z) grid cell.
struct JointCell {
  int x_index = 0;
  int z_index = 0;
  double x_value = 0.0;
  double z_value = 0.0;
  /// Gaussianized rank of x_value within the observations of its z-row.
  double rank = 0.0;
  std::size_t count = 0;
};

/// Constraints on E[phi_l(Y) | x, z] over a product of marginal quantile grids.
struct JointGrid {
  std::vector<double> x_points;
  std::vector<double> z_points;
  std::vector<JointCell> cells;
  Eigen::MatrixXd lhs;  // retained cells x L
  int dropped = 0;
  int n_min = 0;

  nlohmann::json to_json() const;
};

inline constexpr int kDefaultJointGrid = 8;
inline constexpr int kDefaultJointMinCount = 10;

/// Grids at quantiles i / (m + 1) on each axis; observations go to the
/// nearest point per axis (ties to the higher index). Cells with fewer than
/// n_min observations are dropped; if none survive, DataError.
JointGrid build_joint_constraints(const Dataset& dataset, int m_x, int m_z,
                                  const MomentDictionary& dict, int n_min = kDefaultJointMinCount);

/// Coefficient draws conditional on a cell: the rank coordinate is pinned at
/// the cell's Gaussianized rank (B x K).
Eigen::MatrixXd sample_theta_given_cell(const EtaParams& eta, const JointCell& cell,
                                        const Eigen::MatrixXd& base_noise);

/// RHS(cell, l) = mean over draws of phi_l(f_theta(x_cell)).
Eigen::MatrixXd rhs_joint(const EtaParams& eta, const ResponseBasis& basis, const JointGrid& grid,
                          const MomentDictionary& dict,
                          const std::vector<Eigen::MatrixXd>& per_cell_noise);

}  // namespace ivbounds
