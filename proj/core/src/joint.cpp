#include "ivbounds/joint.hpp"

#include <algorithm>
#include <string>

#include "ivbounds/errors.hpp"
#include "ivbounds/stats.hpp"

namespace ivbounds {

nlohmann::json JointGrid::to_json() const {
  nlohmann::json cell_list = nlohmann::json::array();
  for (const auto& c : cells) {
    cell_list.push_back({{"x_index", c.x_index}, {"z_index", c.z_index}, {"x", c.x_value},
                         {"z", c.z_value}, {"rank", c.rank}, {"count", c.count}});
  }
  return {{"x_points", x_points}, {"z_points", z_points}, {"cells", cell_list},
          {"lhs", matrix_to_json(lhs)}, {"dropped", dropped}, {"n_min", n_min}};
}

JointGrid build_joint_constraints(const Dataset& dataset, int m_x, int m_z,
                                  const MomentDictionary& dict, int n_min) {
  if (m_x < 1 || m_z < 1) throw ConfigError("joint grid: grid sizes must be >= 1");
  if (n_min < 1) throw ConfigError("joint grid: n_min must be >= 1");
  if (dict.count < 1) throw ConfigError("joint grid: dictionary must be non-empty");

  JointGrid grid;
  grid.n_min = n_min;
  const EmpiricalCdf x_cdf(dataset.x);
  const EmpiricalCdf z_cdf(dataset.z);
  for (int i = 1; i <= m_x; ++i) grid.x_points.push_back(x_cdf.inverse(static_cast<double>(i) / (m_x + 1)));
  for (int i = 1; i <= m_z; ++i) grid.z_points.push_back(z_cdf.inverse(static_cast<double>(i) / (m_z + 1)));

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(m_x * m_z));
  std::vector<std::vector<double>> z_row_x(static_cast<std::size_t>(m_z));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int xi = nearest_index(grid.x_points, dataset.x[i]);
    const int zi = nearest_index(grid.z_points, dataset.z[i]);
    members[static_cast<std::size_t>(zi * m_x + xi)].push_back(i);
    z_row_x[zi].push_back(dataset.x[i]);
  }

  std::vector<Eigen::VectorXd> rows;
  for (int zi = 0; zi < m_z; ++zi) {
    for (int xi = 0; xi < m_x; ++xi) {
      const auto& cell_members = members[static_cast<std::size_t>(zi * m_x + xi)];
      if (static_cast<int>(cell_members.size()) < n_min) {
        ++grid.dropped;
        continue;
      }
      JointCell cell;
      cell.x_index = xi;
      cell.z_index = zi;
      cell.x_value = grid.x_points[xi];
      cell.z_value = grid.z_points[zi];
      cell.count = cell_members.size();
      // Rank of the cell's x within its z-row, kept off {0, 1}.
      const auto& row_x = z_row_x[zi];
      const EmpiricalCdf row_cdf(row_x);
      const double half = 0.5 / static_cast<double>(row_x.size());
      cell.rank = normal_quantile(std::clamp(row_cdf.cdf(cell.x_value), half, 1.0 - half));

      Eigen::VectorXd target(dict.count);
      for (int l = 1; l <= dict.count; ++l) {
        double acc = 0.0;
        for (std::size_t i : cell_members) acc += dict.value(l, dataset.y[i]);
        target(l - 1) = acc / static_cast<double>(cell_members.size());
      }
      rows.push_back(std::move(target));
      grid.cells.push_back(cell);
    }
  }
  if (grid.cells.empty()) {
    throw DataError("joint grid: every cell has fewer than n_min = " + std::to_string(n_min) +
                    " observations");
  }
  grid.lhs.resize(static_cast<Eigen::Index>(rows.size()), dict.count);
  for (std::size_t r = 0; r < rows.size(); ++r) grid.lhs.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return grid;
}

Eigen::MatrixXd sample_theta_given_cell(const EtaParams& eta, const JointCell& cell,
                                        const Eigen::MatrixXd& base_noise) {
  if (base_noise.cols() != eta.k()) throw ConfigError("sample_theta_given_cell: noise must be B x K");
  // The rank coordinate is unmixed (first row of the factor is e_0), so
  // conditioning on it is exactly pinning it.
  const Eigen::VectorXd ranks = Eigen::VectorXd::Constant(base_noise.rows(), cell.rank);
  const CorrelationFactor factor = rescale_to_correlation(eta.chol);
  return theta_from_mixed(eta, mix_gaussian(factor, ranks, base_noise));
}

Eigen::MatrixXd rhs_joint(const EtaParams& eta, const ResponseBasis& basis, const JointGrid& grid,
                          const MomentDictionary& dict,
                          const std::vector<Eigen::MatrixXd>& per_cell_noise) {
  if (per_cell_noise.size() != grid.cells.size()) throw ConfigError("rhs_joint: need noise per cell");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.cells.size()), dict.count);
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const auto& cell = grid.cells[c];
    const Eigen::MatrixXd theta = sample_theta_given_cell(eta, cell, per_cell_noise[c]);
    const Eigen::VectorXd f = theta * basis.evaluate(cell.x_value);
    for (int l = 1; l <= dict.count; ++l) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < f.size(); ++j) acc += dict.value(l, f(j));
      out(static_cast<Eigen::Index>(c), l - 1) = acc / static_cast<double>(f.size());
    }
  }
  return out;
}

}  // namespace ivbounds
