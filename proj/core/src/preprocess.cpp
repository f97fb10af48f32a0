#include "ivbounds/preprocess.hpp"

#include <cmath>
#include <string>

#include "ivbounds/errors.hpp"
#include "ivbounds/smoothing.hpp"

namespace ivbounds {

int nearest_index(std::span<const double> grid, double v) {
  int best = 0;
  double best_dist = std::abs(v - grid[0]);
  for (std::size_t m = 1; m < grid.size(); ++m) {
    const double d = std::abs(v - grid[m]);
    if (d <= best_dist) {
      best = static_cast<int>(m);
      best_dist = d;
    }
  }
  return best;
}

ZGrid make_z_grid(const Dataset& dataset, int m_count) {
  if (m_count < 1) throw ConfigError("make_z_grid: M must be >= 1");
  const EmpiricalCdf cdf(dataset.z);
  ZGrid grid;
  grid.points.reserve(m_count);
  for (int m = 1; m <= m_count; ++m) {
    grid.points.push_back(cdf.inverse(static_cast<double>(m) / (m_count + 1)));
  }
  grid.bin_of.resize(dataset.size());
  grid.members.assign(m_count, {});
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int bin = nearest_index(grid.points, dataset.z[i]);
    grid.bin_of[i] = bin;
    grid.members[bin].push_back(i);
  }
  for (int m = 0; m < m_count; ++m) {
    if (grid.members[m].empty()) {
      throw DataError("z-bin " + std::to_string(m + 1) + " of " + std::to_string(m_count) +
                      " is empty; lower the number of grid points M");
    }
  }
  return grid;
}

double MomentDictionary::value(int l, double y) const { return std::pow(y, l); }

double MomentDictionary::derivative(int l, double y) const {
  return l == 1 ? 1.0 : l * std::pow(y, l - 1);
}

Eigen::MatrixXd estimate_lhs(const Dataset& dataset, const ZGrid& grid,
                             const MomentDictionary& dict) {
  if (dict.count < 1) throw ConfigError("estimate_lhs: dictionary must be non-empty");
  Eigen::MatrixXd lhs(grid.size(), dict.count);
  for (int m = 0; m < grid.size(); ++m) {
    const auto& members = grid.members[m];
    if (members.empty()) throw DataError("estimate_lhs: z-bin " + std::to_string(m + 1) + " is empty");
    for (int l = 1; l <= dict.count; ++l) {
      double acc = 0.0;
      for (std::size_t i : members) acc += dict.value(l, dataset.y[i]);
      lhs(m, l - 1) = acc / static_cast<double>(members.size());
    }
  }
  return lhs;
}

Eigen::MatrixXd smooth_lhs(const Eigen::MatrixXd& lhs, double smoothing_factor) {
  Eigen::MatrixXd out = lhs;
  for (Eigen::Index l = 0; l < lhs.cols(); ++l) {
    out.col(l) = smooth_series(lhs.col(l), smoothing_factor);
  }
  return out;
}

Eigen::MatrixXd compute_tolerances(const Eigen::MatrixXd& lhs_smoothed, double eps_abs,
                                   double eps_rel) {
  if (!(eps_abs > 0.0) || !(eps_rel > 0.0)) {
    throw ConfigError("compute_tolerances: eps_abs and eps_rel must be positive");
  }
  return (eps_rel * lhs_smoothed.array().abs()).max(eps_abs).matrix();
}

Eigen::MatrixXd freeze_x_samples(const Dataset& dataset, const ZGrid& grid, int batch) {
  if (batch < 2) throw ConfigError("freeze_x_samples: batch size must be >= 2");
  Eigen::MatrixXd x_hat(grid.size(), batch);
  std::vector<double> values;
  for (int m = 0; m < grid.size(); ++m) {
    const auto& members = grid.members[m];
    if (members.empty()) {
      throw DataError("freeze_x_samples: z-bin " + std::to_string(m + 1) + " is empty");
    }
    values.clear();
    for (std::size_t i : members) values.push_back(dataset.x[i]);
    const EmpiricalCdf cdf(values);
    for (int j = 0; j < batch; ++j) {
      x_hat(m, j) = cdf.inverse(static_cast<double>(j) / (batch - 1));
    }
  }
  return x_hat;
}

nlohmann::json ConstraintSet::to_json() const {
  return {
      {"M", m_count()},
      {"L", dict_size()},
      {"B", batch()},
      {"eps_abs", eps_abs},
      {"eps_rel", eps_rel},
      {"lhs", matrix_to_json(lhs)},
      {"lhs_smoothed", matrix_to_json(lhs_smoothed)},
      {"b", matrix_to_json(b)},
      {"x_hat", matrix_to_json(x_hat)},
  };
}

ConstraintSet build_constraint_set(const Dataset& dataset, const ZGrid& grid,
                                   const MomentDictionary& dict, int batch, double eps_abs,
                                   double eps_rel, double smoothing_factor) {
  ConstraintSet set;
  set.lhs = estimate_lhs(dataset, grid, dict);
  set.lhs_smoothed = smooth_lhs(set.lhs, smoothing_factor);
  set.b = compute_tolerances(set.lhs_smoothed, eps_abs, eps_rel);
  set.x_hat = freeze_x_samples(dataset, grid, batch);
  set.eps_abs = eps_abs;
  set.eps_rel = eps_rel;
  return set;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) {
      throw DataError("matrix_from_json: ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace ivbounds
