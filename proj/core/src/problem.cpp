#include "ivbounds/problem.hpp"

#include <cmath>
#include <string>

#include "ivbounds/errors.hpp"
#include "ivbounds/stats.hpp"

namespace ivbounds {

namespace {

Eigen::VectorXd rank_grid(int batch) {
  const auto r = gaussianized_ranks(batch);
  return Eigen::Map<const Eigen::VectorXd>(r.data(), batch);
}

}  // namespace

ConstraintLayout marginal_layout(const Eigen::MatrixXd& lhs_smoothed, const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& x_hat, const ResponseBasis& basis,
                                 const MomentDictionary& dict) {
  if (lhs_smoothed.rows() != x_hat.rows() || b.rows() != x_hat.rows() ||
      lhs_smoothed.cols() != dict.count || b.cols() != dict.count) {
    throw ConfigError("marginal_layout: lhs, b and x_hat disagree in shape");
  }
  ConstraintLayout layout;
  layout.lhs = lhs_smoothed;
  layout.b = b;
  layout.dict = dict;
  layout.k = basis.k_count();
  const Eigen::VectorXd ranks = rank_grid(static_cast<int>(x_hat.cols()));
  std::vector<double> xs(static_cast<std::size_t>(x_hat.cols()));
  for (Eigen::Index m = 0; m < x_hat.rows(); ++m) {
    for (Eigen::Index j = 0; j < x_hat.cols(); ++j) xs[j] = x_hat(m, j);
    layout.groups.push_back({ranks, basis.evaluate_many(xs), static_cast<int>(m), true});
  }
  return layout;
}

ConstraintLayout joint_layout(const JointGrid& grid, const Eigen::MatrixXd& b,
                              const ResponseBasis& basis, const MomentDictionary& dict, int batch,
                              int objective_groups) {
  if (b.rows() != grid.lhs.rows() || b.cols() != dict.count || grid.lhs.cols() != dict.count) {
    throw ConfigError("joint_layout: lhs and b disagree in shape");
  }
  if (batch < 2 || objective_groups < 1) throw ConfigError("joint_layout: invalid batch sizes");
  ConstraintLayout layout;
  layout.lhs = grid.lhs;
  layout.b = b;
  layout.dict = dict;
  layout.k = basis.k_count();
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const auto& cell = grid.cells[c];
    const Eigen::RowVectorXd psi = basis.evaluate(cell.x_value).transpose();
    layout.groups.push_back({Eigen::VectorXd::Constant(batch, cell.rank), psi.replicate(batch, 1),
                             static_cast<int>(c), false});
  }
  const Eigen::VectorXd ranks = rank_grid(batch);
  for (int g = 0; g < objective_groups; ++g) {
    layout.groups.push_back({ranks, Eigen::MatrixXd(), -1, true});
  }
  return layout;
}

Problem::Problem(std::shared_ptr<const ConstraintLayout> layout, const ResponseBasis& basis,
                 double x_star)
    : layout_(std::move(layout)), psi_star_(basis.evaluate(x_star)), x_star_(x_star) {
  if (!layout_) throw ConfigError("problem: missing constraint layout");
  if (layout_->k != basis.k_count()) throw ConfigError("problem: basis size does not match layout");
}

NoiseBatch Problem::draw_noise(Rng& rng) const {
  NoiseBatch noise;
  noise.reserve(layout_->groups.size());
  for (const auto& g : layout_->groups) {
    noise.push_back(draw_base_noise(static_cast<int>(g.ranks.size()), layout_->k, rng));
  }
  return noise;
}

Evaluation Problem::evaluate(const EtaParams& eta, const NoiseBatch& noise,
                             const LagrangianState* state, bool with_gradient) const {
  const ConstraintLayout& lay = *layout_;
  if (noise.size() != lay.groups.size()) throw ConfigError("evaluate: noise batch does not match layout");
  if (eta.k() != lay.k) throw ConfigError("evaluate: eta has the wrong dimension");
  if (with_gradient && state == nullptr) throw ConfigError("evaluate: gradient needs a Lagrangian state");

  const int k = lay.k;
  const int dict = lay.dict.count;
  const CorrelationFactor factor = rescale_to_correlation(eta.chol);
  const Eigen::VectorXd sigma = eta.sigma();

  // Forward pass.
  std::vector<Eigen::MatrixXd> mixed(lay.groups.size());
  std::vector<Eigen::VectorXd> fitted(lay.groups.size());
  Eigen::MatrixXd rhs_values = Eigen::MatrixXd::Zero(lay.lhs.rows(), dict);
  double obj_sum = 0.0;
  double obj_sq = 0.0;
  Eigen::Index obj_count = 0;
  for (std::size_t g = 0; g < lay.groups.size(); ++g) {
    const SampleGroup& group = lay.groups[g];
    mixed[g] = mix_gaussian(factor, group.ranks, noise[g]);
    const Eigen::MatrixXd theta = theta_from_mixed(eta, mixed[g]);
    if (group.in_objective) {
      const Eigen::VectorXd at_star = theta * psi_star_;
      obj_sum += at_star.sum();
      obj_sq += at_star.squaredNorm();
      obj_count += at_star.size();
    }
    if (group.constraint_row >= 0) {
      fitted[g] = theta.cwiseProduct(group.psi).rowwise().sum();
      const double inv_b = 1.0 / static_cast<double>(fitted[g].size());
      Eigen::ArrayXd power = Eigen::ArrayXd::Ones(fitted[g].size());
      for (int l = 0; l < dict; ++l) {
        power *= fitted[g].array();
        rhs_values(group.constraint_row, l) = power.sum() * inv_b;
      }
    }
  }
  if (obj_count == 0) throw ConfigError("evaluate: layout has no objective draws");

  Evaluation out;
  const double n_obj = static_cast<double>(obj_count);
  out.objective = obj_sum / n_obj;
  const double var = std::max(0.0, obj_sq / n_obj - out.objective * out.objective);
  out.objective_se = std::sqrt(var / n_obj);
  out.residuals = constraints(lay.lhs, lay.b, rhs_values);
  if (state == nullptr) return out;
  out.lagrangian = lagrangian(out.objective, out.residuals, *state);
  if (!with_gradient) return out;

  // dL/dRHS for every constraint; the kink of |lhs - rhs| gets subgradient 0.
  Eigen::MatrixXd d_rhs(lay.lhs.rows(), dict);
  for (Eigen::Index i = 0; i < d_rhs.size(); ++i) {
    const double gap = lay.lhs(i) - rhs_values(i);
    const double sgn = gap > 0.0 ? 1.0 : (gap < 0.0 ? -1.0 : 0.0);
    d_rhs(i) = penalty_slope(out.residuals.c(i), state->lambda(i), state->tau) * sgn;
  }

  Eigen::VectorXd d_mu = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd d_log_var = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd d_mixing = Eigen::MatrixXd::Zero(k + 1, k + 1);
  const Eigen::RowVectorXd obj_row = (state->sign() / n_obj) * psi_star_.transpose();
  for (std::size_t g = 0; g < lay.groups.size(); ++g) {
    const SampleGroup& group = lay.groups[g];
    const Eigen::Index batch = group.ranks.size();
    Eigen::MatrixXd d_theta = Eigen::MatrixXd::Zero(batch, k);
    if (group.in_objective) d_theta.rowwise() += obj_row;
    if (group.constraint_row >= 0) {
      // d/df of sum_l d_rhs(row, l) * mean_j f_j^l.
      const Eigen::ArrayXd f = fitted[g].array();
      Eigen::ArrayXd slope = Eigen::ArrayXd::Zero(batch);
      Eigen::ArrayXd power = Eigen::ArrayXd::Ones(batch);
      for (int l = 1; l <= dict; ++l) {
        slope += (d_rhs(group.constraint_row, l - 1) * l) * power;
        power *= f;
      }
      slope /= static_cast<double>(batch);
      d_theta += (group.psi.array().colwise() * slope).matrix();
    }
    d_mu += d_theta.colwise().sum().transpose();
    d_log_var += 0.5 * sigma.cwiseProduct(d_theta.cwiseProduct(mixed[g]).colwise().sum().transpose());
    const Eigen::MatrixXd d_mixed = d_theta * sigma.asDiagonal();
    d_mixing.block(1, 0, k, 1) += d_mixed.transpose() * group.ranks;
    d_mixing.block(1, 1, k, k) += d_mixed.transpose() * noise[g];
  }
  const Eigen::MatrixXd d_chol = mixing_gradient_to_chol(eta.chol, factor, d_mixing);

  out.gradient.resize(EtaParams::free_count(k));
  out.gradient.head(k) = d_mu;
  out.gradient.segment(k, k) = d_log_var;
  Eigen::Index i = 2 * k;
  for (int a = 1; a <= k; ++a)
    for (int b = 0; b < a; ++b) out.gradient(i++) = d_chol(a, b);
  return out;
}

Eigen::VectorXd grad_lagrangian(const EtaParams& eta, const Problem& problem,
                                const LagrangianState& state, const NoiseBatch& noise) {
  Evaluation ev = problem.evaluate(eta, noise, &state, true);
  for (Eigen::Index i = 0; i < ev.gradient.size(); ++i) {
    if (!std::isfinite(ev.gradient(i))) {
      throw SolverError("non-finite Lagrangian gradient at parameter index " + std::to_string(i));
    }
  }
  return std::move(ev.gradient);
}

}  // namespace ivbounds
