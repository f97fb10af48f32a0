#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "ivbounds/copula.hpp"
#include "ivbounds/estimator.hpp"
#include "ivbounds/joint.hpp"
#include "ivbounds/preprocess.hpp"
#include "ivbounds/response.hpp"

namespace ivbounds {

/// A block of B coefficient draws sharing one rank vector.
///
/// Draw j uses rank coordinate ranks(j) and is evaluated at the treatment
/// value whose basis row is psi.row(j). Groups with a constraint row feed
/// RHS(constraint_row, :); groups flagged in_objective are pooled for the
/// objective estimate.
struct SampleGroup {
  Eigen::VectorXd ranks;
  Eigen::MatrixXd psi;
  int constraint_row = -1;
  bool in_objective = false;
};

/// Everything about the Monte Carlo program that does not depend on x*.
struct ConstraintLayout {
  std::vector<SampleGroup> groups;
  Eigen::MatrixXd lhs;
  Eigen::MatrixXd b;
  MomentDictionary dict;
  int k = 0;

  int constraint_count() const { return static_cast<int>(lhs.size()); }
};

/// Marginal p(y|z) mode: one group per z-bin, paired with the bin's frozen
/// x samples and pooled for the objective.
ConstraintLayout marginal_layout(const Eigen::MatrixXd& lhs_smoothed, const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& x_hat, const ResponseBasis& basis,
                                 const MomentDictionary& dict);

/// Joint p(y|x,z) mode: one constrained group per retained cell plus
/// `objective_groups` unconstrained rank-grid groups for the objective.
ConstraintLayout joint_layout(const JointGrid& grid, const Eigen::MatrixXd& b,
                              const ResponseBasis& basis, const MomentDictionary& dict, int batch,
                              int objective_groups);

using NoiseBatch = std::vector<Eigen::MatrixXd>;

struct Evaluation {
  double objective = 0.0;
  /// Standard error of the objective's Monte Carlo mean.
  double objective_se = 0.0;
  ConstraintResiduals residuals;
  double lagrangian = 0.0;
  Eigen::VectorXd gradient;  // flat, EtaParams::flatten layout; empty unless requested
};

/// The bounding program at one intervention level (whitened x*).
class Problem {
 public:
  Problem(std::shared_ptr<const ConstraintLayout> layout, const ResponseBasis& basis, double x_star);

  const ConstraintLayout& layout() const { return *layout_; }
  double x_star() const { return x_star_; }
  const Eigen::VectorXd& psi_star() const { return psi_star_; }

  NoiseBatch draw_noise(Rng& rng) const;

  /// Objective and residuals, plus the Lagrangian (and its gradient) when a
  /// state is supplied.
  Evaluation evaluate(const EtaParams& eta, const NoiseBatch& noise,
                      const LagrangianState* state = nullptr, bool with_gradient = false) const;

 private:
  std::shared_ptr<const ConstraintLayout> layout_;
  Eigen::VectorXd psi_star_;
  double x_star_;
};

/// Gradient of the Lagrangian over all free eta entries for pinned noise.
/// Throws SolverError naming the first non-finite entry.
Eigen::VectorXd grad_lagrangian(const EtaParams& eta, const Problem& problem,
                                const LagrangianState& state, const NoiseBatch& noise);

}  // namespace ivbounds
