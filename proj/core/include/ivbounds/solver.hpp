#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ivbounds/copula.hpp"
#include "ivbounds/data.hpp"
#include "ivbounds/estimator.hpp"
#include "ivbounds/joint.hpp"
#include "ivbounds/preprocess.hpp"
#include "ivbounds/problem.hpp"
#include "ivbounds/response.hpp"

namespace ivbounds {

enum class ConstraintMode { marginal, joint };

std::string to_string(ConstraintMode mode);
ConstraintMode constraint_mode_from_string(const std::string& name);

struct SolverConfig {
  int rounds = 150;
  int steps_per_round = 30;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double tau0 = 0.1;
  double alpha = 1.08;
  double tau_max = 10.0;
  double eps_abs = 0.2;
  std::vector<double> eps_rel_schedule{0.3, 0.2, 0.1, 0.05};
  int batch = 1024;
  int m_count = 20;
  int dict_size = 2;
  /// Residual budget of the LHS smoothing spline; 0 disables smoothing.
  double lhs_smoothing = kLhsSmoothingFactor;
  /// Intervention levels in original units. nullopt selects the default
  /// quantile grid; an empty vector is an empty sweep.
  std::optional<std::vector<double>> x_star_grid;
  double feasibility_threshold = 1e-2;
  int verification_factor = 4;
  /// Global gradient-norm clip for the SGD steps; 0 disables.
  double gradient_clip = 10.0;
  /// Independent batches averaged to estimate c for each multiplier update.
  int multiplier_batches = 4;
  std::uint64_t seed = 0;
  ConstraintMode mode = ConstraintMode::marginal;
  int joint_grid = kDefaultJointGrid;
  int joint_min_count = kDefaultJointMinCount;
  int joint_objective_groups = 4;

  /// Every violated invariant, one message each.
  std::vector<std::string> problems() const;
  /// Throws ConfigError listing every problem.
  void validate() const;

  nlohmann::json to_json() const;
  /// Overlays keys present in `j` onto `base`; unknown keys throw ConfigError.
  static SolverConfig from_json(const nlohmann::json& j, SolverConfig base);
  static SolverConfig from_json(const nlohmann::json& j) { return from_json(j, SolverConfig{}); }
};

/// SGD with heavy-ball momentum: v <- momentum * v + g; x <- x - lr * v.
/// Gradients longer than `max_grad_norm` are rescaled to that length first
/// (0 disables clipping).
class MomentumSgd {
 public:
  MomentumSgd(double learning_rate, double momentum, Eigen::Index size, double max_grad_norm = 0.0);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient);
  void reset() { velocity_.setZero(); }
  const Eigen::VectorXd& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  double max_norm_;
  Eigen::VectorXd velocity_;
};

using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// `steps` updates of `params` along `gradient`.
void optimize_subproblem(Eigen::VectorXd& params, MomentumSgd& sgd, int steps, const GradientFn& gradient);

/// One round of the inner loop on eta with fresh noise per step. log_var is
/// clamped after every step.
EtaParams optimize_subproblem(const EtaParams& eta, const Problem& problem,
                              const LagrangianState& state, MomentumSgd& sgd, int steps, Rng& rng);

/// lambda <- max(0, lambda - tau c), then tau <- min(alpha tau, tau_max).
LagrangianState update_multipliers(const LagrangianState& state, const ConstraintResiduals& residuals,
                                   double alpha, double tau_max);

/// Unit-diagonal mixing factor with N(0, 0.05^2) strictly-lower entries and
/// mu = 0. Polynomial bases start at unit variances; learned bases scale
/// sigma_k^2 = 1 / (K' mean_x psi_k(x)^2), K' counting the basis functions
/// that are not identically zero on the data, so f_theta has roughly unit spread.
EtaParams init_eta(const ResponseBasis& basis, const std::vector<double>& x_points, std::uint64_t seed);

struct TraceRecord {
  int round = 0;
  double objective = 0.0;  // original units
  double lagrangian = 0.0;
  double max_violation = 0.0;
  double lambda_norm = 0.0;
  double tau = 0.0;

  nlohmann::json to_json() const;
};

struct BoundResult {
  double x_star = 0.0;  // original units
  Sense sense = Sense::lower;
  double eps_rel = 0.0;
  double bound = 0.0;  // original units
  /// Monte Carlo standard error of `bound`, original units.
  double mc_std_error = 0.0;
  bool feasible = false;
  double max_violation = 0.0;  // whitened units
  int violation_count = 0;
  std::uint64_t seed = 0;
  EtaParams eta;
  std::vector<TraceRecord> trace;
  /// Non-empty when the solve aborted.
  std::string error;

  bool ok() const { return error.empty(); }
  nlohmann::json to_json() const;
};

/// Data-dependent pieces shared by every solve of a sweep: one constraint
/// layout per tolerance level.
struct ProblemSetup {
  const Dataset* dataset = nullptr;
  const ResponseBasis* basis = nullptr;
  MomentDictionary dict;
  std::optional<ZGrid> z_grid;
  std::optional<ConstraintSet> constraint_set;  // at the first schedule level
  std::optional<JointGrid> joint_grid;
  std::vector<double> eps_levels;
  std::vector<std::shared_ptr<const ConstraintLayout>> layouts;
  std::vector<double> basis_x_points;

  std::shared_ptr<const ConstraintLayout> layout_for(double eps_rel) const;
};

/// `dataset` and `basis` are referenced, not copied, and must outlive the setup.
ProblemSetup prepare_problem(const Dataset& dataset, const ResponseBasis& basis, const SolverConfig& config);
ProblemSetup prepare_problem(Dataset&&, const ResponseBasis&, const SolverConfig&) = delete;
ProblemSetup prepare_problem(const Dataset&, ResponseBasis&&, const SolverConfig&) = delete;

/// One run of the outer loop at a single (x*, sense, tolerance level).
/// `x_star` is in original units. Throws SolverError on a non-finite
/// Lagrangian or gradient.
BoundResult solve_bound(const ProblemSetup& setup, double x_star, Sense sense, double eps_rel,
                        const SolverConfig& config, std::uint64_t seed);

/// 15 quantiles of observed X from q = 0.05 to 0.95, original units.
std::vector<double> default_x_star_grid(const Dataset& dataset);
std::vector<double> resolve_x_star_grid(const Dataset& dataset, const SolverConfig& config);

using ResultCallback = std::function<void(const BoundResult&)>;

/// Every (x*, sense, tolerance level) solve, run on `jobs` workers. Solves
/// at the same x* share the seed derive_seed(config.seed, index of x*).
/// Failed solves are recorded with their error and the sweep continues.
/// `on_result` is called under a lock as each solve finishes. Results are
/// returned sorted by (x*, sense, eps_rel).
std::vector<BoundResult> sweep(const SolverConfig& config, const Dataset& dataset,
                               const ResponseBasis& basis, int jobs = 1,
                               const ResultCallback& on_result = {});

}  // namespace ivbounds
