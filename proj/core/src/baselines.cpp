#include "ivbounds/baselines.hpp"

#include <cmath>
#include <limits>

#include <boost/random/normal_distribution.hpp>

#include "ivbounds/errors.hpp"
#include "ivbounds/stats.hpp"

namespace ivbounds {

std::string to_string(Design design) {
  return design == Design::linear_gaussian ? "linear_gaussian" : "nonadditive";
}

Design design_from_string(const std::string& name) {
  if (name == "linear_gaussian" || name == "linear-gaussian") return Design::linear_gaussian;
  if (name == "nonadditive" || name == "non-additive") return Design::nonadditive;
  throw ConfigError("unknown design '" + name + "' (expected linear-gaussian or nonadditive)");
}

nlohmann::json SyntheticSpec::to_json() const {
  return {{"design", to_string(design)}, {"alpha", alpha}, {"beta", beta}, {"n", n}, {"seed", seed}};
}

SyntheticData generate(const SyntheticSpec& spec) {
  if (spec.n < 2) throw ConfigError("generate: n must be >= 2");
  Rng rng(spec.seed);
  boost::random::normal_distribution<double> normal;
  SyntheticData out;
  out.design = spec.design;
  out.z.resize(spec.n);
  out.x.resize(spec.n);
  out.y.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double z = normal(rng);
    const double c = normal(rng);
    const double ex = normal(rng);
    const double ey = normal(rng);
    const double x = spec.alpha * z + spec.beta * c + ex;
    out.z[i] = z;
    out.x[i] = x;
    out.y[i] = spec.design == Design::linear_gaussian ? x - 6.0 * c + ey : 0.3 * x * x - 1.5 * x * c + ey;
  }
  return out;
}

double true_effect(Design design, double x) {
  return design == Design::linear_gaussian ? x : 0.3 * x * x;
}

nlohmann::json TwoSlsResult::to_json() const {
  return {{"slope", slope}, {"intercept", intercept}, {"first_stage_f", first_stage_f}};
}

TwoSlsResult two_stage_least_squares(std::span<const double> z, std::span<const double> x,
                                     std::span<const double> y, double min_f) {
  const std::size_t n = z.size();
  if (x.size() != n || y.size() != n) throw DataError("2sls: columns differ in length");
  if (n < 3) throw DataError("2sls: need at least 3 observations");
  const double mz = mean(z), mx = mean(x), my = mean(y);
  double szz = 0.0, sxx = 0.0, szx = 0.0, szy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dz = z[i] - mz, dx = x[i] - mx;
    szz += dz * dz;
    sxx += dx * dx;
    szx += dz * dx;
    szy += dz * (y[i] - my);
  }
  TwoSlsResult out;
  const double r2 = (szz > 0.0 && sxx > 0.0) ? szx * szx / (szz * sxx) : 0.0;
  out.first_stage_f = r2 >= 1.0 ? std::numeric_limits<double>::infinity()
                                 : r2 * static_cast<double>(n - 2) / (1.0 - r2);
  if (szx == 0.0 || out.first_stage_f < min_f) {
    throw DataError("2sls: weak instrument (first-stage F = " + std::to_string(out.first_stage_f) +
                    ", need >= " + std::to_string(min_f) + ")");
  }
  out.slope = szy / szx;
  out.intercept = my - out.slope * mx;
  return out;
}

TwoSlsResult two_stage_least_squares(const Dataset& dataset, double min_f) {
  return two_stage_least_squares(dataset.original_z(), dataset.original_x(), dataset.original_y(), min_f);
}

}  // namespace ivbounds
