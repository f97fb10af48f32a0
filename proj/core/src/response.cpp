#include "ivbounds/response.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "ivbounds/errors.hpp"
#include "ivbounds/preprocess.hpp"
#include "ivbounds/stats.hpp"

namespace ivbounds {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void permute(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
}

void check_xy(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("basis fit: x and y lengths differ");
  if (x.size() < 2) throw DataError("basis fit: need at least 2 observations");
}

}  // namespace

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::polynomial: return "polynomial";
    case BasisKind::mlp: return "mlp";
    case BasisKind::gp: return "gp";
  }
  return "unknown";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "polynomial" || name == "poly") return BasisKind::polynomial;
  if (name == "mlp") return BasisKind::mlp;
  if (name == "gp") return BasisKind::gp;
  throw ConfigError("unknown response family '" + name + "' (expected polynomial, mlp, or gp)");
}

ResponseBasis::ResponseBasis(Impl impl, nlohmann::json provenance)
    : impl_(std::move(impl)), provenance_(std::move(provenance)) {}

int ResponseBasis::k_count() const {
  return std::visit(Overloaded{
                        [](const PolynomialBasis& p) { return p.k; },
                        [](const MlpBasis& m) { return static_cast<int>(m.b2.size()); },
                        [](const GpBasis& g) { return static_cast<int>(g.values.rows()); },
                    },
                    impl_);
}

BasisKind ResponseBasis::kind() const {
  return std::visit(Overloaded{
                        [](const PolynomialBasis&) { return BasisKind::polynomial; },
                        [](const MlpBasis&) { return BasisKind::mlp; },
                        [](const GpBasis&) { return BasisKind::gp; },
                    },
                    impl_);
}

void ResponseBasis::evaluate(double x, std::span<double> out) const {
  std::visit(Overloaded{
                 [&](const PolynomialBasis& p) {
                   double v = 1.0;
                   for (int k = 0; k < p.k; ++k) {
                     out[k] = v;
                     v *= x;
                   }
                 },
                 [&](const MlpBasis& m) {
                   const Eigen::VectorXd h1 = (m.w1 * x + m.b1).cwiseMax(0.0);
                   const Eigen::VectorXd h2 = (m.w2 * h1 + m.b2).cwiseMax(0.0);
                   std::copy(h2.data(), h2.data() + h2.size(), out.begin());
                 },
                 [&](const GpBasis& g) {
                   const Eigen::Index n = g.grid.size();
                   Eigen::Index i = 0;
                   double frac = 0.0;
                   if (x <= g.grid(0)) {
                     i = 0;
                   } else if (x >= g.grid(n - 1)) {
                     i = n - 2;
                     frac = 1.0;
                   } else {
                     const double step = (g.grid(n - 1) - g.grid(0)) / static_cast<double>(n - 1);
                     i = std::min<Eigen::Index>(static_cast<Eigen::Index>((x - g.grid(0)) / step), n - 2);
                     frac = (x - g.grid(i)) / (g.grid(i + 1) - g.grid(i));
                   }
                   for (Eigen::Index k = 0; k < g.values.rows(); ++k) {
                     out[k] = (1.0 - frac) * g.values(k, i) + frac * g.values(k, i + 1);
                   }
                 },
             },
             impl_);
}

Eigen::VectorXd ResponseBasis::evaluate(double x) const {
  Eigen::VectorXd out(k_count());
  evaluate(x, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

Eigen::MatrixXd ResponseBasis::evaluate_many(std::span<const double> xs) const {
  const int k = k_count();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), k);
  std::vector<double> row(k);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    evaluate(xs[i], row);
    for (int c = 0; c < k; ++c) out(static_cast<Eigen::Index>(i), c) = row[c];
  }
  return out;
}

double ResponseBasis::combine(const Eigen::VectorXd& theta, double x) const {
  return theta.dot(evaluate(x));
}

nlohmann::json ResponseBasis::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind());
  j["k"] = k_count();
  j["provenance"] = provenance_;
  std::visit(Overloaded{
                 [](const PolynomialBasis&) {},
                 [&](const MlpBasis& m) {
                   j["w1"] = vector_to_json(m.w1);
                   j["b1"] = vector_to_json(m.b1);
                   j["w2"] = matrix_to_json(m.w2);
                   j["b2"] = vector_to_json(m.b2);
                   j["output_weights"] = vector_to_json(m.output_weights);
                 },
                 [&](const GpBasis& g) {
                   j["grid"] = vector_to_json(g.grid);
                   j["values"] = matrix_to_json(g.values);
                 },
             },
             impl_);
  return j;
}

ResponseBasis ResponseBasis::from_json(const nlohmann::json& j) {
  const BasisKind kind = basis_kind_from_string(j.at("kind").get<std::string>());
  const nlohmann::json provenance = j.value("provenance", nlohmann::json::object());
  switch (kind) {
    case BasisKind::polynomial: {
      auto basis = polynomial_basis(j.at("k").get<int>());
      return ResponseBasis(basis.impl(), provenance);
    }
    case BasisKind::mlp: {
      MlpBasis m;
      m.w1 = vector_from_json(j.at("w1"));
      m.b1 = vector_from_json(j.at("b1"));
      m.w2 = matrix_from_json(j.at("w2"));
      m.b2 = vector_from_json(j.at("b2"));
      m.output_weights = vector_from_json(j.at("output_weights"));
      if (m.w2.rows() != m.b2.size() || m.w2.cols() != m.w1.size() || m.b1.size() != m.w1.size()) {
        throw DataError("mlp basis: inconsistent weight shapes");
      }
      return ResponseBasis(std::move(m), provenance);
    }
    case BasisKind::gp: {
      GpBasis g;
      g.grid = vector_from_json(j.at("grid"));
      g.values = matrix_from_json(j.at("values"));
      if (g.grid.size() < 2 || g.values.cols() != g.grid.size()) {
        throw DataError("gp basis: grid and values disagree");
      }
      return ResponseBasis(std::move(g), provenance);
    }
  }
  throw DataError("unreachable basis kind");
}

ResponseBasis polynomial_basis(int k_count) {
  if (k_count < 1 || k_count > kMaxPolynomialK) {
    throw ConfigError("polynomial basis: K must lie in [1, " + std::to_string(kMaxPolynomialK) +
                      "], got " + std::to_string(k_count));
  }
  return ResponseBasis(PolynomialBasis{k_count});
}

ResponseBasis fit_mlp_basis(std::span<const double> x, std::span<const double> y, int k_count,
                            const MlpFitConfig& config, std::uint64_t seed) {
  check_xy(x, y);
  if (k_count < 1) throw ConfigError("mlp basis: K must be >= 1");
  if (config.epochs <= 0 || config.batch_size < 1 || config.hidden_width < 1) {
    throw ConfigError("mlp basis: epochs, batch size and hidden width must be positive");
  }
  const int h = config.hidden_width;
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Rng rng(seed);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for weights and biases.
  const auto uniform = [&](Eigen::Index rows, Eigen::Index cols, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    boost::random::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    return m;
  };
  MlpBasis net;
  net.w1 = uniform(h, 1, 1.0);
  net.b1 = uniform(h, 1, 1.0);
  net.w2 = uniform(k_count, h, h);
  net.b2 = Eigen::VectorXd::Constant(k_count, 0.1);
  net.output_weights = uniform(k_count, 1, k_count);

  struct Moments {
    Eigen::MatrixXd m, v;
  };
  const auto zeros_like = [](const Eigen::MatrixXd& p) {
    return Moments{Eigen::MatrixXd::Zero(p.rows(), p.cols()), Eigen::MatrixXd::Zero(p.rows(), p.cols())};
  };
  Moments mw1 = zeros_like(net.w1), mb1 = zeros_like(net.b1), mw2 = zeros_like(net.w2),
          mb2 = zeros_like(net.b2), mout = zeros_like(net.output_weights);
  long step = 0;
  const auto adam = [&](auto& param, const Eigen::MatrixXd& grad, Moments& mom) {
    mom.m = config.beta1 * mom.m + (1.0 - config.beta1) * grad;
    mom.v = config.beta2 * mom.v + (1.0 - config.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    param.array() -= config.learning_rate * (mom.m.array() / c1) /
                     ((mom.v.array() / c2).sqrt() + config.adam_epsilon);
  };

  const Eigen::Map<const Eigen::RowVectorXd> xs(x.data(), n);
  const Eigen::Map<const Eigen::RowVectorXd> ys(y.data(), n);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    permute(order, rng);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::RowVectorXd bx(count), by(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        bx(i) = xs(static_cast<Eigen::Index>(order[start + i]));
        by(i) = ys(static_cast<Eigen::Index>(order[start + i]));
      }
      const Eigen::MatrixXd pre1 = (net.w1 * bx).colwise() + net.b1;
      const Eigen::MatrixXd h1 = pre1.cwiseMax(0.0);
      const Eigen::MatrixXd pre2 = (net.w2 * h1).colwise() + net.b2;
      const Eigen::MatrixXd h2 = pre2.cwiseMax(0.0);
      const Eigen::RowVectorXd out = net.output_weights.transpose() * h2;

      const Eigen::RowVectorXd d_out = 2.0 * (out - by) / static_cast<double>(count);
      const Eigen::VectorXd g_out = h2 * d_out.transpose();
      const Eigen::MatrixXd d_h2 =
          ((net.output_weights * d_out).array() * (pre2.array() > 0.0).cast<double>()).matrix();
      const Eigen::MatrixXd g_w2 = d_h2 * h1.transpose();
      const Eigen::VectorXd g_b2 = d_h2.rowwise().sum();
      const Eigen::MatrixXd d_h1 =
          ((net.w2.transpose() * d_h2).array() * (pre1.array() > 0.0).cast<double>()).matrix();
      const Eigen::VectorXd g_w1 = d_h1 * bx.transpose();
      const Eigen::VectorXd g_b1 = d_h1.rowwise().sum();

      ++step;
      adam(net.w1, g_w1, mw1);
      adam(net.b1, g_b1, mb1);
      adam(net.w2, g_w2, mw2);
      adam(net.b2, g_b2, mb2);
      adam(net.output_weights, g_out, mout);
    }
  }

  const Eigen::MatrixXd h1 = ((net.w1 * xs).colwise() + net.b1).cwiseMax(0.0);
  const Eigen::MatrixXd h2 = ((net.w2 * h1).colwise() + net.b2).cwiseMax(0.0);
  const double loss = (net.output_weights.transpose() * h2 - ys).squaredNorm() / static_cast<double>(n);
  if (!std::isfinite(loss)) {
    throw SolverError("mlp basis: training diverged (final loss " + std::to_string(loss) +
                      ", steps " + std::to_string(step) + ")");
  }
  int dead_units = 0;
  for (Eigen::Index k = 0; k < h2.rows(); ++k) {
    if (h2.row(k).maxCoeff() <= 0.0) ++dead_units;
  }
  nlohmann::json provenance = {
      {"seed", seed},          {"final_loss", loss},
      {"epochs", config.epochs}, {"batch_size", config.batch_size},
      {"learning_rate", config.learning_rate}, {"hidden_width", config.hidden_width},
      {"dead_units", dead_units},
  };
  return ResponseBasis(std::move(net), std::move(provenance));
}

ResponseBasis fit_mlp_basis(const Dataset& dataset, int k_count, const MlpFitConfig& config,
                            std::uint64_t seed) {
  return fit_mlp_basis(dataset.x, dataset.y, k_count, config, seed);
}

double gp_kernel(const GpFitConfig& config, double a, double b) {
  const double d = a - b;
  return std::pow(config.poly_offset + a * b, config.poly_degree) +
         config.rbf_variance * std::exp(-0.5 * d * d / (config.rbf_length_scale * config.rbf_length_scale));
}

ResponseBasis fit_gp_basis(std::span<const double> x, std::span<const double> y, int k_count,
                           const GpFitConfig& config, std::uint64_t seed) {
  check_xy(x, y);
  if (k_count < 1) throw ConfigError("gp basis: K must be >= 1");
  if (config.subsample < 1) {
    throw ConfigError("gp basis: subsample size must be positive");
  }
  if (!(config.white_noise > 0.0)) throw ConfigError("gp basis: white-noise variance must be positive");
  if (config.grid_size < 2) throw ConfigError("gp basis: grid needs at least 2 points");

  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double pad = config.range_extension * (*hi_it - *lo_it);
  GpBasis basis;
  basis.grid = Eigen::VectorXd::LinSpaced(config.grid_size, *lo_it - pad, *hi_it + pad);
  basis.values.resize(k_count, config.grid_size);

  const Eigen::Index g = basis.grid.size();
  Eigen::MatrixXd k_grid(g, g);
  for (Eigen::Index a = 0; a < g; ++a)
    for (Eigen::Index b = 0; b <= a; ++b)
      k_grid(a, b) = k_grid(b, a) = gp_kernel(config, basis.grid(a), basis.grid(b));

  Rng rng(seed);
  std::vector<std::size_t> order(x.size());
  // Small datasets are used whole.
  const Eigen::Index s = std::min<Eigen::Index>(config.subsample, static_cast<Eigen::Index>(x.size()));
  std::vector<double> jitters;
  for (int k = 0; k < k_count; ++k) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    permute(order, rng);

    Eigen::MatrixXd k_train(s, s);
    Eigen::MatrixXd k_cross(s, g);
    Eigen::VectorXd targets(s);
    for (Eigen::Index a = 0; a < s; ++a) {
      const double xa = x[order[a]];
      targets(a) = y[order[a]];
      for (Eigen::Index b = 0; b <= a; ++b) {
        k_train(a, b) = k_train(b, a) = gp_kernel(config, xa, x[order[b]]);
      }
      k_train(a, a) += config.white_noise;
      for (Eigen::Index b = 0; b < g; ++b) k_cross(a, b) = gp_kernel(config, xa, basis.grid(b));
    }
    const Eigen::LLT<Eigen::MatrixXd> train_chol(k_train);
    if (train_chol.info() != Eigen::Success) {
      throw SolverError("gp basis: training kernel matrix is not positive definite");
    }
    const Eigen::VectorXd mean = k_cross.transpose() * train_chol.solve(targets);
    const Eigen::MatrixXd v = train_chol.matrixL().solve(k_cross);
    Eigen::MatrixXd cov = k_grid - v.transpose() * v;
    cov = 0.5 * (cov + cov.transpose());

    const double scale = std::max(1e-300, cov.diagonal().cwiseAbs().mean());
    Eigen::LLT<Eigen::MatrixXd> cov_chol;
    double jitter = 1e-12 * scale;
    for (; jitter <= 1e-4 * scale; jitter *= 10.0) {
      cov_chol.compute(cov + jitter * Eigen::MatrixXd::Identity(g, g));
      if (cov_chol.info() == Eigen::Success) break;
    }
    if (cov_chol.info() != Eigen::Success) {
      throw SolverError("gp basis: posterior covariance is not positive definite after jitter");
    }
    jitters.push_back(jitter);

    Eigen::VectorXd noise(g);
    fill_standard_normal(rng, std::span<double>(noise.data(), static_cast<std::size_t>(g)));
    basis.values.row(k) = (mean + cov_chol.matrixL() * noise).transpose();
  }

  nlohmann::json provenance = {
      {"seed", seed},
      {"subsample", s},
      {"white_noise", config.white_noise},
      {"poly_degree", config.poly_degree},
      {"rbf_length_scale", config.rbf_length_scale},
      {"grid_size", config.grid_size},
      {"jitter", jitters},
  };
  return ResponseBasis(std::move(basis), std::move(provenance));
}

ResponseBasis fit_gp_basis(const Dataset& dataset, int k_count, const GpFitConfig& config,
                           std::uint64_t seed) {
  return fit_gp_basis(dataset.x, dataset.y, k_count, config, seed);
}

}  // namespace ivbounds
