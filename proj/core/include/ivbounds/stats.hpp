#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <boost/random/mersenne_twister.hpp>

namespace ivbounds {

/// Pseudo-random engine used throughout. Paired with the ziggurat normal
/// sampler from Boost.Random so draws are identical across standard libraries.
using Rng = boost::random::mt19937_64;

/// Fills `out` with iid standard normal draws.
void fill_standard_normal(Rng& rng, std::span<double> out);

/// Derives an independent stream seed from a master seed and a stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

double normal_cdf(double x);
double normal_quantile(double p);

/// Gaussianized plotting ranks: Phi^{-1}((j - 0.5) / n), j = 1..n.
std::vector<double> gaussianized_ranks(int n);

double mean(std::span<const double> v);
/// Population variance (divides by n).
double variance(std::span<const double> v);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against N(mu, sigma^2).
KsResult ks_test_normal(std::span<const double> sample, double mu, double sigma);

/// Two-sample Kolmogorov-Smirnov test.
KsResult ks_test_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov survival function Q(lambda).
double kolmogorov_survival(double lambda);

}  // namespace ivbounds
