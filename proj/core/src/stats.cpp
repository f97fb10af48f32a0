#include "ivbounds/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/normal_distribution.hpp>

#include "ivbounds/errors.hpp"

namespace ivbounds {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double ks_p_value(double d, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

}  // namespace

void fill_standard_normal(Rng& rng, std::span<double> out) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : out) v = dist(rng);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0, 1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

std::vector<double> gaussianized_ranks(int n) {
  if (n < 1) throw ConfigError("gaussianized_ranks: n must be positive");
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) r[j] = normal_quantile((j + 0.5) / n);
  return r;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

double kolmogorov_survival(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_normal(std::span<const double> sample, double mu, double sigma) {
  if (sample.empty()) throw DataError("ks_test_normal: empty sample");
  if (!(sigma > 0.0)) throw ConfigError("ks_test_normal: sigma must be positive");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf((sorted[i] - mu) / sigma);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, ks_p_value(d, n)};
}

KsResult ks_test_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_test_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

}  // namespace ivbounds
