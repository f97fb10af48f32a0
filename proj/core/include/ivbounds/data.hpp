#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ivbounds {

/// Affine standardization recorded at load time: w = (v - mean) / std.
struct Whitening {
  double mean = 0.0;
  double std = 1.0;

  double apply(double v) const { return (v - mean) / std; }
  double invert(double w) const { return w * std + mean; }
};

struct WhitenResult {
  std::vector<double> values;
  Whitening stats;
};

/// Standardizes `values` with the population standard deviation.
/// Throws DataError for fewer than two values or zero variance.
WhitenResult whiten(std::span<const double> values);

std::vector<double> unwhiten(std::span<const double> values, const Whitening& stats);

/// Piecewise-linear empirical CDF through the order statistics at plotting
/// positions (i - 1) / (n - 1). A single support point is a step at that value.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::span<const double> values);

  double cdf(double v) const;
  /// Quantile for q in [0, 1]; q outside that range throws ConfigError.
  double inverse(double q) const;

  const std::vector<double>& support() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

EmpiricalCdf empirical_cdf(std::span<const double> values);

struct ColumnNames {
  std::string z = "z";
  std::string x = "x";
  std::string y = "y";
};

/// Observational (z, x, y) triples, stored whitened alongside the statistics
/// needed to return to original units.
struct Dataset {
  std::vector<double> z;
  std::vector<double> x;
  std::vector<double> y;
  Whitening z_stats;
  Whitening x_stats;
  Whitening y_stats;

  std::size_t size() const { return z.size(); }

  /// Builds a whitened dataset from columns in original units.
  static Dataset from_columns(std::span<const double> z, std::span<const double> x,
                              std::span<const double> y);

  std::vector<double> original_z() const { return unwhiten(z, z_stats); }
  std::vector<double> original_x() const { return unwhiten(x, x_stats); }
  std::vector<double> original_y() const { return unwhiten(y, y_stats); }
};

/// Reads a headered, comma-separated file. Errors name the offending row
/// (1-based file line) and column.
Dataset load_csv(const std::filesystem::path& path, const ColumnNames& columns = {});

/// Writes original-unit columns with a `z,x,y` header (names configurable).
void write_csv(const std::filesystem::path& path, std::span<const double> z,
               std::span<const double> x, std::span<const double> y,
               const ColumnNames& columns = {});

}  // namespace ivbounds
