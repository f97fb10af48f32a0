#include "ivbounds/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "ivbounds/errors.hpp"
#include "ivbounds/stats.hpp"

namespace ivbounds {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    fields.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return fields;
}

std::optional<double> parse_double(const std::string& cell) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end) return std::nullopt;
  return v;
}

Dataset assemble(std::span<const double> z, std::span<const double> x, std::span<const double> y,
                 const ColumnNames& names, const std::string& context) {
  if (z.size() != x.size() || z.size() != y.size()) {
    throw DataError(context + ": columns must have identical length");
  }
  if (z.size() < 2) throw DataError(context + ": need at least 2 rows");
  const auto column = [&](std::span<const double> v, const std::string& name) {
    try {
      return whiten(v);
    } catch (const DataError& e) {
      throw DataError(context + " column '" + name + "': " + e.what());
    }
  };
  auto wz = column(z, names.z);
  auto wx = column(x, names.x);
  auto wy = column(y, names.y);
  Dataset d;
  d.z = std::move(wz.values);
  d.x = std::move(wx.values);
  d.y = std::move(wy.values);
  d.z_stats = wz.stats;
  d.x_stats = wx.stats;
  d.y_stats = wy.stats;
  return d;
}

}  // namespace

WhitenResult whiten(std::span<const double> values) {
  if (values.size() < 2) throw DataError("whiten: need at least 2 values");
  const double m = mean(values);
  const double sd = std::sqrt(variance(values));
  double scale = std::abs(m);
  for (double v : values) scale = std::max(scale, std::abs(v));
  if (!(sd > 1e-12 * scale) || sd == 0.0) throw DataError("whiten: zero variance");

  WhitenResult out;
  out.stats = {m, sd};
  out.values.reserve(values.size());
  for (double v : values) out.values.push_back(out.stats.apply(v));
  return out;
}

std::vector<double> unwhiten(std::span<const double> values, const Whitening& stats) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double w : values) out.push_back(stats.invert(w));
  return out;
}

EmpiricalCdf::EmpiricalCdf(std::span<const double> values) : sorted_(values.begin(), values.end()) {
  if (sorted_.empty()) throw DataError("empirical_cdf: empty input");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::cdf(double v) const {
  const std::size_t n = sorted_.size();
  if (v < sorted_.front()) return 0.0;
  if (v >= sorted_.back()) return 1.0;
  // Last index whose support value is <= v.
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), v);
  const auto i = static_cast<std::size_t>(it - sorted_.begin()) - 1;
  const double step = 1.0 / static_cast<double>(n - 1);
  const double lo = sorted_[i];
  const double hi = sorted_[i + 1];
  return (static_cast<double>(i) + (v - lo) / (hi - lo)) * step;
}

double EmpiricalCdf::inverse(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("empirical_cdf: quantile outside [0, 1]");
  const std::size_t n = sorted_.size();
  if (n == 1) return sorted_.front();
  const double t = q * static_cast<double>(n - 1);
  const auto i = std::min(static_cast<std::size_t>(t), n - 2);
  const double frac = t - static_cast<double>(i);
  return sorted_[i] + frac * (sorted_[i + 1] - sorted_[i]);
}

EmpiricalCdf empirical_cdf(std::span<const double> values) { return EmpiricalCdf(values); }

Dataset Dataset::from_columns(std::span<const double> z, std::span<const double> x,
                              std::span<const double> y) {
  return assemble(z, x, y, ColumnNames{}, "dataset");
}

Dataset load_csv(const std::filesystem::path& path, const ColumnNames& columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "': missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);

  const auto locate = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError("'" + path.string() + "': missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t iz = locate(columns.z);
  const std::size_t ix = locate(columns.x);
  const std::size_t iy = locate(columns.y);

  std::vector<double> z, x, y;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const auto cell = [&](std::size_t idx, const std::string& name) {
      if (idx >= fields.size()) {
        throw DataError("'" + path.string() + "' row " + std::to_string(line_no) + ", column '" +
                        name + "': missing value");
      }
      const auto v = parse_double(fields[idx]);
      if (!v) {
        throw DataError("'" + path.string() + "' row " + std::to_string(line_no) + ", column '" +
                        name + "': non-numeric value '" + fields[idx] + "'");
      }
      if (!std::isfinite(*v)) {
        throw DataError("'" + path.string() + "' row " + std::to_string(line_no) + ", column '" +
                        name + "': non-finite value");
      }
      return *v;
    };
    z.push_back(cell(iz, columns.z));
    x.push_back(cell(ix, columns.x));
    y.push_back(cell(iy, columns.y));
  }
  if (z.size() < 2) {
    throw DataError("'" + path.string() + "': need at least 2 data rows, found " +
                    std::to_string(z.size()));
  }

  return assemble(z, x, y, columns, "'" + path.string() + "'");
}

void write_csv(const std::filesystem::path& path, std::span<const double> z,
               std::span<const double> x, std::span<const double> y, const ColumnNames& columns) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << columns.z << ',' << columns.x << ',' << columns.y << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < z.size(); ++i) out << z[i] << ',' << x[i] << ',' << y[i] << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace ivbounds
