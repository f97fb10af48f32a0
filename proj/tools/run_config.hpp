#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ivbounds/data.hpp"
#include "ivbounds/response.hpp"
#include "ivbounds/solver.hpp"

namespace ivbounds::cli {

/// Everything a bounds or check run needs. Config files are flat JSON
/// objects: the keys below plus every SolverConfig key.
struct RunConfig {
  std::string input;
  ColumnNames columns;
  BasisKind basis = BasisKind::polynomial;
  int k = 2;
  /// Serialized basis to reuse instead of fitting one.
  std::string basis_file;
  std::string out = "ivbounds_out";
  /// Sweep workers; 0 means one per hardware thread.
  int jobs = 0;
  SolverConfig solver;

  std::vector<std::string> problems() const;
  void validate() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_file(const std::string& path, RunConfig base);
};

int resolved_jobs(int jobs);

}  // namespace ivbounds::cli
