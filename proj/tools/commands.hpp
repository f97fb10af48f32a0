#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ivbounds/baselines.hpp"
#include "run_config.hpp"

namespace ivbounds::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kSolverAbort = 3 };

struct GenerateOptions {
  SyntheticSpec spec;
  std::string out;
  std::string truth;  // empty: <out without extension>.truth.json
  std::optional<std::vector<double>> x_star;
};

struct BaselineOptions {
  std::string input;
  ColumnNames columns;
  std::optional<std::vector<double>> x_star;
  std::string out;  // empty: stdout only
};

enum class CheckEta { identity, init, random };

struct CheckOptions {
  CheckEta eta = CheckEta::identity;
  bool corrupt_gradient = false;
  std::string report;  // empty: stdout
};

/// Fits or loads the configured basis.
ResponseBasis make_basis(const RunConfig& config, const Dataset& dataset);

int cmd_generate(const GenerateOptions& options, std::ostream& log);
int cmd_bounds(const RunConfig& config, std::ostream& log);
int cmd_baseline(const BaselineOptions& options, std::ostream& out, std::ostream& log);
int cmd_check(const RunConfig& config, const CheckOptions& options, std::ostream& out, std::ostream& log);

/// Parses arguments and dispatches; maps errors to exit codes.
int run(int argc, const char* const* argv);

}  // namespace ivbounds::cli
