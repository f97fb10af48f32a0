#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "ivbounds/errors.hpp"

namespace ivbounds::cli {

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> list = solver.problems();
  if (input.empty()) list.push_back("input is required");
  if (columns.z.empty() || columns.x.empty() || columns.y.empty()) list.push_back("column names must be non-empty");
  if (k < 1) list.push_back("k must be >= 1");
  if (basis == BasisKind::polynomial && k > kMaxPolynomialK) {
    list.push_back("k must be <= " + std::to_string(kMaxPolynomialK) + " for the polynomial basis");
  }
  if (out.empty()) list.push_back("out must be non-empty");
  if (jobs < 0) list.push_back("jobs must be >= 0");
  return list;
}

void RunConfig::validate() const {
  const auto list = problems();
  if (list.empty()) return;
  std::ostringstream msg;
  msg << "invalid configuration:";
  for (const auto& p : list) msg << "\n  - " << p;
  throw ConfigError(msg.str());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = solver.to_json();
  j["input"] = input;
  j["z_column"] = columns.z;
  j["x_column"] = columns.x;
  j["y_column"] = columns.y;
  j["basis"] = to_string(basis);
  j["k"] = k;
  j["basis_file"] = basis_file;
  j["out"] = out;
  j["jobs"] = jobs;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json solver_keys = nlohmann::json::object();
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "input") c.input = v.get<std::string>();
      else if (key == "z_column") c.columns.z = v.get<std::string>();
      else if (key == "x_column") c.columns.x = v.get<std::string>();
      else if (key == "y_column") c.columns.y = v.get<std::string>();
      else if (key == "basis") c.basis = basis_kind_from_string(v.get<std::string>());
      else if (key == "k") c.k = v.get<int>();
      else if (key == "basis_file") c.basis_file = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "jobs") c.jobs = v.get<int>();
      else solver_keys[key] = v;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  c.solver = SolverConfig::from_json(solver_keys, c.solver);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return from_json(j, std::move(base));
}

int resolved_jobs(int jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace ivbounds::cli
