#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccs/ccs.hpp"
#include "ccs/nlp.hpp"

namespace ccs::cli {

// Bad or inconsistent configuration; the driver maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct SimulateConfig {
  std::string system = "isolated";  // or "full"
  int vertex = 0;
  double horizon = 2.0;
  double step = 1e-3;
  std::string controller = "io_linear";  // or "zero"
  double epsilon = 1.0;
  bool baumgarte = false;
  std::optional<Eigen::VectorXd> x0;    // vertex state (isolated) / vertex-1 state (full)
  std::optional<Eigen::VectorXd> x0_2;  // vertex-2 state (full only)
  std::optional<Eigen::VectorXd> z0;    // shared coupled state
};

struct VerifyConfig {
  double horizon = 2.0;
  double step = 1e-3;
  int points = 100;
  double epsilon = 1.0;
  bool break_relation = false;  // corrupt the induced controller to force a failure
};

struct OptimizeConfig {
  int grid_k = 10;
  double period = 1.0;
  std::string cost = "input_energy";  // or "base_accel"
  std::string reset = "identity";     // custom resets go through the library API
  bool free_period = false;
  double period_min = 0.2;
  double period_max = 5.0;
  int anchor_coord = 0;
  double anchor_value = 0.0;
  std::optional<double> contraction_epsilon;
  std::optional<double> amplitude;
  std::optional<double> lambda_ceiling;
  int substeps = 20;  // re-simulation substeps per grid interval
  SolverConfig solver;
};

struct PlotSpec {
  std::string x;
  std::string y;
  std::string file;  // defaults to "<x>_vs_<y>.svg" sanitized
};

struct RunConfig {
  std::string model = "split_cart";
  nlohmann::json params = nlohmann::json::object();  // inline model parameters
  std::uint64_t seed = 0;
  std::string out = "ccs_run";
  SimulateConfig simulate;
  VerifyConfig verify;
  OptimizeConfig optimize;
  std::vector<PlotSpec> plots;
};

// Strict parse: unknown keys anywhere raise ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config_file(const std::string& path);

// Round-trip with defaults materialized; echoed into the manifest.
nlohmann::json effective_config(const RunConfig& cfg);

// Builds the named example model with the inline parameters applied.
// Unknown model names list the available ones.
CcsModel build_model(const RunConfig& cfg);

std::vector<std::string> available_models();

}  // namespace ccs::cli
