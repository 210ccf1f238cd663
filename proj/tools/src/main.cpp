#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

using ccs::cli::RunConfig;

struct Overrides {
  std::optional<std::string> model, out, system, controller, cost;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon, step, period, epsilon;
  std::optional<int> grid_k, vertex, points;
  bool free_period = false;
  bool break_relation = false;
  bool verbose = false;
};

void add_common_flags(CLI::App* cmd, std::string& config_path, Overrides& ov) {
  cmd->add_option("--config", config_path, "JSON config file (flags override its keys)");
  cmd->add_option("--out", ov.out, "output directory");
  cmd->add_option("--seed", ov.seed, "seed for randomized checks");
  cmd->add_option("--model", ov.model, "model name (split_cart, double_pendulum_pivot)");
}

void apply(const Overrides& ov, const std::string& command, RunConfig& cfg) {
  if (ov.model) cfg.model = *ov.model;
  if (ov.out) cfg.out = *ov.out;
  if (ov.seed) cfg.seed = *ov.seed;
  if (command == "simulate") {
    if (ov.horizon) cfg.simulate.horizon = *ov.horizon;
    if (ov.step) cfg.simulate.step = *ov.step;
    if (ov.system) cfg.simulate.system = *ov.system;
    if (ov.controller) cfg.simulate.controller = *ov.controller;
    if (ov.epsilon) cfg.simulate.epsilon = *ov.epsilon;
    if (ov.vertex) cfg.simulate.vertex = *ov.vertex;
  } else if (command == "verify") {
    if (ov.horizon) cfg.verify.horizon = *ov.horizon;
    if (ov.step) cfg.verify.step = *ov.step;
    if (ov.points) cfg.verify.points = *ov.points;
    if (ov.epsilon) cfg.verify.epsilon = *ov.epsilon;
    if (ov.break_relation) cfg.verify.break_relation = true;
  } else if (command == "optimize") {
    if (ov.grid_k) cfg.optimize.grid_k = *ov.grid_k;
    if (ov.period) cfg.optimize.period = *ov.period;
    if (ov.cost) cfg.optimize.cost = *ov.cost;
    if (ov.epsilon) cfg.optimize.contraction_epsilon = *ov.epsilon;
    if (ov.free_period) cfg.optimize.free_period = true;
    if (ov.verbose) cfg.optimize.solver.verbose = true;
  }
  // re-run the semantic checks the JSON parser applies
  ccs::cli::parse_config(ccs::cli::effective_config(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coupled control system toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  CLI::App* verify = app.add_subcommand("verify", "isolated-vs-full equivalence checks");
  add_common_flags(verify, config_path, ov);
  verify->add_option("--horizon", ov.horizon, "integration horizon [s]");
  verify->add_option("--step", ov.step, "integrator step [s]");
  verify->add_option("--points", ov.points, "random points for the coupling-solve checks");
  verify->add_option("--epsilon", ov.epsilon, "decay rate of the test feedback");
  verify->add_flag("--break-relation", ov.break_relation,
                   "corrupt the induced controller (the suite must then fail)");

  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop integration");
  add_common_flags(simulate, config_path, ov);
  simulate->add_option("--horizon", ov.horizon, "integration horizon [s]");
  simulate->add_option("--step", ov.step, "integrator step [s]");
  simulate->add_option("--system", ov.system, "isolated or full");
  simulate->add_option("--controller", ov.controller, "io_linear or zero");
  simulate->add_option("--epsilon", ov.epsilon, "io_linear decay rate");
  simulate->add_option("--vertex", ov.vertex, "driven vertex (0 or 1)");

  CLI::App* optimize = app.add_subcommand("optimize", "periodic orbit transcription");
  add_common_flags(optimize, config_path, ov);
  optimize->add_option("--grid-k", ov.grid_k, "collocation intervals K");
  optimize->add_option("--period", ov.period, "orbit period T [s]");
  optimize->add_option("--cost", ov.cost, "input_energy or base_accel");
  optimize->add_option("--epsilon", ov.epsilon, "contraction rate (enables the extra rows)");
  optimize->add_flag("--free-period", ov.free_period, "make T a decision variable");
  optimize->add_flag("--verbose", ov.verbose, "print solver progress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = ccs::cli::load_config_file(config_path);
    const std::string command = app.get_subcommands().front()->get_name();
    apply(ov, command, cfg);
    if (command == "verify") return ccs::cli::cmd_verify(cfg);
    if (command == "simulate") return ccs::cli::cmd_simulate(cfg);
    return ccs::cli::cmd_optimize(cfg);
  } catch (const ccs::cli::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
