#pragma once

#include <string>
#include <vector>

#include "ccs/collocation.hpp"
#include "ccs/nlp.hpp"
#include "ccs/simulate.hpp"
#include "run_config.hpp"

namespace ccs::cli {

struct VerifyCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string comparison = "<=";  // value vs threshold
  bool pass = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool pass = false;
};

// Isolated-vs-full equivalence suite plus pointwise coupling-solve checks.
VerifyReport run_verify(const RunConfig& cfg);

struct OptimizeArtifacts {
  NlpSolution solution;
  PostcheckReport post;
  double full_orbit_periodicity_inf = 0.0;  // reconstructed full-order orbit
  Trajectory node_trajectory;
  Trajectory full_orbit;
  double period = 0.0;
};

// Periodic-orbit transcription and solve on the isolated subsystem of vertex 0.
OptimizeArtifacts run_optimize(const RunConfig& cfg);

// Isolated or full closed-loop integration per config.
Trajectory run_simulate(const RunConfig& cfg);

// Command entry points: run, write artifacts into cfg.out, return the exit
// code (0 success, 1 check/solver failure; ConfigError propagates for 2).
int cmd_verify(const RunConfig& cfg);
int cmd_optimize(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);

}  // namespace ccs::cli
