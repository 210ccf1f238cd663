#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ccs/simulate.hpp"
#include "run_config.hpp"

namespace ccs::cli {

// Header `t,<state labels>,<input labels>,<lambda labels>`, 17 significant
// digits, comma separated, newline terminated. Identical trajectories yield
// byte-identical files.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

void write_json_file(const std::string& path, const nlohmann::json& doc);

// Config echo + versions + timings + the files the run produced.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunConfig& cfg, double wall_time_s,
                    const std::vector<std::string>& outputs);

// Polyline phase portrait of two labeled columns ("t" or any state/input/
// lambda label). Best effort: returns false (after printing a warning) instead
// of throwing, and never affects exit codes.
bool write_phase_svg(const std::string& path, const Trajectory& traj, const std::string& x_label,
                     const std::string& y_label);

// Plots requested in the config, falling back to `fallback` when none given.
// Returns the files actually written.
std::vector<std::string> write_plots(const std::string& out_dir, const Trajectory& traj,
                                     const std::vector<PlotSpec>& plots,
                                     const std::vector<PlotSpec>& fallback);

}  // namespace ccs::cli
