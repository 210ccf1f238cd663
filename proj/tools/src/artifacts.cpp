#include "artifacts.hpp"

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#ifndef CCS_VERSION
#define CCS_VERSION "unknown"
#endif

namespace ccs::cli {
namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Column view over a trajectory: t first, then states, inputs, lambdas.
std::optional<Eigen::VectorXd> column_by_label(const Trajectory& traj,
                                               const std::string& label) {
  if (label == "t") return traj.times;
  for (size_t i = 0; i < traj.state_labels.size(); ++i)
    if (traj.state_labels[i] == label) return traj.states.col(i);
  for (size_t i = 0; i < traj.input_labels.size(); ++i)
    if (traj.input_labels[i] == label) return traj.inputs.col(i);
  for (size_t i = 0; i < traj.lambda_labels.size(); ++i)
    if (traj.lambda_labels[i] == label) return traj.lambdas.col(i);
  return std::nullopt;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "t";
  for (const auto& l : traj.state_labels) out << "," << l;
  for (const auto& l : traj.input_labels) out << "," << l;
  for (const auto& l : traj.lambda_labels) out << "," << l;
  out << "\n";
  for (int r = 0; r < traj.samples(); ++r) {
    out << fmt17(traj.times[r]);
    for (int c = 0; c < traj.states.cols(); ++c) out << "," << fmt17(traj.states(r, c));
    for (int c = 0; c < traj.inputs.cols(); ++c) out << "," << fmt17(traj.inputs(r, c));
    for (int c = 0; c < traj.lambdas.cols(); ++c) out << "," << fmt17(traj.lambdas(r, c));
    out << "\n";
  }
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump(2) << "\n";
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunConfig& cfg, double wall_time_s,
                    const std::vector<std::string>& outputs) {
  nlohmann::json doc{
      {"command", command},
      {"config", effective_config(cfg)},
      {"versions",
       {{"ccs_toolkit", CCS_VERSION},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)}}},
      {"timings", {{"total_s", wall_time_s}}},
      {"outputs", outputs}};
  write_json_file((std::filesystem::path(out_dir) / "manifest.json").string(), doc);
}

bool write_phase_svg(const std::string& path, const Trajectory& traj, const std::string& x_label,
                     const std::string& y_label) {
  try {
    const auto xs = column_by_label(traj, x_label);
    const auto ys = column_by_label(traj, y_label);
    if (!xs || !ys) {
      std::fprintf(stderr, "plot skipped: no column '%s' or '%s'\n", x_label.c_str(),
                   y_label.c_str());
      return false;
    }
    const double w = 640, hgt = 640, margin = 60;
    double x_lo = xs->minCoeff(), x_hi = xs->maxCoeff();
    double y_lo = ys->minCoeff(), y_hi = ys->maxCoeff();
    if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
    if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1.0;
    auto px = [&](double v) { return margin + (v - x_lo) / (x_hi - x_lo) * (w - 2 * margin); };
    auto py = [&](double v) { return hgt - margin - (v - y_lo) / (y_hi - y_lo) * (hgt - 2 * margin); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << hgt
        << "\" viewBox=\"0 0 " << w << " " << hgt << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"" << hgt - 15 << "\" text-anchor=\"middle\">"
        << x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << hgt / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << hgt / 2 << ")\">" << y_label << "</text>\n";
    out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"";
    for (int r = 0; r < traj.samples(); ++r)
      out << px((*xs)[r]) << "," << py((*ys)[r]) << (r + 1 < traj.samples() ? " " : "");
    out << "\"/>\n</svg>\n";
    return true;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "plot skipped: %s\n", e.what());
    return false;
  }
}

std::vector<std::string> write_plots(const std::string& out_dir, const Trajectory& traj,
                                     const std::vector<PlotSpec>& plots,
                                     const std::vector<PlotSpec>& fallback) {
  std::vector<std::string> written;
  for (const auto& p : plots.empty() ? fallback : plots) {
    const std::string file =
        p.file.empty() ? sanitize(p.x) + "_vs_" + sanitize(p.y) + ".svg" : p.file;
    const std::string path = (std::filesystem::path(out_dir) / file).string();
    if (write_phase_svg(path, traj, p.x, p.y)) written.push_back(file);
  }
  return written;
}

}  // namespace ccs::cli
