#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ccs/ccs.hpp"
#include "ccs/reduction.hpp"

namespace ccs {

// Fixed-step trajectory log. Rows are samples; columns follow the labels.
struct Trajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd lambdas;
  std::vector<std::string> state_labels;
  std::vector<std::string> input_labels;
  std::vector<std::string> lambda_labels;
  std::string integrator = "rk4";
  double step = 0.0;

  int samples() const { return static_cast<int>(times.size()); }
};

struct BaumgarteGains {
  double alpha = 10.0;
  double beta = 25.0;
};

struct IntegratorConfig {
  double step = 1e-3;
  double horizon = 1.0;
  // Off by default: the relation keeps c_e at round-off already; enable for
  // long horizons where drift accumulates.
  std::optional<BaumgarteGains> baumgarte;
};

// One classical Runge-Kutta-4 step of ydot = rhs(t, y).
Eigen::VectorXd rk4_step(const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& rhs,
                         double t, const Eigen::VectorXd& y, double h);

using IsolatedController = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& x_i, const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j)>;

// Integrates the isolated subsystem (x_i, z_i, z_j). Initial conditions are
// projected onto the constraint manifold by overwriting z_j <- z_i. Logged
// inputs are [u_i, uZ_j]; lambdas hold the relation-induced coupling input.
// A singular relation mid-run raises SingularityError tagged with the time.
Trajectory simulate_isolated(const IsolatedModel& iso, const IsolatedController& controller,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& z_i0,
                             const Eigen::VectorXd& z_j0, const IntegratorConfig& cfg);

// Lambda solver enforcing cdot_e = 0 on the rows the coupling input can
// influence (identically-zero coefficient rows are dropped). With Baumgarte
// gains the target becomes -2 alpha c_e on those rows, plus -beta times the
// paired position rows when the dropped rows are exactly the top half
// (mechanical normal form).
LambdaSolver make_cdot_lambda_solver(const CcsModel& model,
                                     std::optional<BaumgarteGains> baumgarte = std::nullopt);

// Adapts an isolated-style feedback for vertex v into a full-state controller.
VertexController make_vertex_controller(int v, const IsolatedController& ctrl);

// Vertex-j controller induced by the relation: u_j = uZ(x_i, z; u_i(state)).
VertexController make_induced_controller(const CouplingRelation& relation,
                                         const VertexController& controller_i);

VertexController make_zero_controller(int n_u);

// Integrates the full coupled pair with lambda recomputed at every integrator
// stage. Initial conditions are projected (z_1 <- z_0). States are logged as
// [x_1, x_2, z_1, z_2], inputs as [u_1, u_2], lambda on the edge 1 -> 2.
Trajectory simulate_full_cds(const CcsModel& model,
                             const std::array<VertexController, 2>& controllers,
                             const std::array<Eigen::VectorXd, 2>& x0,
                             const std::array<Eigen::VectorXd, 2>& z0,
                             const IntegratorConfig& cfg);

// Lifts an isolated trajectory through the embedding (x_j = 0) into the
// full-state layout of simulate_full_cds, so the two can be differenced.
Trajectory reconstruct_full(const Trajectory& iso_traj, const IsolatedModel& iso);

struct TrajectoryError {
  Eigen::VectorXd state_max;  // per-column max abs difference
  Eigen::VectorXd state_rms;
  Eigen::VectorXd input_max;
  Eigen::VectorXd input_rms;
  Eigen::VectorXd lambda_max;
  Eigen::VectorXd lambda_rms;
  double max_state_error = 0.0;
  double max_input_error = 0.0;
  double max_lambda_error = 0.0;
};

// Requires identical time grids and column counts; throws DimensionError.
TrajectoryError trajectory_error(const Trajectory& a, const Trajectory& b);

// Feedback solving gZ_i u = -(fZ_i + eps x_i) on the rows where the input has
// authority, which drives x_i -> 0 at rate eps along solutions.
IsolatedController io_linearizing_controller(const IsolatedModel& iso, double eps);

using ResetMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

ResetMap identity_reset();

// reset(final state sample) - first state sample.
Eigen::VectorXd periodicity_residual(const Trajectory& traj, const ResetMap& reset);

// Max over samples of |c_e| = |z_i - z_j|, using the trajectory labels to
// locate the two coupled-state blocks. Works for both layouts.
double max_constraint_violation(const Trajectory& traj);

}  // namespace ccs
