#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ccs/nlp.hpp"
#include "ccs/reduction.hpp"
#include "ccs/simulate.hpp"

namespace ccs {

// Uniform time grid t_k = period * k / intervals.
struct Grid {
  int intervals = 10;  // K
  double period = 1.0;

  double h() const { return period / intervals; }
  double time(int k) const { return period * k / intervals; }
};

struct IsoDims {
  int n_x = 0, n_z = 0, n_u = 0, n_u_j = 0;
  int n_chi() const { return n_x + 2 * n_z; }
};

IsoDims dims_of(const IsolatedModel& iso);

// One node's decision block, in packing order.
struct NodeVars {
  Eigen::VectorXd x, xdot, z_i, zdot_i, z_j, zdot_j, u_i, uZ_j;

  Eigen::VectorXd chi() const;
  Eigen::VectorXd chidot() const;
};

// Flat packing of all node blocks, with the free period appended last when
// enabled.
class DecisionLayout {
 public:
  DecisionLayout(IsoDims dims, Grid grid, bool free_period = false);

  int node_size() const { return node_size_; }
  int node_offset(int k) const;
  int size() const;
  int nodes() const { return grid_.intervals + 1; }
  bool free_period() const { return free_period_; }
  int period_index() const;  // -1 when the period is fixed

  double period(const Eigen::VectorXd& x) const;
  double h(const Eigen::VectorXd& x) const;

  NodeVars node(const Eigen::VectorXd& x, int k) const;
  void set_node(Eigen::VectorXd& x, int k, const NodeVars& v) const;

  const Grid& grid() const { return grid_; }
  const IsoDims& dims() const { return dims_; }

 private:
  IsoDims dims_;
  Grid grid_;
  bool free_period_;
  int node_size_;
};

// Zero-dynamics invariance residual at one node (drives u_j^Z consistency).
Eigen::VectorXd c1_zero(const IsolatedModel& iso, const NodeVars& v);

// Derivative-matching residual chidot - F(chi, u_i) at one node.
Eigen::VectorXd c2_dyn(const IsolatedModel& iso, const NodeVars& v);

// Cubic Hermite interpolation at the subinterval midpoint.
std::pair<Eigen::VectorXd, Eigen::VectorXd> hermite_center(const Eigen::VectorXd& chi_a,
                                                           const Eigen::VectorXd& chidot_a,
                                                           const Eigen::VectorXd& chi_b,
                                                           const Eigen::VectorXd& chidot_b,
                                                           double h);

// Midpoint defect of a generic field chidot = F(chi, u), with u held at the
// left-node value.
Eigen::VectorXd hermite_defect(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& chi_a, const Eigen::VectorXd& chidot_a, const Eigen::VectorXd& chi_b,
    const Eigen::VectorXd& chidot_b, const Eigen::VectorXd& u_left, double h);

// Collocation defect of the isolated dynamics over one subinterval.
Eigen::VectorXd c3_colloc(const IsolatedModel& iso, const NodeVars& left, const NodeVars& right,
                          double h);

// Periodicity defect reset(chi^K) - chi^0 plus one phase-anchor row pinning
// z_i^0[coord] to a value (removes the translation freedom of the orbit).
struct PhaseAnchor {
  int coord = 0;
  double value = 0.0;
};

Eigen::VectorXd c6_periodic(const NodeVars& first, const NodeVars& last, const ResetMap& reset,
                            const PhaseAnchor& anchor);

// Per-node inequality block, feasible when every entry is >= 0.
struct PathConstraint {
  std::string name;
  std::function<Eigen::VectorXd(const NodeVars&)> eval;
};

Eigen::VectorXd c5_path(const std::vector<PathConstraint>& constraints, const NodeVars& v);

// Componentwise |state| <= amp on chi.
PathConstraint amplitude_limit(const IsolatedModel& iso, double amp);
// Componentwise |lambda_e| <= ceiling, with lambda from the coupling relation.
PathConstraint lambda_ceiling(const IsolatedModel& iso, double ceiling);
// Friction-cone margin mu * f[normal] - |f[tangent]|.
double friction_cone_margin(const Eigen::VectorXd& force, double mu, int normal, int tangent);
// Ground-clearance margin value - floor.
double clearance_margin(double value, double floor_value);

struct TranscriptionOptions {
  std::string cost = "input_energy";  // or "base_accel"
  std::vector<PathConstraint> path;
  ResetMap reset;  // identity when unset
  PhaseAnchor anchor;
  bool free_period = false;
  double period_min = 0.2;
  double period_max = 5.0;
  std::optional<double> contraction_eps;  // extra rows xdot + eps x = 0
  double fd_step = 1e-6;
};

struct TranscribedProblem {
  NlpProblem nlp;
  DecisionLayout layout;
};

// Builds the periodic-orbit NLP over the isolated subsystem: equalities are
// the per-node invariance and dynamics residuals, the interval collocation
// defects, optional contraction rows, and the periodicity block; inequalities
// stack the path constraints per node; decision bounds come from the model's
// admissible boxes (derivatives unbounded).
TranscribedProblem assemble(const IsolatedModel& iso, const Grid& grid,
                            const TranscriptionOptions& opt = {});

// Small-amplitude periodic seed: sinusoid on the internal states and base
// positions with consistent derivatives, zero inputs.
Eigen::VectorXd make_initial_guess(const DecisionLayout& layout);

// Node-sampled trajectory of a decision vector, with lambda recovered from
// the coupling relation at each node.
Trajectory solution_to_trajectory(const IsolatedModel& iso, const DecisionLayout& layout,
                                  const Eigen::VectorXd& x);

struct PostcheckReport {
  double equality_inf = 0.0;     // re-evaluated transcription residual
  double periodicity_inf = 0.0;  // reset(chi^K) - chi^0
  // return error of an RK4 re-simulation from node 0 over one period
  double resim_return_inf_zoh = 0.0;     // u held at left node values
  double resim_return_inf_linear = 0.0;  // u interpolated linearly
};

PostcheckReport postcheck(const IsolatedModel& iso, const DecisionLayout& layout,
                          const Eigen::VectorXd& x, const TranscriptionOptions& opt,
                          int substeps_per_interval = 20);

}  // namespace ccs
