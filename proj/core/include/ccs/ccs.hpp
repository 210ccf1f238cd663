#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <string>

#include "ccs/errors.hpp"
#include "ccs/numeric.hpp"

// Two control subsystems exchanging a coupling input lambda_e across the edges
// of a two-vertex graph, subject to the state-matching constraint
// c_e(z_i, z_j) = z_i - z_j = 0 with lambda_e = -lambda_ebar.

namespace ccs {

// Fixed two-vertex graph. Edge e = (tail, head); ebar is its reversal.
struct Edge {
  int tail = 0;
  int head = 1;
  Edge reversed() const { return Edge{head, tail}; }
  bool operator==(const Edge& o) const { return tail == o.tail && head == o.head; }
};

struct CouplingGraph {
  static constexpr int kNumVertices = 2;
  static int other(int v) { return 1 - v; }
  static Edge edge(int tail) { return Edge{tail, other(tail)}; }
};

// Maps of one subsystem. f, g, p, q take (x_i, z_i); the breve maps take
// (x_i, z_i, z_other) because the coupling columns may depend on the
// neighbour's coupled state. All evaluations are shape-checked.
struct SubsystemModel {
  int n_x = 0;       // internal state dimension
  int n_z = 0;       // coupled state dimension (shared across vertices)
  int n_u = 0;       // control input dimension
  int n_lambda = 0;  // coupling input dimension (shared across vertices)

  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> g;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> p;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> q;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      g_breve;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      q_breve;

  // Checked evaluation; throws DimensionError naming the offending map.
  Eigen::VectorXd f_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::MatrixXd g_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::VectorXd p_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::MatrixXd q_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::MatrixXd g_breve_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& z_other) const;
  Eigen::MatrixXd q_breve_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& z_other) const;
};

// The coupled pair plus admissible boxes. Treat as immutable once built.
struct CcsModel {
  CouplingGraph graph;
  std::array<SubsystemModel, 2> sub;
  std::array<Box, 2> x_box;
  std::array<Box, 2> z_box;
  std::array<Box, 2> u_box;
  std::string name;

  int n_z() const { return sub[0].n_z; }
  int n_lambda() const { return sub[0].n_lambda; }
};

// Throws DimensionError unless both subsystems share n_z and n_lambda and all
// boxes have matching dimensions.
void validate(const CcsModel& model);

// Full coupled state. lambda[v] is the coupling input on the edge leaving
// vertex v; when both are populated they must satisfy lambda[1] = -lambda[0].
struct CcsState {
  std::array<Eigen::VectorXd, 2> x;
  std::array<Eigen::VectorXd, 2> z;
  std::array<std::optional<Eigen::VectorXd>, 2> lambda;

  // Coupling input on the edge leaving `tail`, derived by negation when only
  // the reverse edge is populated.
  Eigen::VectorXd lambda_on(int tail) const;
  bool lambda_antisymmetric(double tol = 0.0) const;
};

struct SubsystemRhs {
  Eigen::VectorXd xdot;
  Eigen::VectorXd zdot;
};

// Open-loop vertex field: xdot = f + g u + g_breve lambda_e,
// zdot = p + q u + q_breve lambda_e, with all maps of vertex v evaluated at
// (x, z_self) and the breve maps additionally at z_other.
SubsystemRhs eval_rhs(const CcsModel& model, int v, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& z_self, const Eigen::VectorXd& z_other,
                      const Eigen::VectorXd& u, const Eigen::VectorXd& lambda_e);

// c_e(z_i, z_j) = z_i - z_j.
Eigen::VectorXd coupling_residual(const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j);

// cdot_e = zdot_i - zdot_j with lambda_ebar = -lambda_e substituted. x, z, u
// are per-vertex; lambda_e rides the edge 0 -> 1.
Eigen::VectorXd coupling_velocity_residual(const CcsModel& model,
                                           const std::array<Eigen::VectorXd, 2>& x,
                                           const std::array<Eigen::VectorXd, 2>& z,
                                           const std::array<Eigen::VectorXd, 2>& u,
                                           const Eigen::VectorXd& lambda_e);

// Embedding iota: places (x_i, z) into the full state with x_j = 0.
CcsState embed(const CcsModel& model, int i, const Eigen::VectorXd& x_i,
               const std::array<Eigen::VectorXd, 2>& z);

// Feedback u_v = controllers[v](state) closing the loop; lambda_solver
// supplies lambda_e (edge 0 -> 1) from the current state, e.g. by enforcing
// cdot_e = 0 (see simulate module). Returns the combined field as per-vertex
// derivatives.
struct CdsDeriv {
  std::array<Eigen::VectorXd, 2> xdot;
  std::array<Eigen::VectorXd, 2> zdot;
  std::array<Eigen::VectorXd, 2> u;
  Eigen::VectorXd lambda_e;
};

using VertexController = std::function<Eigen::VectorXd(const CcsState&)>;
using LambdaSolver = std::function<Eigen::VectorXd(
    const CcsState&, const std::array<Eigen::VectorXd, 2>& u)>;

std::function<CdsDeriv(const CcsState&)> closed_loop_rhs(
    const CcsModel& model, const std::array<VertexController, 2>& controllers,
    const LambdaSolver& lambda_solver);

}  // namespace ccs
