#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <string>

#include "ccs/ccs.hpp"
#include "ccs/errors.hpp"

namespace ccs {

// Rigid-body model in generalized coordinates q:
//
//   D(q) q" + H(q, q') = B u + J_contact(q)^T F + J_couple^T lambda
//
// with H collecting Coriolis, centrifugal and gravity terms, B a constant
// actuation matrix, and holonomic contacts maintained by the force F.
// J_couple is the constant selector of the base (coupling) coordinates.
// An unset j_contact means no contacts; an unset jdot_contact with a set
// j_contact means the contact Jacobian is constant.
struct LagrangianModel {
  int n = 0;
  int base_dim = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> mass;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> bias;
  Eigen::MatrixXd input;     // B, n x n_u
  Eigen::MatrixXd j_couple;  // base_dim x n
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> j_contact;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      jdot_contact;
  std::string name;

  int n_u() const { return static_cast<int>(input.cols()); }
  Eigen::MatrixXd contact_jacobian(const Eigen::VectorXd& q) const;
  Eigen::MatrixXd contact_jacobian_dot(const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& qdot) const;
  Eigen::MatrixXd mass_at(const Eigen::VectorXd& q) const;
  Eigen::VectorXd bias_at(const Eigen::VectorXd& q, const Eigen::VectorXd& qdot) const;
};

// Monotone affine phase over one base coordinate, clamped to [0, 1].
struct PhaseSpec {
  int coord = 0;
  double start = 0.0;
  double end = 1.0;

  double tau(const Eigen::VectorXd& xi) const;
  // d tau / d xi[coord]; zero in the clamped regions.
  double slope(const Eigen::VectorXd& xi) const;
  double tau_dot(const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_dot) const;
};

// Virtual-constraint outputs y = S q - y_d(tau) with a Bezier desired curve.
// alpha holds one row of control points per output, degree + 1 columns.
struct OutputSpec {
  Eigen::MatrixXd alpha;
  PhaseSpec phase;
  Eigen::MatrixXd selection;  // S, n_y x n
  Eigen::MatrixXd mirror;     // coefficient mirroring matrix, n_y x n_y

  int degree() const { return static_cast<int>(alpha.cols()) - 1; }
  int n_y() const { return static_cast<int>(alpha.rows()); }
  Eigen::VectorXd y_actual(const Eigen::VectorXd& q) const;
};

struct BezierPoint {
  Eigen::VectorXd value;
  Eigen::VectorXd derivative;  // with respect to tau
};

// Bernstein-basis evaluation of all rows of alpha at tau (clamped to [0,1]).
BezierPoint bezier(const Eigen::MatrixXd& alpha, double tau);

// Control points of the tau-derivative curve: degree * (a_{k+1} - a_k).
Eigen::MatrixXd bezier_derivative_coeffs(const Eigen::MatrixXd& alpha);

// Mirrored output coefficients m * alpha (rows transform, phase is shared).
Eigen::MatrixXd mirror_coeffs(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& m);

struct ContactSolution {
  Eigen::VectorXd qddot;
  Eigen::VectorXd force;
};

// Solves the stacked system of the dynamics line and J q" + Jdot q' = 0 for
// the acceleration and the contact force. u or lambda_e may be empty vectors
// when the corresponding term is absent.
ContactSolution eliminate_contact_force(const LagrangianModel& m, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& qdot, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& lambda_e);

// Contact-eliminated short form D q" + h_bar = b_bar u + je_bar_t lambda.
struct ReducedDynamics {
  Eigen::MatrixXd d;
  Eigen::VectorXd h_bar;
  Eigen::MatrixXd b_bar;
  Eigen::MatrixXd je_bar_t;  // n x base_dim
};

ReducedDynamics reduce_contacts(const LagrangianModel& m, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& qdot);

// Coordinate change between (q, q') and the normal-form pair
// x = (y, y'), z = (xi, xi'). Requires T = [J_couple; S] square invertible,
// i.e. n_y + base_dim = n.
class MechanicalChart {
 public:
  MechanicalChart(LagrangianModel model, OutputSpec output);

  Eigen::VectorXd q_of(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::VectorXd qdot_of(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::VectorXd x_of(const Eigen::VectorXd& q, const Eigen::VectorXd& qdot) const;
  Eigen::VectorXd z_of(const Eigen::VectorXd& q, const Eigen::VectorXd& qdot) const;

  // J_y = S - y_d'(tau) (dtau/dxi) J_couple, so that y' = J_y q'.
  Eigen::MatrixXd j_y(const Eigen::VectorXd& q) const;
  // (d/dt J_y) q' = -y_d''(tau) tau_dot^2 for the affine clamped phase.
  Eigen::VectorXd jdot_y_qdot(const Eigen::VectorXd& q, const Eigen::VectorXd& qdot) const;

  const LagrangianModel& model() const { return model_; }
  const OutputSpec& output() const { return output_; }
  int n_y() const { return output_.n_y(); }
  int base_dim() const { return model_.base_dim; }

 private:
  LagrangianModel model_;
  OutputSpec output_;
  Eigen::MatrixXd t_inv_;
};

// Assembles the coupled normal-form model of two mechanical subsystems.
// Vertex states are x_i = (y_i, y_i'), coupled states z_i = (xi_i, xi_i'),
// with lambda living on the base coordinates (n_lambda = base_dim).
CcsModel to_ccs(const LagrangianModel& front, const LagrangianModel& rear,
                const OutputSpec& out_front, const OutputSpec& out_rear);

// Reduced dynamics on the pinned zero-dynamics manifold y = 0:
//   d_z xi" + h_z = jhat_t F + lambda,   j_z xi" + w_z = 0.
struct PinnedTerms {
  Eigen::MatrixXd d_z;     // base_dim x base_dim
  Eigen::VectorXd h_z;
  Eigen::MatrixXd j_z;     // contact Jacobian in reduced coordinates, n_c x base_dim
  Eigen::VectorXd w_z;     // (d/dt j_z) xi'
  Eigen::MatrixXd jhat_t;  // base rows of J_contact^T
};

class PinnedReduction {
 public:
  PinnedReduction(LagrangianModel model, OutputSpec output);

  // q on the manifold, from a damped Newton solve of y(q) = 0 at fixed xi.
  Eigen::VectorXd pinned_config(const Eigen::VectorXd& xi) const;
  Eigen::MatrixXd config_jacobian(const Eigen::VectorXd& xi) const;  // dq/dxi
  Eigen::MatrixXd config_jacobian_dot(const Eigen::VectorXd& xi,
                                      const Eigen::VectorXd& xi_dot) const;
  PinnedTerms terms(const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_dot) const;

  const MechanicalChart& chart() const { return chart_; }

 private:
  MechanicalChart chart_;
};

PinnedTerms pinned_zero_dynamics(const LagrangianModel& m, const OutputSpec& out,
                                 const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_dot);

// Rigid plastic impact: projects the pre-impact velocity onto the contact
// constraint J qdot = 0. No contacts leaves the velocity unchanged.
Eigen::VectorXd plastic_impact(const LagrangianModel& m, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& qdot_pre);

// Cart of mass cart_mass carrying two actuated pendula, decomposed into two
// half-cart subsystems glued along the cart position by a scalar lambda.
struct SplitCartParams {
  double cart_mass = 2.0;
  double pend_mass = 1.0;
  double length = 0.5;
  double gravity = 9.81;
};

struct SplitCartExample {
  LagrangianModel full;  // unsplit model, q = (s, th1, th2)
  std::array<LagrangianModel, 2> half;
  std::array<OutputSpec, 2> outputs;
  std::array<MechanicalChart, 2> charts;
  CcsModel ccs;
  SplitCartParams params;
};

SplitCartExample example_split_cart(const SplitCartParams& params = {});

// Two uniform rods sharing their distal joint (position xi in the plane);
// link 1 is pinned to the world at the other end through a contact.
struct DoublePendulumParams {
  double mass = 1.0;
  double length = 0.5;
  double gravity = 9.81;
};

struct DoublePendulumExample {
  std::array<LagrangianModel, 2> links;  // links[0] carries the pin contact
  std::array<OutputSpec, 2> outputs;
  std::array<MechanicalChart, 2> charts;
  CcsModel ccs;
  DoublePendulumParams params;
};

DoublePendulumExample example_double_pendulum_pivot(const DoublePendulumParams& params = {});

}  // namespace ccs
