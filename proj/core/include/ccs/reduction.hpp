#pragma once

#include <Eigen/Dense>

#include "ccs/ccs.hpp"

// Reduction of the coupled pair to an isolated subsystem: with vertex j held
// on its zero-dynamics manifold {x_j = 0}, the pair (u_j, lambda_e) is pinned
// by a linear system stacking the manifold-invariance condition of vertex j
// with cdot_e = 0. Solving it for unit inputs yields the affine relation
// lambda_e = A_e u_i + b_e and u_j = uZ_A u_i + uZ_b, which substitutes the
// coupling away and leaves a self-contained model in (x_i, z_i, z_j).

namespace ccs {

// Reciprocal-condition floor below which coupling solves are rejected.
inline constexpr double kMinCouplingRcond = 1e-10;

// Stacked block matrix
//   [ g_j(0, z_j)   g_breve_ebar(0, z)                      ]
//   [ q_j(0, z_j)   q_breve_e(x_i, z) + q_breve_ebar(0, z)  ]
// with rows (n_x_j + n_z) and columns (n_u_j + n_lambda). Row reduction and
// the sign convention for lambda are handled in coupling_solve, not here.
Eigen::MatrixXd qbreve_matrix(const CcsModel& model, int i, const Eigen::VectorXd& x_i,
                              const std::array<Eigen::VectorXd, 2>& z);

struct CouplingSolution {
  Eigen::VectorXd u_j;       // vertex-j input rendering {x_j = 0} invariant
  Eigen::VectorXd lambda_e;  // coupling input on edge (i -> j)
  double rcond = 0.0;        // of the row-reduced square system
};

// Solves the stacked system after dropping identically-zero rows (for
// mechanical systems in normal form these are the velocity rows). The
// returned lambda_e satisfies both the invariance condition (with
// lambda_ebar = -lambda_e) and cdot_e = 0 on the retained rows. Throws
// SingularityError when the reduced system is non-square or ill-conditioned.
CouplingSolution coupling_solve(const CcsModel& model, int i, const Eigen::VectorXd& x_i,
                                const std::array<Eigen::VectorXd, 2>& z,
                                const Eigen::VectorXd& u_i);

// Affine dependence of the coupling pair on u_i at a fixed (x_i, z).
struct RelationEval {
  Eigen::MatrixXd A_e;   // n_lambda x n_u_i
  Eigen::VectorXd b_e;   // n_lambda
  Eigen::MatrixXd uZ_A;  // n_u_j x n_u_i
  Eigen::VectorXd uZ_b;  // n_u_j
  double rcond = 0.0;

  Eigen::VectorXd lambda(const Eigen::VectorXd& u_i) const { return A_e * u_i + b_e; }
  Eigen::VectorXd u_j(const Eigen::VectorXd& u_i) const { return uZ_A * u_i + uZ_b; }
};

// Lazily evaluated relation for edge (i -> j); owns a copy of the model.
class CouplingRelation {
 public:
  CouplingRelation() = default;
  CouplingRelation(CcsModel model, int vertex);

  int vertex() const { return vertex_; }
  const CcsModel& model() const { return model_; }

  // One stacked factorization, 1 + n_u_i solves (bias plus unit inputs).
  RelationEval at(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;

  Eigen::MatrixXd A_e(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::VectorXd b_e(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::MatrixXd uZ_A(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::VectorXd uZ_b(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;

  // Coupling input on the edge (i -> j), or its reversal when reversed = true
  // (lambda_ebar = -lambda_e).
  Eigen::VectorXd lambda_at(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z,
                            const Eigen::VectorXd& u_i, bool reversed = false) const;

 private:
  CcsModel model_;
  int vertex_ = 0;
};

CouplingRelation build_relation(const CcsModel& model, int i);

// Residual of the invariance condition with the relation substituted:
//   fZ_j(0, z) + gZ_j(0, z) u_i + g_j(0, z_j) (uZ_j - u_i)
// where fZ_j = f_j - g_breve_ebar b_e and gZ_j = g_j - g_breve_ebar A_e.
// Zero wherever the relation solve succeeded. x_i enters through the relation.
Eigen::VectorXd zero_invariance_residual(const CouplingRelation& relation,
                                         const Eigen::VectorXd& x_i,
                                         const std::array<Eigen::VectorXd, 2>& z,
                                         const Eigen::VectorXd& u_i);

// Same residual with an explicit candidate u_jZ instead of the relation's own;
// nonzero u_jZ mismatch shows up as g_j (u_jZ - relation u_jZ).
Eigen::VectorXd zero_invariance_residual(const CouplingRelation& relation,
                                         const Eigen::VectorXd& x_i,
                                         const std::array<Eigen::VectorXd, 2>& z,
                                         const Eigen::VectorXd& u_i, const Eigen::VectorXd& u_jZ);

struct IsolatedRhs {
  Eigen::VectorXd xdot_i;
  Eigen::VectorXd zdot_i;
  Eigen::VectorXd zdot_j;
  Eigen::VectorXd u_jZ;      // induced vertex-j input
  Eigen::VectorXd lambda_e;  // induced coupling input on edge (i -> j)
};

// Isolated control subsystem in state (x_i, z_i, z_j) with the coupling
// eliminated through the relation. The *_i maps absorb +breve terms, the *_j
// maps absorb -breve terms (reverse edge).
class IsolatedModel {
 public:
  IsolatedModel() = default;
  IsolatedModel(CcsModel model, int vertex);

  int vertex() const { return vertex_; }
  int other() const { return CouplingGraph::other(vertex_); }
  const CcsModel& base() const { return relation_.model(); }
  const CouplingRelation& relation() const { return relation_; }

  int n_x() const { return base().sub[vertex()].n_x; }
  int n_z() const { return base().n_z(); }
  int n_u() const { return base().sub[vertex()].n_u; }
  int n_x_j() const { return base().sub[other()].n_x; }
  int n_u_j() const { return base().sub[other()].n_u; }

  Eigen::VectorXd fZ_i(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::MatrixXd gZ_i(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::VectorXd pZ_i(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::MatrixXd qZ_i(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::VectorXd pZ_j(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::MatrixXd qZ_j(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::VectorXd fZ_j(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;
  Eigen::MatrixXd gZ_j(const Eigen::VectorXd& x_i, const std::array<Eigen::VectorXd, 2>& z) const;

 private:
  CouplingRelation relation_;
  int vertex_ = 0;
};

IsolatedModel make_isolated(const CcsModel& model, int i);

// One relation evaluation, then
//   xdot_i = f_i + g_i u_i + g_breve_e lambda,
//   zdot_i = p_i + q_i u_i + q_breve_e lambda,
//   zdot_j = p_j + q_j u_jZ - q_breve_ebar lambda.
IsolatedRhs isolated_rhs(const IsolatedModel& iso, const Eigen::VectorXd& x_i,
                         const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j,
                         const Eigen::VectorXd& u_i);

struct ManifoldResiduals {
  Eigen::VectorXd c;     // z_i - z_j
  Eigen::VectorXd cdot;  // zdot_i - zdot_j under the relation-induced inputs
};

ManifoldResiduals manifold_residuals(const IsolatedModel& iso, const Eigen::VectorXd& x_i,
                                     const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j,
                                     const Eigen::VectorXd& u_i);

}  // namespace ccs
