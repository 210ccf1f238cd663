#include "ccs/ccs.hpp"

#include <sstream>

namespace ccs {
namespace {

void check_vec(const char* map, const char* role, Eigen::Index got, Eigen::Index want) {
  if (got != want) {
    std::ostringstream os;
    os << "map '" << map << "': " << role << " has size " << got << ", expected " << want;
    throw DimensionError(os.str());
  }
}

void check_mat(const char* map, Eigen::Index rows, Eigen::Index cols, Eigen::Index want_rows,
               Eigen::Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    std::ostringstream os;
    os << "map '" << map << "': returned " << rows << "x" << cols << ", expected " << want_rows
       << "x" << want_cols;
    throw DimensionError(os.str());
  }
}

}  // namespace

Eigen::VectorXd SubsystemModel::f_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  check_vec("f", "x", x.size(), n_x);
  check_vec("f", "z", z.size(), n_z);
  Eigen::VectorXd out = f(x, z);
  check_vec("f", "result", out.size(), n_x);
  return out;
}

Eigen::MatrixXd SubsystemModel::g_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  check_vec("g", "x", x.size(), n_x);
  check_vec("g", "z", z.size(), n_z);
  Eigen::MatrixXd out = g(x, z);
  check_mat("g", out.rows(), out.cols(), n_x, n_u);
  return out;
}

Eigen::VectorXd SubsystemModel::p_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  check_vec("p", "x", x.size(), n_x);
  check_vec("p", "z", z.size(), n_z);
  Eigen::VectorXd out = p(x, z);
  check_vec("p", "result", out.size(), n_z);
  return out;
}

Eigen::MatrixXd SubsystemModel::q_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  check_vec("q", "x", x.size(), n_x);
  check_vec("q", "z", z.size(), n_z);
  Eigen::MatrixXd out = q(x, z);
  check_mat("q", out.rows(), out.cols(), n_z, n_u);
  return out;
}

Eigen::MatrixXd SubsystemModel::g_breve_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                           const Eigen::VectorXd& z_other) const {
  check_vec("g_breve", "x", x.size(), n_x);
  check_vec("g_breve", "z", z.size(), n_z);
  check_vec("g_breve", "z_other", z_other.size(), n_z);
  Eigen::MatrixXd out = g_breve(x, z, z_other);
  check_mat("g_breve", out.rows(), out.cols(), n_x, n_lambda);
  return out;
}

Eigen::MatrixXd SubsystemModel::q_breve_at(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                           const Eigen::VectorXd& z_other) const {
  check_vec("q_breve", "x", x.size(), n_x);
  check_vec("q_breve", "z", z.size(), n_z);
  check_vec("q_breve", "z_other", z_other.size(), n_z);
  Eigen::MatrixXd out = q_breve(x, z, z_other);
  check_mat("q_breve", out.rows(), out.cols(), n_z, n_lambda);
  return out;
}

void validate(const CcsModel& model) {
  if (model.sub[0].n_z != model.sub[1].n_z)
    throw DimensionError("coupled state dimension differs between vertices; c_e = z_i - z_j "
                         "requires equal n_z");
  if (model.sub[0].n_lambda != model.sub[1].n_lambda)
    throw DimensionError("coupling input dimension differs between vertices");
  for (int v = 0; v < 2; ++v) {
    const auto& s = model.sub[v];
    if (!s.f || !s.g || !s.p || !s.q || !s.g_breve || !s.q_breve)
      throw DimensionError("subsystem " + std::to_string(v) + " has unset maps");
    if (model.x_box[v].dim() != s.n_x || model.z_box[v].dim() != s.n_z ||
        model.u_box[v].dim() != s.n_u)
      throw DimensionError("admissible box dimensions disagree with subsystem " +
                           std::to_string(v));
  }
}

Eigen::VectorXd CcsState::lambda_on(int tail) const {
  if (lambda[tail]) return *lambda[tail];
  if (lambda[CouplingGraph::other(tail)]) return -*lambda[CouplingGraph::other(tail)];
  throw std::logic_error("CcsState: no coupling input populated");
}

bool CcsState::lambda_antisymmetric(double tol) const {
  if (!lambda[0] || !lambda[1]) return true;
  return ((*lambda[0]) + (*lambda[1])).cwiseAbs().maxCoeff() <= tol;
}

SubsystemRhs eval_rhs(const CcsModel& model, int v, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& z_self, const Eigen::VectorXd& z_other,
                      const Eigen::VectorXd& u, const Eigen::VectorXd& lambda_e) {
  const auto& s = model.sub[v];
  if (u.size() != s.n_u)
    throw DimensionError("eval_rhs: u has size " + std::to_string(u.size()) + ", expected " +
                         std::to_string(s.n_u));
  if (lambda_e.size() != s.n_lambda)
    throw DimensionError("eval_rhs: lambda_e has size " + std::to_string(lambda_e.size()) +
                         ", expected " + std::to_string(s.n_lambda));
  SubsystemRhs rhs;
  rhs.xdot = s.f_at(x, z_self) + s.g_at(x, z_self) * u +
             s.g_breve_at(x, z_self, z_other) * lambda_e;
  rhs.zdot = s.p_at(x, z_self) + s.q_at(x, z_self) * u +
             s.q_breve_at(x, z_self, z_other) * lambda_e;
  return rhs;
}

Eigen::VectorXd coupling_residual(const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j) {
  if (z_i.size() != z_j.size())
    throw DimensionError("coupling_residual: z_i and z_j sizes differ");
  return z_i - z_j;
}

Eigen::VectorXd coupling_velocity_residual(const CcsModel& model,
                                           const std::array<Eigen::VectorXd, 2>& x,
                                           const std::array<Eigen::VectorXd, 2>& z,
                                           const std::array<Eigen::VectorXd, 2>& u,
                                           const Eigen::VectorXd& lambda_e) {
  // lambda rides edge 0 -> 1; the reverse edge carries -lambda_e.
  SubsystemRhs r0 = eval_rhs(model, 0, x[0], z[0], z[1], u[0], lambda_e);
  SubsystemRhs r1 = eval_rhs(model, 1, x[1], z[1], z[0], u[1], Eigen::VectorXd(-lambda_e));
  return r0.zdot - r1.zdot;
}

CcsState embed(const CcsModel& model, int i, const Eigen::VectorXd& x_i,
               const std::array<Eigen::VectorXd, 2>& z) {
  const int j = CouplingGraph::other(i);
  CcsState s;
  s.x[i] = x_i;
  s.x[j] = Eigen::VectorXd::Zero(model.sub[j].n_x);
  s.z = z;
  return s;
}

std::function<CdsDeriv(const CcsState&)> closed_loop_rhs(
    const CcsModel& model, const std::array<VertexController, 2>& controllers,
    const LambdaSolver& lambda_solver) {
  return [&model, controllers, lambda_solver](const CcsState& state) {
    CdsDeriv d;
    d.u[0] = controllers[0](state);
    d.u[1] = controllers[1](state);
    d.lambda_e = lambda_solver(state, d.u);
    SubsystemRhs r0 = eval_rhs(model, 0, state.x[0], state.z[0], state.z[1], d.u[0], d.lambda_e);
    SubsystemRhs r1 = eval_rhs(model, 1, state.x[1], state.z[1], state.z[0], d.u[1],
                               Eigen::VectorXd(-d.lambda_e));
    d.xdot = {r0.xdot, r1.xdot};
    d.zdot = {r0.zdot, r1.zdot};
    return d;
  };
}

}  // namespace ccs
