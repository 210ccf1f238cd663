#include "ccs/reduction.hpp"

#include <sstream>

namespace ccs {
namespace {

// Pieces of the stacked linear system in the unknowns (u_j, mu) where mu is
// the coupling input on the reverse edge (j -> i). Keeping the printed block
// form here and negating mu on the way out gives the edge-(i -> j) input that
// actually zeroes the invariance and cdot residuals.
struct StackedSystem {
  Eigen::MatrixXd M;        // (n_x_j + n_z) x (n_u_j + n_lambda)
  Eigen::VectorXd bias;     // [-f_j(0, z_j); p_i - p_j]
  Eigen::MatrixXd u_coeff;  // [0; q_i]
  int n_u_j = 0;
  int n_lambda = 0;
};

StackedSystem assemble_stacked(const CcsModel& model, int i, const Eigen::VectorXd& x_i,
                               const std::array<Eigen::VectorXd, 2>& z) {
  const int j = CouplingGraph::other(i);
  const auto& si = model.sub[i];
  const auto& sj = model.sub[j];
  const Eigen::VectorXd xj_zero = Eigen::VectorXd::Zero(sj.n_x);

  const Eigen::MatrixXd g_j = sj.g_at(xj_zero, z[j]);
  const Eigen::MatrixXd gbr_ebar = sj.g_breve_at(xj_zero, z[j], z[i]);
  const Eigen::MatrixXd q_j = sj.q_at(xj_zero, z[j]);
  const Eigen::MatrixXd qbr_ebar = sj.q_breve_at(xj_zero, z[j], z[i]);
  const Eigen::MatrixXd qbr_e = si.q_breve_at(x_i, z[i], z[j]);

  StackedSystem s;
  s.n_u_j = sj.n_u;
  s.n_lambda = sj.n_lambda;
  s.M.resize(sj.n_x + sj.n_z, sj.n_u + sj.n_lambda);
  s.M.topLeftCorner(sj.n_x, sj.n_u) = g_j;
  s.M.topRightCorner(sj.n_x, sj.n_lambda) = gbr_ebar;
  s.M.bottomLeftCorner(sj.n_z, sj.n_u) = q_j;
  s.M.bottomRightCorner(sj.n_z, sj.n_lambda) = qbr_e + qbr_ebar;

  s.bias.resize(sj.n_x + sj.n_z);
  s.bias.head(sj.n_x) = -sj.f_at(xj_zero, z[j]);
  s.bias.tail(sj.n_z) = si.p_at(x_i, z[i]) - sj.p_at(xj_zero, z[j]);

  s.u_coeff.setZero(sj.n_x + sj.n_z, si.n_u);
  s.u_coeff.bottomRows(sj.n_z) = si.q_at(x_i, z[i]);
  return s;
}

struct ReducedSolver {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd;
  Eigen::VectorXd bias;
  Eigen::MatrixXd u_coeff;
  int n_u_j = 0;
  int n_lambda = 0;
  double rc = 0.0;

  // Solution [u_j; mu] for a given u_i.
  Eigen::VectorXd solve(const Eigen::VectorXd& u_i) const {
    return svd.solve(Eigen::VectorXd(bias + u_coeff * u_i));
  }
};

ReducedSolver reduce_and_factor(const StackedSystem& s) {
  const std::vector<int> live = nonzero_rows(s.M);
  const int unknowns = s.n_u_j + s.n_lambda;
  if (static_cast<int>(live.size()) != unknowns) {
    std::ostringstream os;
    os << "coupling solve: after dropping identically-zero rows the system is "
       << live.size() << "x" << unknowns << "; a square system (n_u_j + n_lambda rows) is "
       << "required";
    throw SingularityError(os.str());
  }
  ReducedSolver r;
  const Eigen::MatrixXd reduced = select_rows(s.M, live);
  r.svd.compute(reduced, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = r.svd.singularValues();
  r.rc = (sv.size() > 0 && sv[0] > 0.0) ? sv[sv.size() - 1] / sv[0] : 0.0;
  if (r.rc < kMinCouplingRcond) {
    std::ostringstream os;
    os << "coupling solve: reduced system is singular to working precision (rcond = " << r.rc
       << ")";
    throw SingularityError(os.str());
  }
  r.bias = select_rows(s.bias, live);
  r.u_coeff = select_rows(s.u_coeff, live);
  r.n_u_j = s.n_u_j;
  r.n_lambda = s.n_lambda;
  return r;
}

}  // namespace

Eigen::MatrixXd qbreve_matrix(const CcsModel& model, int i, const Eigen::VectorXd& x_i,
                              const std::array<Eigen::VectorXd, 2>& z) {
  return assemble_stacked(model, i, x_i, z).M;
}

CouplingSolution coupling_solve(const CcsModel& model, int i, const Eigen::VectorXd& x_i,
                                const std::array<Eigen::VectorXd, 2>& z,
                                const Eigen::VectorXd& u_i) {
  if (u_i.size() != model.sub[i].n_u)
    throw DimensionError("coupling_solve: u_i has size " + std::to_string(u_i.size()) +
                         ", expected " + std::to_string(model.sub[i].n_u));
  const ReducedSolver r = reduce_and_factor(assemble_stacked(model, i, x_i, z));
  const Eigen::VectorXd sol = r.solve(u_i);
  CouplingSolution out;
  out.u_j = sol.head(r.n_u_j);
  out.lambda_e = -sol.tail(r.n_lambda);  // printed blocks solve for the reverse edge
  out.rcond = r.rc;
  return out;
}

CouplingRelation::CouplingRelation(CcsModel model, int vertex)
    : model_(std::move(model)), vertex_(vertex) {
  validate(model_);
}

RelationEval CouplingRelation::at(const Eigen::VectorXd& x_i,
                                  const std::array<Eigen::VectorXd, 2>& z) const {
  const int n_u = model_.sub[vertex_].n_u;
  const ReducedSolver r = reduce_and_factor(assemble_stacked(model_, vertex_, x_i, z));

  RelationEval rel;
  rel.rcond = r.rc;
  const Eigen::VectorXd sol0 = r.solve(Eigen::VectorXd::Zero(n_u));
  rel.uZ_b = sol0.head(r.n_u_j);
  rel.b_e = -sol0.tail(r.n_lambda);
  rel.uZ_A.resize(r.n_u_j, n_u);
  rel.A_e.resize(r.n_lambda, n_u);
  for (int k = 0; k < n_u; ++k) {
    const Eigen::VectorXd solk = r.solve(Eigen::VectorXd::Unit(n_u, k)) - sol0;
    rel.uZ_A.col(k) = solk.head(r.n_u_j);
    rel.A_e.col(k) = -solk.tail(r.n_lambda);
  }
  return rel;
}

Eigen::MatrixXd CouplingRelation::A_e(const Eigen::VectorXd& x_i,
                                      const std::array<Eigen::VectorXd, 2>& z) const {
  return at(x_i, z).A_e;
}

Eigen::VectorXd CouplingRelation::b_e(const Eigen::VectorXd& x_i,
                                      const std::array<Eigen::VectorXd, 2>& z) const {
  return at(x_i, z).b_e;
}

Eigen::MatrixXd CouplingRelation::uZ_A(const Eigen::VectorXd& x_i,
                                       const std::array<Eigen::VectorXd, 2>& z) const {
  return at(x_i, z).uZ_A;
}

Eigen::VectorXd CouplingRelation::uZ_b(const Eigen::VectorXd& x_i,
                                       const std::array<Eigen::VectorXd, 2>& z) const {
  return at(x_i, z).uZ_b;
}

Eigen::VectorXd CouplingRelation::lambda_at(const Eigen::VectorXd& x_i,
                                            const std::array<Eigen::VectorXd, 2>& z,
                                            const Eigen::VectorXd& u_i, bool reversed) const {
  const Eigen::VectorXd lam = at(x_i, z).lambda(u_i);
  return reversed ? Eigen::VectorXd(-lam) : lam;
}

CouplingRelation build_relation(const CcsModel& model, int i) { return CouplingRelation(model, i); }

namespace {

Eigen::VectorXd invariance_with(const CcsModel& m, int i, const RelationEval& rel,
                                const std::array<Eigen::VectorXd, 2>& z,
                                const Eigen::VectorXd& u_i, const Eigen::VectorXd& u_jZ) {
  const int j = CouplingGraph::other(i);
  const auto& sj = m.sub[j];
  const Eigen::VectorXd xj_zero = Eigen::VectorXd::Zero(sj.n_x);

  const Eigen::MatrixXd g_j = sj.g_at(xj_zero, z[j]);
  const Eigen::MatrixXd gbr_ebar = sj.g_breve_at(xj_zero, z[j], z[i]);
  const Eigen::VectorXd fZ_j = sj.f_at(xj_zero, z[j]) - gbr_ebar * rel.b_e;
  const Eigen::MatrixXd gZ_j = g_j - gbr_ebar * rel.A_e;
  return fZ_j + gZ_j * u_i + g_j * (u_jZ - u_i);
}

}  // namespace

Eigen::VectorXd zero_invariance_residual(const CouplingRelation& relation,
                                         const Eigen::VectorXd& x_i,
                                         const std::array<Eigen::VectorXd, 2>& z,
                                         const Eigen::VectorXd& u_i) {
  const RelationEval rel = relation.at(x_i, z);
  return invariance_with(relation.model(), relation.vertex(), rel, z, u_i, rel.u_j(u_i));
}

Eigen::VectorXd zero_invariance_residual(const CouplingRelation& relation,
                                         const Eigen::VectorXd& x_i,
                                         const std::array<Eigen::VectorXd, 2>& z,
                                         const Eigen::VectorXd& u_i, const Eigen::VectorXd& u_jZ) {
  const RelationEval rel = relation.at(x_i, z);
  return invariance_with(relation.model(), relation.vertex(), rel, z, u_i, u_jZ);
}

IsolatedModel::IsolatedModel(CcsModel model, int vertex)
    : relation_(std::move(model), vertex), vertex_(vertex) {}

IsolatedModel make_isolated(const CcsModel& model, int i) { return IsolatedModel(model, i); }

Eigen::VectorXd IsolatedModel::fZ_i(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  const auto& si = base().sub[vertex_];
  return si.f_at(x_i, z[vertex_]) +
         si.g_breve_at(x_i, z[vertex_], z[other()]) * relation_.at(x_i, z).b_e;
}

Eigen::MatrixXd IsolatedModel::gZ_i(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  const auto& si = base().sub[vertex_];
  return si.g_at(x_i, z[vertex_]) +
         si.g_breve_at(x_i, z[vertex_], z[other()]) * relation_.at(x_i, z).A_e;
}

Eigen::VectorXd IsolatedModel::pZ_i(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  const auto& si = base().sub[vertex_];
  return si.p_at(x_i, z[vertex_]) +
         si.q_breve_at(x_i, z[vertex_], z[other()]) * relation_.at(x_i, z).b_e;
}

Eigen::MatrixXd IsolatedModel::qZ_i(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  const auto& si = base().sub[vertex_];
  return si.q_at(x_i, z[vertex_]) +
         si.q_breve_at(x_i, z[vertex_], z[other()]) * relation_.at(x_i, z).A_e;
}

Eigen::VectorXd IsolatedModel::pZ_j(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  const auto& sj = base().sub[other()];
  const Eigen::VectorXd xj_zero = Eigen::VectorXd::Zero(sj.n_x);
  const RelationEval rel = relation_.at(x_i, z);
  return sj.p_at(xj_zero, z[other()]) + sj.q_at(xj_zero, z[other()]) * rel.uZ_b -
         sj.q_breve_at(xj_zero, z[other()], z[vertex_]) * rel.b_e;
}

Eigen::MatrixXd IsolatedModel::qZ_j(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  // Includes q_j uZ_A so that zdot_j = pZ_j + qZ_j u_i holds exactly for every
  // u_i; the induced u_j is itself affine in u_i.
  const auto& sj = base().sub[other()];
  const Eigen::VectorXd xj_zero = Eigen::VectorXd::Zero(sj.n_x);
  const RelationEval rel = relation_.at(x_i, z);
  return sj.q_at(xj_zero, z[other()]) * rel.uZ_A -
         sj.q_breve_at(xj_zero, z[other()], z[vertex_]) * rel.A_e;
}

Eigen::VectorXd IsolatedModel::fZ_j(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  const auto& sj = base().sub[other()];
  const Eigen::VectorXd xj_zero = Eigen::VectorXd::Zero(sj.n_x);
  return sj.f_at(xj_zero, z[other()]) -
         sj.g_breve_at(xj_zero, z[other()], z[vertex_]) * relation_.at(x_i, z).b_e;
}

Eigen::MatrixXd IsolatedModel::gZ_j(const Eigen::VectorXd& x_i,
                                    const std::array<Eigen::VectorXd, 2>& z) const {
  const auto& sj = base().sub[other()];
  const Eigen::VectorXd xj_zero = Eigen::VectorXd::Zero(sj.n_x);
  return sj.g_at(xj_zero, z[other()]) -
         sj.g_breve_at(xj_zero, z[other()], z[vertex_]) * relation_.at(x_i, z).A_e;
}

IsolatedRhs isolated_rhs(const IsolatedModel& iso, const Eigen::VectorXd& x_i,
                         const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j,
                         const Eigen::VectorXd& u_i) {
  const int i = iso.vertex();
  const int j = iso.other();
  const CcsModel& m = iso.base();
  const auto& si = m.sub[i];
  const auto& sj = m.sub[j];

  std::array<Eigen::VectorXd, 2> z;
  z[i] = z_i;
  z[j] = z_j;
  const RelationEval rel = iso.relation().at(x_i, z);

  IsolatedRhs out;
  out.lambda_e = rel.lambda(u_i);
  out.u_jZ = rel.u_j(u_i);
  out.xdot_i = si.f_at(x_i, z_i) + si.g_at(x_i, z_i) * u_i +
               si.g_breve_at(x_i, z_i, z_j) * out.lambda_e;
  out.zdot_i = si.p_at(x_i, z_i) + si.q_at(x_i, z_i) * u_i +
               si.q_breve_at(x_i, z_i, z_j) * out.lambda_e;
  const Eigen::VectorXd xj_zero = Eigen::VectorXd::Zero(sj.n_x);
  out.zdot_j = sj.p_at(xj_zero, z_j) + sj.q_at(xj_zero, z_j) * out.u_jZ -
               sj.q_breve_at(xj_zero, z_j, z_i) * out.lambda_e;
  return out;
}

ManifoldResiduals manifold_residuals(const IsolatedModel& iso, const Eigen::VectorXd& x_i,
                                     const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j,
                                     const Eigen::VectorXd& u_i) {
  ManifoldResiduals r;
  r.c = coupling_residual(z_i, z_j);
  const IsolatedRhs rhs = isolated_rhs(iso, x_i, z_i, z_j, u_i);
  r.cdot = rhs.zdot_i - rhs.zdot_j;
  return r;
}

}  // namespace ccs
