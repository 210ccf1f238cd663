#include "ccs/simulate.hpp"

#include <cmath>
#include <sstream>

namespace ccs {
namespace {

std::vector<std::string> block_labels(const std::string& base, int n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) out.push_back(base + "[" + std::to_string(k) + "]");
  return out;
}

void append_labels(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

int steps_for(const IntegratorConfig& cfg) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("integrator step must be positive");
  if (!(cfg.horizon > 0.0)) throw std::invalid_argument("integrator horizon must be positive");
  return std::max(1, static_cast<int>(std::llround(cfg.horizon / cfg.step)));
}

// Columns of a label block, located by prefix; -1 when absent.
int label_block_start(const std::vector<std::string>& labels, const std::string& base) {
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    if (labels[i].rfind(base + "[", 0) == 0) return i;
  }
  return -1;
}

int label_block_len(const std::vector<std::string>& labels, const std::string& base) {
  int n = 0;
  for (const auto& l : labels)
    if (l.rfind(base + "[", 0) == 0) ++n;
  return n;
}

}  // namespace

Eigen::VectorXd rk4_step(const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& rhs,
                         double t, const Eigen::VectorXd& y, double h) {
  const Eigen::VectorXd k1 = rhs(t, y);
  const Eigen::VectorXd k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
  const Eigen::VectorXd k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
  const Eigen::VectorXd k4 = rhs(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory simulate_isolated(const IsolatedModel& iso, const IsolatedController& controller,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& z_i0,
                             const Eigen::VectorXd& z_j0, const IntegratorConfig& cfg) {
  const int steps = steps_for(cfg);
  const double h = cfg.horizon / steps;
  const int n_x = iso.n_x();
  const int n_z = iso.n_z();
  if (x0.size() != n_x || z_i0.size() != n_z || z_j0.size() != n_z)
    throw DimensionError("simulate_isolated: initial state has wrong dimensions");

  Eigen::VectorXd y(n_x + 2 * n_z);
  y << x0, z_i0, z_i0;  // z_j projected onto the manifold

  auto rhs = [&](double, const Eigen::VectorXd& s) {
    const Eigen::VectorXd x = s.head(n_x);
    const Eigen::VectorXd zi = s.segment(n_x, n_z);
    const Eigen::VectorXd zj = s.tail(n_z);
    const Eigen::VectorXd u = controller(x, zi, zj);
    const IsolatedRhs d = isolated_rhs(iso, x, zi, zj, u);
    Eigen::VectorXd out(s.size());
    out << d.xdot_i, d.zdot_i, d.zdot_j;
    return out;
  };

  Trajectory traj;
  traj.step = h;
  traj.times.resize(steps + 1);
  traj.states.resize(steps + 1, n_x + 2 * n_z);
  traj.inputs.resize(steps + 1, iso.n_u() + iso.n_u_j());
  traj.lambdas.resize(steps + 1, iso.base().n_lambda());
  append_labels(traj.state_labels, block_labels("x_i", n_x));
  append_labels(traj.state_labels, block_labels("z_i", n_z));
  append_labels(traj.state_labels, block_labels("z_j", n_z));
  append_labels(traj.input_labels, block_labels("u_i", iso.n_u()));
  append_labels(traj.input_labels, block_labels("uZ_j", iso.n_u_j()));
  append_labels(traj.lambda_labels, block_labels("lambda_e", iso.base().n_lambda()));

  double t = 0.0;
  for (int k = 0; k <= steps; ++k) {
    try {
      const Eigen::VectorXd x = y.head(n_x);
      const Eigen::VectorXd zi = y.segment(n_x, n_z);
      const Eigen::VectorXd zj = y.tail(n_z);
      const Eigen::VectorXd u = controller(x, zi, zj);
      const IsolatedRhs d = isolated_rhs(iso, x, zi, zj, u);
      traj.times[k] = t;
      traj.states.row(k) = y.transpose();
      traj.inputs.row(k).head(iso.n_u()) = u.transpose();
      traj.inputs.row(k).tail(iso.n_u_j()) = d.u_jZ.transpose();
      traj.lambdas.row(k) = d.lambda_e.transpose();
      if (k < steps) {
        y = rk4_step(rhs, t, y, h);
        t += h;
      }
    } catch (const SingularityError& e) {
      std::ostringstream os;
      os << e.what() << " (simulate_isolated, t = " << t << ")";
      throw SingularityError(os.str());
    }
  }
  return traj;
}

LambdaSolver make_cdot_lambda_solver(const CcsModel& model,
                                     std::optional<BaumgarteGains> baumgarte) {
  return [model, baumgarte](const CcsState& state, const std::array<Eigen::VectorXd, 2>& u) {
    const auto& s0 = model.sub[0];
    const auto& s1 = model.sub[1];
    const Eigen::MatrixXd coeff = s0.q_breve_at(state.x[0], state.z[0], state.z[1]) +
                                  s1.q_breve_at(state.x[1], state.z[1], state.z[0]);
    const Eigen::VectorXd drift =
        (s1.p_at(state.x[1], state.z[1]) + s1.q_at(state.x[1], state.z[1]) * u[1]) -
        (s0.p_at(state.x[0], state.z[0]) + s0.q_at(state.x[0], state.z[0]) * u[0]);

    const std::vector<int> live = nonzero_rows(coeff);
    const int n_lambda = model.n_lambda();
    if (static_cast<int>(live.size()) != n_lambda) {
      std::ostringstream os;
      os << "lambda solve: coupling acceleration system has " << live.size()
         << " usable rows for " << n_lambda << " unknowns";
      throw SingularityError(os.str());
    }

    Eigen::VectorXd target = Eigen::VectorXd::Zero(n_lambda);
    if (baumgarte) {
      const Eigen::VectorXd c = coupling_residual(state.z[0], state.z[1]);
      const int n_z = model.n_z();
      bool bottom_half = (n_z % 2 == 0) && (static_cast<int>(live.size()) == n_z / 2);
      for (size_t r = 0; bottom_half && r < live.size(); ++r)
        bottom_half = (live[r] == n_z / 2 + static_cast<int>(r));
      for (size_t r = 0; r < live.size(); ++r) {
        target[static_cast<int>(r)] = -2.0 * baumgarte->alpha * c[live[r]];
        if (bottom_half) target[static_cast<int>(r)] -= baumgarte->beta * c[live[r] - n_z / 2];
      }
    }

    const Eigen::MatrixXd a = select_rows(coeff, live);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double rc = (sv.size() > 0 && sv[0] > 0.0) ? sv[sv.size() - 1] / sv[0] : 0.0;
    if (rc < kMinCouplingRcond) {
      std::ostringstream os;
      os << "lambda solve: coupling acceleration system singular (rcond = " << rc << ")";
      throw SingularityError(os.str());
    }
    return Eigen::VectorXd(svd.solve(Eigen::VectorXd(target + select_rows(drift, live))));
  };
}

VertexController make_vertex_controller(int v, const IsolatedController& ctrl) {
  return [v, ctrl](const CcsState& state) {
    return ctrl(state.x[v], state.z[v], state.z[CouplingGraph::other(v)]);
  };
}

VertexController make_induced_controller(const CouplingRelation& relation,
                                         const VertexController& controller_i) {
  return [relation, controller_i](const CcsState& state) {
    const Eigen::VectorXd u_i = controller_i(state);
    return relation.at(state.x[relation.vertex()], state.z).u_j(u_i);
  };
}

VertexController make_zero_controller(int n_u) {
  return [n_u](const CcsState&) { return Eigen::VectorXd::Zero(n_u); };
}

Trajectory simulate_full_cds(const CcsModel& model,
                             const std::array<VertexController, 2>& controllers,
                             const std::array<Eigen::VectorXd, 2>& x0,
                             const std::array<Eigen::VectorXd, 2>& z0,
                             const IntegratorConfig& cfg) {
  const int steps = steps_for(cfg);
  const double h = cfg.horizon / steps;
  const int n_x0 = model.sub[0].n_x;
  const int n_x1 = model.sub[1].n_x;
  const int n_z = model.n_z();
  if (x0[0].size() != n_x0 || x0[1].size() != n_x1 || z0[0].size() != n_z ||
      z0[1].size() != n_z)
    throw DimensionError("simulate_full_cds: initial state has wrong dimensions");

  const LambdaSolver solver = make_cdot_lambda_solver(model, cfg.baumgarte);
  const auto field = closed_loop_rhs(model, controllers, solver);

  auto unpack = [&](const Eigen::VectorXd& y) {
    CcsState s;
    s.x[0] = y.head(n_x0);
    s.x[1] = y.segment(n_x0, n_x1);
    s.z[0] = y.segment(n_x0 + n_x1, n_z);
    s.z[1] = y.tail(n_z);
    return s;
  };
  auto rhs = [&](double, const Eigen::VectorXd& y) {
    const CdsDeriv d = field(unpack(y));
    Eigen::VectorXd out(y.size());
    out << d.xdot[0], d.xdot[1], d.zdot[0], d.zdot[1];
    return out;
  };

  Eigen::VectorXd y(n_x0 + n_x1 + 2 * n_z);
  y << x0[0], x0[1], z0[0], z0[0];  // z_1 projected onto the manifold

  Trajectory traj;
  traj.step = h;
  traj.times.resize(steps + 1);
  traj.states.resize(steps + 1, y.size());
  traj.inputs.resize(steps + 1, model.sub[0].n_u + model.sub[1].n_u);
  traj.lambdas.resize(steps + 1, model.n_lambda());
  append_labels(traj.state_labels, block_labels("x_1", n_x0));
  append_labels(traj.state_labels, block_labels("x_2", n_x1));
  append_labels(traj.state_labels, block_labels("z_1", n_z));
  append_labels(traj.state_labels, block_labels("z_2", n_z));
  append_labels(traj.input_labels, block_labels("u_1", model.sub[0].n_u));
  append_labels(traj.input_labels, block_labels("u_2", model.sub[1].n_u));
  append_labels(traj.lambda_labels, block_labels("lambda_e", model.n_lambda()));

  double t = 0.0;
  for (int k = 0; k <= steps; ++k) {
    try {
      const CdsDeriv d = field(unpack(y));
      traj.times[k] = t;
      traj.states.row(k) = y.transpose();
      traj.inputs.row(k).head(model.sub[0].n_u) = d.u[0].transpose();
      traj.inputs.row(k).tail(model.sub[1].n_u) = d.u[1].transpose();
      traj.lambdas.row(k) = d.lambda_e.transpose();
      if (k < steps) {
        y = rk4_step(rhs, t, y, h);
        t += h;
      }
    } catch (const SingularityError& e) {
      std::ostringstream os;
      os << e.what() << " (simulate_full_cds, t = " << t << ")";
      throw SingularityError(os.str());
    }
  }
  return traj;
}

Trajectory reconstruct_full(const Trajectory& iso_traj, const IsolatedModel& iso) {
  const int i = iso.vertex();
  const int n_x_i = iso.n_x();
  const int n_x_j = iso.n_x_j();
  const int n_z = iso.n_z();
  const int n = iso_traj.samples();

  Trajectory out;
  out.times = iso_traj.times;
  out.integrator = iso_traj.integrator;
  out.step = iso_traj.step;

  const std::array<int, 2> n_x{i == 0 ? n_x_i : n_x_j, i == 0 ? n_x_j : n_x_i};
  const std::array<int, 2> n_u{i == 0 ? iso.n_u() : iso.n_u_j(),
                               i == 0 ? iso.n_u_j() : iso.n_u()};
  out.states.setZero(n, n_x[0] + n_x[1] + 2 * n_z);
  out.inputs.resize(n, n_u[0] + n_u[1]);
  out.lambdas.resize(n, iso_traj.lambdas.cols());
  append_labels(out.state_labels, block_labels("x_1", n_x[0]));
  append_labels(out.state_labels, block_labels("x_2", n_x[1]));
  append_labels(out.state_labels, block_labels("z_1", n_z));
  append_labels(out.state_labels, block_labels("z_2", n_z));
  append_labels(out.input_labels, block_labels("u_1", n_u[0]));
  append_labels(out.input_labels, block_labels("u_2", n_u[1]));
  append_labels(out.lambda_labels, block_labels("lambda_e", static_cast<int>(out.lambdas.cols())));

  const int x_i_dst = (i == 0) ? 0 : n_x[0];
  const int x_j_dst = (i == 0) ? n_x[0] : 0;
  const int z_base = n_x[0] + n_x[1];
  const int z_i_dst = z_base + ((i == 0) ? 0 : n_z);
  const int z_j_dst = z_base + ((i == 0) ? n_z : 0);
  const int u_i_dst = (i == 0) ? 0 : n_u[0];
  const int u_j_dst = (i == 0) ? n_u[0] : 0;

  out.states.middleCols(x_i_dst, n_x_i) = iso_traj.states.leftCols(n_x_i);
  out.states.middleCols(x_j_dst, n_x_j).setZero();
  out.states.middleCols(z_i_dst, n_z) = iso_traj.states.middleCols(n_x_i, n_z);
  out.states.middleCols(z_j_dst, n_z) = iso_traj.states.rightCols(n_z);
  out.inputs.middleCols(u_i_dst, iso.n_u()) = iso_traj.inputs.leftCols(iso.n_u());
  out.inputs.middleCols(u_j_dst, iso.n_u_j()) = iso_traj.inputs.rightCols(iso.n_u_j());
  // lambda columns are logged on the edge leaving vertex 0.
  out.lambdas = (i == 0) ? iso_traj.lambdas : Eigen::MatrixXd(-iso_traj.lambdas);
  return out;
}

TrajectoryError trajectory_error(const Trajectory& a, const Trajectory& b) {
  if (a.times.size() != b.times.size() ||
      (a.times.size() > 0 && (a.times - b.times).cwiseAbs().maxCoeff() > 1e-12))
    throw DimensionError("trajectory_error: time grids differ");
  if (a.states.cols() != b.states.cols() || a.inputs.cols() != b.inputs.cols() ||
      a.lambdas.cols() != b.lambdas.cols())
    throw DimensionError("trajectory_error: column layouts differ");

  auto column_stats = [](const Eigen::MatrixXd& d, Eigen::VectorXd& cmax, Eigen::VectorXd& crms) {
    cmax = d.cwiseAbs().colwise().maxCoeff();
    crms = (d.array().square().colwise().mean()).sqrt();
  };
  TrajectoryError e;
  column_stats(a.states - b.states, e.state_max, e.state_rms);
  column_stats(a.inputs - b.inputs, e.input_max, e.input_rms);
  column_stats(a.lambdas - b.lambdas, e.lambda_max, e.lambda_rms);
  e.max_state_error = e.state_max.size() ? e.state_max.maxCoeff() : 0.0;
  e.max_input_error = e.input_max.size() ? e.input_max.maxCoeff() : 0.0;
  e.max_lambda_error = e.lambda_max.size() ? e.lambda_max.maxCoeff() : 0.0;
  return e;
}

IsolatedController io_linearizing_controller(const IsolatedModel& iso, double eps) {
  return [iso, eps](const Eigen::VectorXd& x, const Eigen::VectorXd& z_i,
                    const Eigen::VectorXd& z_j) {
    std::array<Eigen::VectorXd, 2> z;
    z[iso.vertex()] = z_i;
    z[iso.other()] = z_j;
    const auto& si = iso.base().sub[iso.vertex()];
    const RelationEval rel = iso.relation().at(x, z);
    const Eigen::MatrixXd gbr = si.g_breve_at(x, z_i, z_j);
    const Eigen::VectorXd fZ = si.f_at(x, z_i) + gbr * rel.b_e;
    const Eigen::MatrixXd gZ = si.g_at(x, z_i) + gbr * rel.A_e;

    const std::vector<int> live = nonzero_rows(gZ);
    if (static_cast<int>(live.size()) != si.n_u) {
      std::ostringstream os;
      os << "io_linearizing_controller: input has authority over " << live.size()
         << " rows, expected " << si.n_u;
      throw SingularityError(os.str());
    }
    const Eigen::MatrixXd a = select_rows(gZ, live);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double rc = (sv.size() > 0 && sv[0] > 0.0) ? sv[sv.size() - 1] / sv[0] : 0.0;
    if (rc < kMinCouplingRcond)
      throw SingularityError("io_linearizing_controller: decoupling matrix singular");
    const Eigen::VectorXd rhs = -select_rows(Eigen::VectorXd(fZ + eps * x), live);
    return Eigen::VectorXd(svd.solve(rhs));
  };
}

ResetMap identity_reset() {
  return [](const Eigen::VectorXd& s) { return s; };
}

Eigen::VectorXd periodicity_residual(const Trajectory& traj, const ResetMap& reset) {
  if (traj.samples() < 2) throw std::invalid_argument("periodicity_residual: too few samples");
  const Eigen::VectorXd first = traj.states.row(0);
  const Eigen::VectorXd last = traj.states.row(traj.samples() - 1);
  const Eigen::VectorXd mapped = reset(last);
  if (mapped.size() != first.size())
    throw DimensionError("periodicity_residual: reset changed the state dimension");
  return mapped - first;
}

double max_constraint_violation(const Trajectory& traj) {
  for (const auto& [zi, zj] : {std::pair<std::string, std::string>{"z_i", "z_j"},
                               std::pair<std::string, std::string>{"z_1", "z_2"}}) {
    const int a = label_block_start(traj.state_labels, zi);
    const int b = label_block_start(traj.state_labels, zj);
    const int n = label_block_len(traj.state_labels, zi);
    if (a >= 0 && b >= 0 && n > 0) {
      return (traj.states.middleCols(a, n) - traj.states.middleCols(b, n))
          .cwiseAbs()
          .maxCoeff();
    }
  }
  throw DimensionError("max_constraint_violation: no coupled-state blocks in labels");
}

}  // namespace ccs
