#include "ccs/collocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace ccs {
namespace {

constexpr double kPi = 3.14159265358979323846;

void check_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace

IsoDims dims_of(const IsolatedModel& iso) {
  return IsoDims{iso.n_x(), iso.n_z(), iso.n_u(), iso.n_u_j()};
}

Eigen::VectorXd NodeVars::chi() const {
  Eigen::VectorXd out(x.size() + z_i.size() + z_j.size());
  out << x, z_i, z_j;
  return out;
}

Eigen::VectorXd NodeVars::chidot() const {
  Eigen::VectorXd out(xdot.size() + zdot_i.size() + zdot_j.size());
  out << xdot, zdot_i, zdot_j;
  return out;
}

DecisionLayout::DecisionLayout(IsoDims dims, Grid grid, bool free_period)
    : dims_(dims), grid_(grid), free_period_(free_period) {
  if (grid_.intervals < 2) throw std::invalid_argument("grid needs at least two intervals");
  check_positive(grid_.period, "grid period");
  node_size_ = 2 * dims_.n_x + 4 * dims_.n_z + dims_.n_u + dims_.n_u_j;
}

int DecisionLayout::node_offset(int k) const {
  if (k < 0 || k > grid_.intervals) throw std::out_of_range("node index out of range");
  return k * node_size_;
}

int DecisionLayout::size() const {
  return nodes() * node_size_ + (free_period_ ? 1 : 0);
}

int DecisionLayout::period_index() const { return free_period_ ? size() - 1 : -1; }

double DecisionLayout::period(const Eigen::VectorXd& x) const {
  return free_period_ ? x[period_index()] : grid_.period;
}

double DecisionLayout::h(const Eigen::VectorXd& x) const {
  return period(x) / grid_.intervals;
}

NodeVars DecisionLayout::node(const Eigen::VectorXd& x, int k) const {
  if (x.size() != size()) throw DimensionError("decision vector has wrong length");
  int at = node_offset(k);
  auto take = [&](int len) {
    Eigen::VectorXd v = x.segment(at, len);
    at += len;
    return v;
  };
  NodeVars v;
  v.x = take(dims_.n_x);
  v.xdot = take(dims_.n_x);
  v.z_i = take(dims_.n_z);
  v.zdot_i = take(dims_.n_z);
  v.z_j = take(dims_.n_z);
  v.zdot_j = take(dims_.n_z);
  v.u_i = take(dims_.n_u);
  v.uZ_j = take(dims_.n_u_j);
  return v;
}

void DecisionLayout::set_node(Eigen::VectorXd& x, int k, const NodeVars& v) const {
  if (x.size() != size()) throw DimensionError("decision vector has wrong length");
  int at = node_offset(k);
  auto put = [&](const Eigen::VectorXd& part, int len) {
    if (part.size() != len) throw DimensionError("node field has wrong length");
    x.segment(at, len) = part;
    at += len;
  };
  put(v.x, dims_.n_x);
  put(v.xdot, dims_.n_x);
  put(v.z_i, dims_.n_z);
  put(v.zdot_i, dims_.n_z);
  put(v.z_j, dims_.n_z);
  put(v.zdot_j, dims_.n_z);
  put(v.u_i, dims_.n_u);
  put(v.uZ_j, dims_.n_u_j);
}

Eigen::VectorXd c1_zero(const IsolatedModel& iso, const NodeVars& v) {
  std::array<Eigen::VectorXd, 2> z;
  z[iso.vertex()] = v.z_i;
  z[iso.other()] = v.z_j;
  return zero_invariance_residual(iso.relation(), v.x, z, v.u_i, v.uZ_j);
}

Eigen::VectorXd c2_dyn(const IsolatedModel& iso, const NodeVars& v) {
  const IsolatedRhs d = isolated_rhs(iso, v.x, v.z_i, v.z_j, v.u_i);
  Eigen::VectorXd f(d.xdot_i.size() + d.zdot_i.size() + d.zdot_j.size());
  f << d.xdot_i, d.zdot_i, d.zdot_j;
  return v.chidot() - f;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> hermite_center(const Eigen::VectorXd& chi_a,
                                                           const Eigen::VectorXd& chidot_a,
                                                           const Eigen::VectorXd& chi_b,
                                                           const Eigen::VectorXd& chidot_b,
                                                           double h) {
  check_positive(h, "interval length");
  Eigen::VectorXd chi_c = 0.5 * (chi_a + chi_b) + (h / 8.0) * (chidot_a - chidot_b);
  Eigen::VectorXd chidot_c =
      -1.5 / h * (chi_a - chi_b) - 0.25 * (chidot_a + chidot_b);
  return {std::move(chi_c), std::move(chidot_c)};
}

Eigen::VectorXd hermite_defect(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& chi_a, const Eigen::VectorXd& chidot_a, const Eigen::VectorXd& chi_b,
    const Eigen::VectorXd& chidot_b, const Eigen::VectorXd& u_left, double h) {
  const auto [chi_c, chidot_c] = hermite_center(chi_a, chidot_a, chi_b, chidot_b, h);
  return chidot_c - field(chi_c, u_left);
}

Eigen::VectorXd c3_colloc(const IsolatedModel& iso, const NodeVars& left, const NodeVars& right,
                          double h) {
  const int n_x = iso.n_x();
  const int n_z = iso.n_z();
  auto field = [&](const Eigen::VectorXd& chi, const Eigen::VectorXd& u) {
    const IsolatedRhs d =
        isolated_rhs(iso, chi.head(n_x), chi.segment(n_x, n_z), chi.tail(n_z), u);
    Eigen::VectorXd f(chi.size());
    f << d.xdot_i, d.zdot_i, d.zdot_j;
    return f;
  };
  return hermite_defect(field, left.chi(), left.chidot(), right.chi(), right.chidot(),
                        left.u_i, h);
}

Eigen::VectorXd c6_periodic(const NodeVars& first, const NodeVars& last, const ResetMap& reset,
                            const PhaseAnchor& anchor) {
  const Eigen::VectorXd chi0 = first.chi();
  const Eigen::VectorXd mapped = reset ? reset(last.chi()) : last.chi();
  if (mapped.size() != chi0.size())
    throw DimensionError("reset map changed the state dimension");
  if (anchor.coord < 0 || anchor.coord >= first.z_i.size())
    throw DimensionError("phase anchor coordinate out of range");
  Eigen::VectorXd out(chi0.size() + 1);
  out << mapped - chi0, first.z_i[anchor.coord] - anchor.value;
  return out;
}

Eigen::VectorXd c5_path(const std::vector<PathConstraint>& constraints, const NodeVars& v) {
  std::vector<Eigen::VectorXd> parts;
  int total = 0;
  parts.reserve(constraints.size());
  for (const auto& c : constraints) {
    parts.push_back(c.eval(v));
    total += static_cast<int>(parts.back().size());
  }
  Eigen::VectorXd out(total);
  int at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += static_cast<int>(p.size());
  }
  return out;
}

PathConstraint amplitude_limit(const IsolatedModel& iso, double amp) {
  const int n_chi = dims_of(iso).n_chi();
  return {"amplitude", [amp, n_chi](const NodeVars& v) {
            const Eigen::VectorXd chi = v.chi();
            Eigen::VectorXd out(2 * n_chi);
            out << (amp - chi.array()).matrix(), (chi.array() + amp).matrix();
            return out;
          }};
}

PathConstraint lambda_ceiling(const IsolatedModel& iso, double ceiling) {
  auto iso_sp = std::make_shared<const IsolatedModel>(iso);
  return {"lambda_ceiling", [iso_sp, ceiling](const NodeVars& v) {
            std::array<Eigen::VectorXd, 2> z;
            z[iso_sp->vertex()] = v.z_i;
            z[iso_sp->other()] = v.z_j;
            const Eigen::VectorXd lam = iso_sp->relation().at(v.x, z).lambda(v.u_i);
            Eigen::VectorXd out(2 * lam.size());
            out << (ceiling - lam.array()).matrix(), (lam.array() + ceiling).matrix();
            return out;
          }};
}

double friction_cone_margin(const Eigen::VectorXd& force, double mu, int normal, int tangent) {
  if (normal < 0 || normal >= force.size() || tangent < 0 || tangent >= force.size())
    throw DimensionError("friction cone indices out of range");
  return mu * force[normal] - std::abs(force[tangent]);
}

double clearance_margin(double value, double floor_value) { return value - floor_value; }

namespace {

struct EqBlock {
  std::string name;
  int row = 0;
  int rows = 0;
  std::vector<int> node_deps;
  bool period_dep = false;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
};

Eigen::VectorXd stack_blocks(const std::vector<EqBlock>& blocks, int total,
                             const Eigen::VectorXd& x) {
  Eigen::VectorXd out(total);
  for (const auto& b : blocks) out.segment(b.row, b.rows) = b.eval(x);
  return out;
}

// Central differences, evaluating only the blocks a column actually touches.
Eigen::MatrixXd structured_jacobian(const std::vector<EqBlock>& blocks, int total,
                                    const DecisionLayout& layout, double step,
                                    const Eigen::VectorXd& x) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(total, layout.size());
  std::vector<std::vector<const EqBlock*>> by_node(layout.nodes());
  std::vector<const EqBlock*> by_period;
  for (const auto& b : blocks) {
    for (int k : b.node_deps) by_node[k].push_back(&b);
    if (b.period_dep) by_period.push_back(&b);
  }

  Eigen::VectorXd probe = x;
  auto fill_column = [&](int col, const std::vector<const EqBlock*>& touched) {
    const double base = probe[col];
    probe[col] = base + step;
    std::vector<Eigen::VectorXd> plus(touched.size());
    for (size_t i = 0; i < touched.size(); ++i) plus[i] = touched[i]->eval(probe);
    probe[col] = base - step;
    for (size_t i = 0; i < touched.size(); ++i) {
      const Eigen::VectorXd minus = touched[i]->eval(probe);
      jac.block(touched[i]->row, col, touched[i]->rows, 1) =
          (plus[i] - minus) / (2.0 * step);
    }
    probe[col] = base;
  };

  for (int k = 0; k < layout.nodes(); ++k) {
    if (by_node[k].empty()) continue;
    const int begin = layout.node_offset(k);
    for (int c = 0; c < layout.node_size(); ++c) fill_column(begin + c, by_node[k]);
  }
  if (layout.free_period() && !by_period.empty())
    fill_column(layout.period_index(), by_period);
  return jac;
}

}  // namespace

TranscribedProblem assemble(const IsolatedModel& iso, const Grid& grid,
                            const TranscriptionOptions& opt) {
  const IsoDims dims = dims_of(iso);
  DecisionLayout layout(dims, grid, opt.free_period);
  auto iso_sp = std::make_shared<const IsolatedModel>(iso);
  const ResetMap reset = opt.reset ? opt.reset : identity_reset();
  const PhaseAnchor anchor = opt.anchor;
  const int K = grid.intervals;
  const DecisionLayout lay = layout;

  std::vector<EqBlock> eq;
  int row = 0;
  auto push = [&](std::string name, int rows, std::vector<int> deps, bool period_dep,
                  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval) {
    eq.push_back({std::move(name), row, rows, std::move(deps), period_dep, std::move(eval)});
    row += rows;
  };

  for (int k = 0; k <= K; ++k) {
    push("c1[" + std::to_string(k) + "]", iso.n_x_j(), {k}, false,
         [iso_sp, lay, k](const Eigen::VectorXd& x) {
           return c1_zero(*iso_sp, lay.node(x, k));
         });
    push("c2[" + std::to_string(k) + "]", dims.n_chi(), {k}, false,
         [iso_sp, lay, k](const Eigen::VectorXd& x) {
           return c2_dyn(*iso_sp, lay.node(x, k));
         });
    if (opt.contraction_eps) {
      const double eps = *opt.contraction_eps;
      push("contraction[" + std::to_string(k) + "]", dims.n_x, {k}, false,
           [lay, k, eps](const Eigen::VectorXd& x) {
             const NodeVars v = lay.node(x, k);
             return Eigen::VectorXd(v.xdot + eps * v.x);
           });
    }
  }
  for (int k = 0; k < K; ++k) {
    push("c3[" + std::to_string(k) + "]", dims.n_chi(), {k, k + 1}, opt.free_period,
         [iso_sp, lay, k](const Eigen::VectorXd& x) {
           return c3_colloc(*iso_sp, lay.node(x, k), lay.node(x, k + 1), lay.h(x));
         });
  }
  push("c6", dims.n_chi() + 1, {0, K}, false,
       [lay, K, reset, anchor](const Eigen::VectorXd& x) {
         return c6_periodic(lay.node(x, 0), lay.node(x, K), reset, anchor);
       });
  const int n_eq = row;

  // inequality blocks: one per node over the stacked path constraints
  std::vector<EqBlock> ineq;
  int ineq_rows_per_node = 0;
  if (!opt.path.empty()) {
    const Eigen::VectorXd probe = make_initial_guess(layout);
    ineq_rows_per_node = static_cast<int>(c5_path(opt.path, layout.node(probe, 0)).size());
  }
  const std::vector<PathConstraint> path = opt.path;
  for (int k = 0; k <= K && ineq_rows_per_node > 0; ++k) {
    ineq.push_back({"c5[" + std::to_string(k) + "]", k * ineq_rows_per_node,
                    ineq_rows_per_node,
                    {k},
                    false,
                    [path, lay, k](const Eigen::VectorXd& x) {
                      return c5_path(path, lay.node(x, k));
                    }});
  }
  const int n_ineq = static_cast<int>(ineq.size()) * ineq_rows_per_node;

  TranscribedProblem out{NlpProblem{}, layout};
  NlpProblem& nlp = out.nlp;
  nlp.fd_step = opt.fd_step;

  nlp.equality = [eq, n_eq](const Eigen::VectorXd& x) { return stack_blocks(eq, n_eq, x); };
  const double step = opt.fd_step;
  nlp.equality_jacobian = [eq, n_eq, lay, step](const Eigen::VectorXd& x) {
    return structured_jacobian(eq, n_eq, lay, step, x);
  };
  if (n_ineq > 0) {
    nlp.inequality = [ineq, n_ineq](const Eigen::VectorXd& x) {
      return stack_blocks(ineq, n_ineq, x);
    };
    nlp.inequality_jacobian = [ineq, n_ineq, lay, step](const Eigen::VectorXd& x) {
      return structured_jacobian(ineq, n_ineq, lay, step, x);
    };
  }
  for (const auto& b : eq) nlp.equality_blocks.emplace_back(b.name, b.rows);

  // C.4: state and input boxes per node, derivatives unbounded
  const CcsModel& model = iso.base();
  const int i = iso.vertex();
  const int j = iso.other();
  nlp.lb.setConstant(layout.size(), -std::numeric_limits<double>::infinity());
  nlp.ub.setConstant(layout.size(), std::numeric_limits<double>::infinity());
  auto apply_box = [&](int offset, const Box& box) {
    nlp.lb.segment(offset, box.dim()) = box.lo;
    nlp.ub.segment(offset, box.dim()) = box.hi;
  };
  for (int k = 0; k <= K; ++k) {
    int at = layout.node_offset(k);
    apply_box(at, model.x_box[i]);
    at += 2 * dims.n_x;
    apply_box(at, model.z_box[i]);
    at += 2 * dims.n_z;
    apply_box(at, model.z_box[j]);
    at += 2 * dims.n_z;
    apply_box(at, model.u_box[i]);
    at += dims.n_u;
    apply_box(at, model.u_box[j]);
  }
  if (opt.free_period) {
    nlp.lb[layout.period_index()] = opt.period_min;
    nlp.ub[layout.period_index()] = opt.period_max;
  }

  // cost
  if (opt.cost == "input_energy") {
    nlp.cost = [lay, K](const Eigen::VectorXd& x) {
      double acc = 0.0;
      for (int k = 0; k <= K; ++k) acc += lay.node(x, k).u_i.squaredNorm();
      return acc * lay.h(x);
    };
  } else if (opt.cost == "base_accel") {
    const int half = dims.n_z / 2;
    nlp.cost = [lay, K, half](const Eigen::VectorXd& x) {
      double acc = 0.0;
      for (int k = 0; k <= K; ++k) acc += lay.node(x, k).zdot_i.tail(half).squaredNorm();
      return acc * lay.h(x);
    };
  } else {
    throw std::invalid_argument("unknown cost '" + opt.cost +
                                "' (expected input_energy or base_accel)");
  }
  return out;
}

Eigen::VectorXd make_initial_guess(const DecisionLayout& layout) {
  const IsoDims& d = layout.dims();
  const int K = layout.grid().intervals;
  const double period = layout.grid().period;
  const double omega = 2.0 * kPi / period;
  const double amp = 0.05;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
  for (int k = 0; k <= K; ++k) {
    const double th = 2.0 * kPi * k / K;
    NodeVars v;
    const int hx = d.n_x / 2;
    v.x.setZero(d.n_x);
    v.xdot.setZero(d.n_x);
    v.x.head(hx).setConstant(amp * std::sin(th));
    v.x.tail(d.n_x - hx).setConstant(amp * omega * std::cos(th));
    v.xdot.head(hx).setConstant(amp * omega * std::cos(th));
    v.xdot.tail(d.n_x - hx).setConstant(-amp * omega * omega * std::sin(th));

    const int hz = d.n_z / 2;
    v.z_i.setZero(d.n_z);
    v.zdot_i.setZero(d.n_z);
    v.z_i.head(hz).setConstant(amp * (1.0 - std::cos(th)));
    v.z_i.tail(d.n_z - hz).setConstant(amp * omega * std::sin(th));
    v.zdot_i.head(hz).setConstant(amp * omega * std::sin(th));
    v.zdot_i.tail(d.n_z - hz).setConstant(amp * omega * omega * std::cos(th));
    v.z_j = v.z_i;
    v.zdot_j = v.zdot_i;
    v.u_i = Eigen::VectorXd::Zero(d.n_u);
    v.uZ_j = Eigen::VectorXd::Zero(d.n_u_j);
    layout.set_node(x, k, v);
  }
  if (layout.free_period()) x[layout.period_index()] = period;
  return x;
}

Trajectory solution_to_trajectory(const IsolatedModel& iso, const DecisionLayout& layout,
                                  const Eigen::VectorXd& x) {
  const IsoDims& d = layout.dims();
  const int K = layout.grid().intervals;
  const double period = layout.period(x);

  Trajectory traj;
  traj.integrator = "collocation";
  traj.step = period / K;
  traj.times.resize(K + 1);
  traj.states.resize(K + 1, d.n_chi());
  traj.inputs.resize(K + 1, d.n_u + d.n_u_j);
  traj.lambdas.resize(K + 1, iso.base().n_lambda());
  auto labels = [](const std::string& base, int n) {
    std::vector<std::string> out;
    for (int k = 0; k < n; ++k) out.push_back(base + "[" + std::to_string(k) + "]");
    return out;
  };
  for (const auto& l : labels("x_i", d.n_x)) traj.state_labels.push_back(l);
  for (const auto& l : labels("z_i", d.n_z)) traj.state_labels.push_back(l);
  for (const auto& l : labels("z_j", d.n_z)) traj.state_labels.push_back(l);
  for (const auto& l : labels("u_i", d.n_u)) traj.input_labels.push_back(l);
  for (const auto& l : labels("uZ_j", d.n_u_j)) traj.input_labels.push_back(l);
  for (const auto& l : labels("lambda_e", iso.base().n_lambda()))
    traj.lambda_labels.push_back(l);

  for (int k = 0; k <= K; ++k) {
    const NodeVars v = layout.node(x, k);
    traj.times[k] = period * k / K;
    traj.states.row(k) = v.chi().transpose();
    traj.inputs.row(k).head(d.n_u) = v.u_i.transpose();
    traj.inputs.row(k).tail(d.n_u_j) = v.uZ_j.transpose();
    std::array<Eigen::VectorXd, 2> z;
    z[iso.vertex()] = v.z_i;
    z[iso.other()] = v.z_j;
    traj.lambdas.row(k) = iso.relation().at(v.x, z).lambda(v.u_i).transpose();
  }
  return traj;
}

PostcheckReport postcheck(const IsolatedModel& iso, const DecisionLayout& layout,
                          const Eigen::VectorXd& x, const TranscriptionOptions& opt,
                          int substeps_per_interval) {
  PostcheckReport rep;
  const int K = layout.grid().intervals;
  const ResetMap reset = opt.reset ? opt.reset : identity_reset();

  TranscribedProblem rebuilt = assemble(iso, layout.grid(), opt);
  rep.equality_inf = rebuilt.nlp.equality(x).lpNorm<Eigen::Infinity>();

  const Eigen::VectorXd chi0 = layout.node(x, 0).chi();
  const Eigen::VectorXd chiK = layout.node(x, K).chi();
  rep.periodicity_inf = (reset(chiK) - chi0).lpNorm<Eigen::Infinity>();

  const int n_x = layout.dims().n_x;
  const int n_z = layout.dims().n_z;
  const double h = layout.h(x);
  auto field = [&](const Eigen::VectorXd& chi, const Eigen::VectorXd& u) {
    const IsolatedRhs d =
        isolated_rhs(iso, chi.head(n_x), chi.segment(n_x, n_z), chi.tail(n_z), u);
    Eigen::VectorXd f(chi.size());
    f << d.xdot_i, d.zdot_i, d.zdot_j;
    return f;
  };

  auto resimulate = [&](bool linear_u) {
    Eigen::VectorXd chi = chi0;
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd u_l = layout.node(x, k).u_i;
      const Eigen::VectorXd u_r = layout.node(x, k + 1).u_i;
      const double hs = h / substeps_per_interval;
      for (int s = 0; s < substeps_per_interval; ++s) {
        const double mid_frac = (s + 0.5) / substeps_per_interval;
        const Eigen::VectorXd u =
            linear_u ? Eigen::VectorXd(u_l + mid_frac * (u_r - u_l)) : u_l;
        auto rhs = [&](double, const Eigen::VectorXd& c) { return field(c, u); };
        chi = rk4_step(rhs, 0.0, chi, hs);
      }
    }
    return (reset(chi) - chi0).lpNorm<Eigen::Infinity>();
  };
  rep.resim_return_inf_zoh = resimulate(false);
  rep.resim_return_inf_linear = resimulate(true);
  return rep;
}

}  // namespace ccs
