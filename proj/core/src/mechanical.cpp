#include "ccs/mechanical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ccs/numeric.hpp"

namespace ccs {
namespace {

void check_vec(const std::string& what, const Eigen::VectorXd& v, int n) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << " has size " << v.size() << ", expected " << n;
    throw DimensionError(os.str());
  }
}

Eigen::VectorXd zero_if_empty(const Eigen::VectorXd& v, int n, const std::string& what) {
  if (v.size() == 0) return Eigen::VectorXd::Zero(n);
  check_vec(what, v, n);
  return v;
}

double matrix_rcond(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0.0;
  return sv[sv.size() - 1] / sv[0];
}

}  // namespace

Eigen::MatrixXd LagrangianModel::contact_jacobian(const Eigen::VectorXd& q) const {
  if (!j_contact) return Eigen::MatrixXd(0, n);
  Eigen::MatrixXd j = j_contact(q);
  if (j.cols() != n) throw DimensionError("j_contact returned wrong column count");
  return j;
}

Eigen::MatrixXd LagrangianModel::contact_jacobian_dot(const Eigen::VectorXd& q,
                                                      const Eigen::VectorXd& qdot) const {
  if (!j_contact) return Eigen::MatrixXd(0, n);
  if (!jdot_contact) return Eigen::MatrixXd::Zero(contact_jacobian(q).rows(), n);
  Eigen::MatrixXd jd = jdot_contact(q, qdot);
  if (jd.cols() != n) throw DimensionError("jdot_contact returned wrong column count");
  return jd;
}

Eigen::MatrixXd LagrangianModel::mass_at(const Eigen::VectorXd& q) const {
  check_vec("q", q, n);
  Eigen::MatrixXd d = mass(q);
  if (d.rows() != n || d.cols() != n) throw DimensionError("mass map returned wrong shape");
  return d;
}

Eigen::VectorXd LagrangianModel::bias_at(const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& qdot) const {
  check_vec("q", q, n);
  check_vec("qdot", qdot, n);
  Eigen::VectorXd h = bias(q, qdot);
  if (h.size() != n) throw DimensionError("bias map returned wrong size");
  return h;
}

double PhaseSpec::tau(const Eigen::VectorXd& xi) const {
  if (coord < 0 || coord >= xi.size()) throw DimensionError("phase coordinate out of range");
  if (end == start) throw std::invalid_argument("phase interval is degenerate");
  return std::clamp((xi[coord] - start) / (end - start), 0.0, 1.0);
}

double PhaseSpec::slope(const Eigen::VectorXd& xi) const {
  if (coord < 0 || coord >= xi.size()) throw DimensionError("phase coordinate out of range");
  if (end == start) throw std::invalid_argument("phase interval is degenerate");
  const double raw = (xi[coord] - start) / (end - start);
  return (raw < 0.0 || raw > 1.0) ? 0.0 : 1.0 / (end - start);
}

double PhaseSpec::tau_dot(const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_dot) const {
  return slope(xi) * xi_dot[coord];
}

Eigen::VectorXd OutputSpec::y_actual(const Eigen::VectorXd& q) const {
  if (selection.cols() != q.size())
    throw DimensionError("output selection does not match the configuration size");
  return selection * q;
}

BezierPoint bezier(const Eigen::MatrixXd& alpha, double tau) {
  if (alpha.cols() < 1) throw DimensionError("bezier needs at least one control point");
  const double s = std::clamp(tau, 0.0, 1.0);
  // de Casteljau over the columns
  auto eval = [s](Eigen::MatrixXd pts) {
    while (pts.cols() > 1) {
      Eigen::MatrixXd next(pts.rows(), pts.cols() - 1);
      for (int k = 0; k + 1 < pts.cols(); ++k)
        next.col(k) = (1.0 - s) * pts.col(k) + s * pts.col(k + 1);
      pts = std::move(next);
    }
    return Eigen::VectorXd(pts.col(0));
  };
  BezierPoint out;
  out.value = eval(alpha);
  out.derivative = eval(bezier_derivative_coeffs(alpha));
  return out;
}

Eigen::MatrixXd bezier_derivative_coeffs(const Eigen::MatrixXd& alpha) {
  const int d = static_cast<int>(alpha.cols()) - 1;
  if (d < 1) return Eigen::MatrixXd::Zero(alpha.rows(), 1);
  Eigen::MatrixXd out(alpha.rows(), d);
  for (int k = 0; k < d; ++k) out.col(k) = d * (alpha.col(k + 1) - alpha.col(k));
  return out;
}

Eigen::MatrixXd mirror_coeffs(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& m) {
  if (m.cols() != alpha.rows()) throw DimensionError("mirror matrix does not match alpha rows");
  return m * alpha;
}

ContactSolution eliminate_contact_force(const LagrangianModel& m, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& qdot, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& lambda_e) {
  const Eigen::MatrixXd d = m.mass_at(q);
  const Eigen::VectorXd h = m.bias_at(q, qdot);
  const Eigen::VectorXd uu = zero_if_empty(u, m.n_u(), "u");
  const Eigen::VectorXd lam = zero_if_empty(lambda_e, m.base_dim, "lambda_e");
  const Eigen::VectorXd force = m.input * uu + m.j_couple.transpose() * lam - h;

  const Eigen::MatrixXd j = m.contact_jacobian(q);
  const int n_c = static_cast<int>(j.rows());
  ContactSolution sol;
  if (n_c == 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(d);
    if (llt.info() != Eigen::Success)
      throw SingularityError("mass matrix not positive definite");
    sol.qddot = llt.solve(force);
    sol.force.resize(0);
    return sol;
  }

  const Eigen::MatrixXd jdot = m.contact_jacobian_dot(q, qdot);
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m.n + n_c, m.n + n_c);
  kkt.topLeftCorner(m.n, m.n) = d;
  kkt.topRightCorner(m.n, n_c) = -j.transpose();
  kkt.bottomLeftCorner(n_c, m.n) = j;
  Eigen::VectorXd rhs(m.n + n_c);
  rhs << force, -jdot * qdot;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible())
    throw SingularityError("contact elimination: rank-deficient contact Jacobian");
  const Eigen::VectorXd sol_vec = lu.solve(rhs);
  sol.qddot = sol_vec.head(m.n);
  sol.force = sol_vec.tail(n_c);
  return sol;
}

ReducedDynamics reduce_contacts(const LagrangianModel& m, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& qdot) {
  ReducedDynamics red;
  red.d = m.mass_at(q);
  const Eigen::VectorXd h = m.bias_at(q, qdot);
  const Eigen::MatrixXd j = m.contact_jacobian(q);

  if (j.rows() == 0) {
    red.h_bar = h;
    red.b_bar = m.input;
    red.je_bar_t = m.j_couple.transpose();
    return red;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(red.d);
  if (llt.info() != Eigen::Success) throw SingularityError("mass matrix not positive definite");
  const Eigen::MatrixXd dinv_jt = llt.solve(j.transpose());      // n x n_c
  const Eigen::MatrixXd a = j * dinv_jt;                         // n_c x n_c
  if (matrix_rcond(a) < 1e-12)
    throw SingularityError("contact elimination: rank-deficient contact Jacobian");
  Eigen::PartialPivLU<Eigen::MatrixXd> alu(a);
  const Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(m.n, m.n) - j.transpose() * alu.solve(dinv_jt.transpose());
  const Eigen::MatrixXd jdot = m.contact_jacobian_dot(q, qdot);

  red.h_bar = proj * h + j.transpose() * alu.solve(jdot * qdot);
  red.b_bar = proj * m.input;
  red.je_bar_t = proj * m.j_couple.transpose();
  return red;
}

MechanicalChart::MechanicalChart(LagrangianModel model, OutputSpec output)
    : model_(std::move(model)), output_(std::move(output)) {
  const int n = model_.n;
  const int bd = model_.base_dim;
  const int ny = output_.n_y();
  if (output_.selection.rows() != ny || output_.selection.cols() != n)
    throw DimensionError("output selection has wrong shape");
  if (model_.j_couple.rows() != bd || model_.j_couple.cols() != n)
    throw DimensionError("j_couple has wrong shape");
  if (ny + bd != n)
    throw DimensionError("outputs plus base coordinates must span the configuration");

  Eigen::MatrixXd t(n, n);
  t.topRows(bd) = model_.j_couple;
  t.bottomRows(ny) = output_.selection;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(t);
  if (!lu.isInvertible())
    throw SingularityError("base selector and output selection are not a coordinate chart");
  t_inv_ = lu.inverse();
}

Eigen::VectorXd MechanicalChart::q_of(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  const int bd = base_dim();
  const int ny = n_y();
  check_vec("x", x, 2 * ny);
  check_vec("z", z, 2 * bd);
  const Eigen::VectorXd xi = z.head(bd);
  const BezierPoint des = bezier(output_.alpha, output_.phase.tau(xi));
  Eigen::VectorXd rhs(model_.n);
  rhs << xi, x.head(ny) + des.value;
  return t_inv_ * rhs;
}

Eigen::VectorXd MechanicalChart::qdot_of(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& z) const {
  const int bd = base_dim();
  const int ny = n_y();
  check_vec("x", x, 2 * ny);
  check_vec("z", z, 2 * bd);
  const Eigen::VectorXd xi = z.head(bd);
  const Eigen::VectorXd xi_dot = z.tail(bd);
  const BezierPoint des = bezier(output_.alpha, output_.phase.tau(xi));
  Eigen::VectorXd rhs(model_.n);
  rhs << xi_dot, x.tail(ny) + des.derivative * output_.phase.tau_dot(xi, xi_dot);
  return t_inv_ * rhs;
}

Eigen::VectorXd MechanicalChart::x_of(const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& qdot) const {
  check_vec("q", q, model_.n);
  check_vec("qdot", qdot, model_.n);
  const Eigen::VectorXd xi = model_.j_couple * q;
  const Eigen::VectorXd xi_dot = model_.j_couple * qdot;
  const BezierPoint des = bezier(output_.alpha, output_.phase.tau(xi));
  Eigen::VectorXd x(2 * n_y());
  x.head(n_y()) = output_.selection * q - des.value;
  x.tail(n_y()) =
      output_.selection * qdot - des.derivative * output_.phase.tau_dot(xi, xi_dot);
  return x;
}

Eigen::VectorXd MechanicalChart::z_of(const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& qdot) const {
  check_vec("q", q, model_.n);
  check_vec("qdot", qdot, model_.n);
  Eigen::VectorXd z(2 * base_dim());
  z << model_.j_couple * q, model_.j_couple * qdot;
  return z;
}

Eigen::MatrixXd MechanicalChart::j_y(const Eigen::VectorXd& q) const {
  check_vec("q", q, model_.n);
  const Eigen::VectorXd xi = model_.j_couple * q;
  const BezierPoint des = bezier(output_.alpha, output_.phase.tau(xi));
  Eigen::RowVectorXd dtau_dxi = Eigen::RowVectorXd::Zero(base_dim());
  dtau_dxi[output_.phase.coord] = output_.phase.slope(xi);
  return output_.selection - des.derivative * dtau_dxi * model_.j_couple;
}

Eigen::VectorXd MechanicalChart::jdot_y_qdot(const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qdot) const {
  const Eigen::VectorXd xi = model_.j_couple * q;
  const Eigen::VectorXd xi_dot = model_.j_couple * qdot;
  const double td = output_.phase.tau_dot(xi, xi_dot);
  const BezierPoint des2 =
      bezier(bezier_derivative_coeffs(output_.alpha), output_.phase.tau(xi));
  return -des2.derivative * td * td;
}

namespace {

// Shared evaluation for all normal-form maps of one subsystem.
struct NormalFormTerms {
  Eigen::VectorXd q, qd;
  Eigen::MatrixXd jy_dinv;  // J_y D^-1, n_y x n
  Eigen::MatrixXd je_dinv;  // J_couple D^-1, base_dim x n
  ReducedDynamics red;
};

NormalFormTerms normal_form_terms(const MechanicalChart& chart, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& z) {
  NormalFormTerms t;
  t.q = chart.q_of(x, z);
  t.qd = chart.qdot_of(x, z);
  t.red = reduce_contacts(chart.model(), t.q, t.qd);
  Eigen::LLT<Eigen::MatrixXd> llt(t.red.d);
  if (llt.info() != Eigen::Success) throw SingularityError("mass matrix not positive definite");
  const Eigen::MatrixXd dinv =
      llt.solve(Eigen::MatrixXd::Identity(chart.model().n, chart.model().n));
  t.jy_dinv = chart.j_y(t.q) * dinv;
  t.je_dinv = chart.model().j_couple * dinv;
  return t;
}

SubsystemModel make_normal_form_subsystem(std::shared_ptr<const MechanicalChart> chart) {
  const int ny = chart->n_y();
  const int bd = chart->base_dim();
  SubsystemModel s;
  s.n_x = 2 * ny;
  s.n_z = 2 * bd;
  s.n_u = chart->model().n_u();
  s.n_lambda = bd;

  s.f = [chart, ny](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    const NormalFormTerms t = normal_form_terms(*chart, x, z);
    Eigen::VectorXd out(2 * ny);
    out << x.tail(ny), chart->jdot_y_qdot(t.q, t.qd) - t.jy_dinv * t.red.h_bar;
    return out;
  };
  s.g = [chart, ny](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    const NormalFormTerms t = normal_form_terms(*chart, x, z);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * ny, chart->model().n_u());
    out.bottomRows(ny) = t.jy_dinv * t.red.b_bar;
    return out;
  };
  s.g_breve = [chart, ny, bd](const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                              const Eigen::VectorXd&) {
    const NormalFormTerms t = normal_form_terms(*chart, x, z);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * ny, bd);
    out.bottomRows(ny) = t.jy_dinv * t.red.je_bar_t;
    return out;
  };
  s.p = [chart, bd](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    const NormalFormTerms t = normal_form_terms(*chart, x, z);
    Eigen::VectorXd out(2 * bd);
    out << z.tail(bd), -t.je_dinv * t.red.h_bar;
    return out;
  };
  s.q = [chart, bd](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    const NormalFormTerms t = normal_form_terms(*chart, x, z);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * bd, chart->model().n_u());
    out.bottomRows(bd) = t.je_dinv * t.red.b_bar;
    return out;
  };
  s.q_breve = [chart, bd](const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                          const Eigen::VectorXd&) {
    const NormalFormTerms t = normal_form_terms(*chart, x, z);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * bd, bd);
    out.bottomRows(bd) = t.je_dinv * t.red.je_bar_t;
    return out;
  };
  return s;
}

void check_relative_degree(const MechanicalChart& chart) {
  const int ny = chart.n_y();
  const int nu = chart.model().n_u();
  if (ny != nu) {
    std::ostringstream os;
    os << "relative-degree check: " << ny << " outputs but " << nu << " inputs in "
       << chart.model().name;
    throw DimensionError(os.str());
  }
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2 * ny);
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(2 * chart.base_dim());
  const NormalFormTerms t = normal_form_terms(chart, x0, z0);
  const Eigen::MatrixXd dec = t.jy_dinv * t.red.b_bar;  // J_y D^-1 B_bar
  for (int r = 0; r < dec.rows(); ++r) {
    if (dec.row(r).cwiseAbs().maxCoeff() == 0.0) {
      std::ostringstream os;
      os << "output row " << r << " of " << chart.model().name
         << " has relative degree above two (no input reaches it)";
      throw SingularityError(os.str());
    }
  }
  if (matrix_rcond(dec) < 1e-10)
    throw SingularityError("decoupling matrix singular at the nominal configuration");
}

}  // namespace

CcsModel to_ccs(const LagrangianModel& front, const LagrangianModel& rear,
                const OutputSpec& out_front, const OutputSpec& out_rear) {
  if (front.base_dim != rear.base_dim)
    throw DimensionError("subsystems must share the base coordinate dimension");
  auto chart_f = std::make_shared<const MechanicalChart>(front, out_front);
  auto chart_r = std::make_shared<const MechanicalChart>(rear, out_rear);
  check_relative_degree(*chart_f);
  check_relative_degree(*chart_r);

  CcsModel model;
  model.sub[0] = make_normal_form_subsystem(chart_f);
  model.sub[1] = make_normal_form_subsystem(chart_r);
  for (int v = 0; v < 2; ++v) {
    model.x_box[v] = Box::unbounded(model.sub[v].n_x);
    model.z_box[v] = Box::unbounded(model.sub[v].n_z);
    model.u_box[v] = Box::unbounded(model.sub[v].n_u);
  }
  model.name = front.name + "+" + rear.name;
  validate(model);
  return model;
}

PinnedReduction::PinnedReduction(LagrangianModel model, OutputSpec output)
    : chart_(std::move(model), std::move(output)) {}

Eigen::VectorXd PinnedReduction::pinned_config(const Eigen::VectorXd& xi) const {
  const auto& out = chart_.output();
  const int bd = chart_.base_dim();
  const int ny = chart_.n_y();
  check_vec("xi", xi, bd);

  const Eigen::VectorXd yd = bezier(out.alpha, out.phase.tau(xi)).value;
  const Eigen::VectorXd z0 = (Eigen::VectorXd(2 * bd) << xi, Eigen::VectorXd::Zero(bd)).finished();
  // Parameterize q = q_of((w, 0), z0); Newton drives y(q) - yd to zero in w.
  auto q_at = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * ny);
    x.head(ny) = w;
    return chart_.q_of(x, z0);
  };
  Eigen::VectorXd w = Eigen::VectorXd::Zero(ny);
  Eigen::VectorXd r = out.y_actual(q_at(w)) - yd;
  for (int it = 0; it < 50; ++it) {
    if (r.lpNorm<Eigen::Infinity>() <= 1e-12) return q_at(w);
    const Eigen::MatrixXd jac = central_jacobian(
        [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(out.y_actual(q_at(v)) - yd); }, w,
        1e-7);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw SingularityError("pinned configuration solve: singular output Jacobian");
    const Eigen::VectorXd dw = lu.solve(r);
    double step = 1.0;
    for (int half = 0; half < 30; ++half) {
      const Eigen::VectorXd w_try = w - step * dw;
      const Eigen::VectorXd r_try = out.y_actual(q_at(w_try)) - yd;
      if (r_try.norm() < r.norm() || r_try.lpNorm<Eigen::Infinity>() <= 1e-12) {
        w = w_try;
        r = r_try;
        break;
      }
      step *= 0.5;
    }
  }
  if (r.lpNorm<Eigen::Infinity>() > 1e-12)
    throw std::runtime_error("pinned configuration solve did not converge");
  return q_at(w);
}

Eigen::MatrixXd PinnedReduction::config_jacobian(const Eigen::VectorXd& xi) const {
  const auto& m = chart_.model();
  const auto& out = chart_.output();
  const Eigen::VectorXd q = pinned_config(xi);
  // T dq = [dxi; y_d'(tau) dtau], with dtau = slope * dxi[coord].
  const BezierPoint des = bezier(out.alpha, out.phase.tau(xi));
  Eigen::RowVectorXd dtau_dxi = Eigen::RowVectorXd::Zero(chart_.base_dim());
  dtau_dxi[out.phase.coord] = out.phase.slope(xi);
  Eigen::MatrixXd t(m.n, m.n);
  t.topRows(chart_.base_dim()) = m.j_couple;
  t.bottomRows(chart_.n_y()) = out.selection;
  Eigen::MatrixXd rhs(m.n, chart_.base_dim());
  rhs.topRows(chart_.base_dim()).setIdentity();
  rhs.bottomRows(chart_.n_y()) = des.derivative * dtau_dxi;
  return t.partialPivLu().solve(rhs);
}

Eigen::MatrixXd PinnedReduction::config_jacobian_dot(const Eigen::VectorXd& xi,
                                                     const Eigen::VectorXd& xi_dot) const {
  const auto& m = chart_.model();
  const auto& out = chart_.output();
  const double td = out.phase.tau_dot(xi, xi_dot);
  const BezierPoint des2 = bezier(bezier_derivative_coeffs(out.alpha), out.phase.tau(xi));
  Eigen::RowVectorXd dtau_dxi = Eigen::RowVectorXd::Zero(chart_.base_dim());
  dtau_dxi[out.phase.coord] = out.phase.slope(xi);
  Eigen::MatrixXd t(m.n, m.n);
  t.topRows(chart_.base_dim()) = m.j_couple;
  t.bottomRows(chart_.n_y()) = out.selection;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m.n, chart_.base_dim());
  rhs.bottomRows(chart_.n_y()) = des2.derivative * td * dtau_dxi;
  return t.partialPivLu().solve(rhs);
}

PinnedTerms PinnedReduction::terms(const Eigen::VectorXd& xi,
                                   const Eigen::VectorXd& xi_dot) const {
  const auto& m = chart_.model();
  const Eigen::VectorXd q = pinned_config(xi);
  const Eigen::MatrixXd jz = config_jacobian(xi);
  const Eigen::MatrixXd jz_dot = config_jacobian_dot(xi, xi_dot);
  const Eigen::VectorXd qd = jz * xi_dot;

  const Eigen::MatrixXd d = m.mass_at(q);
  const Eigen::VectorXd h = m.bias_at(q, qd);
  const Eigen::MatrixXd j = m.contact_jacobian(q);
  const Eigen::MatrixXd jdot = m.contact_jacobian_dot(q, qd);

  PinnedTerms t;
  t.d_z = m.j_couple * d * jz;
  t.h_z = m.j_couple * (d * (jz_dot * xi_dot) + h);
  t.j_z = j * jz;
  t.w_z = (jdot * jz + j * jz_dot) * xi_dot;
  t.jhat_t = m.j_couple * j.transpose();
  return t;
}

PinnedTerms pinned_zero_dynamics(const LagrangianModel& m, const OutputSpec& out,
                                 const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_dot) {
  return PinnedReduction(m, out).terms(xi, xi_dot);
}

Eigen::VectorXd plastic_impact(const LagrangianModel& m, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& qdot_pre) {
  check_vec("qdot_pre", qdot_pre, m.n);
  const Eigen::MatrixXd j = m.contact_jacobian(q);
  if (j.rows() == 0) return qdot_pre;
  const Eigen::MatrixXd d = m.mass_at(q);
  Eigen::LLT<Eigen::MatrixXd> llt(d);
  if (llt.info() != Eigen::Success) throw SingularityError("mass matrix not positive definite");
  const Eigen::MatrixXd dinv_jt = llt.solve(j.transpose());
  const Eigen::MatrixXd a = j * dinv_jt;
  if (matrix_rcond(a) < 1e-12)
    throw SingularityError("plastic impact: rank-deficient impact Jacobian");
  return qdot_pre - dinv_jt * a.partialPivLu().solve(j * qdot_pre);
}

namespace {

OutputSpec default_angle_output(int n, int base_dim) {
  OutputSpec out;
  const int ny = n - base_dim;
  out.alpha = Eigen::MatrixXd::Zero(ny, 6);  // constant-zero desired, degree 5
  out.selection = Eigen::MatrixXd::Zero(ny, n);
  out.selection.rightCols(ny).setIdentity();
  out.phase = PhaseSpec{0, -0.5, 0.5};
  out.mirror = Eigen::MatrixXd::Identity(ny, ny);
  return out;
}

}  // namespace

SplitCartExample example_split_cart(const SplitCartParams& p) {
  const double mc = p.cart_mass;
  const double m = p.pend_mass;
  const double l = p.length;
  const double g = p.gravity;

  auto make_half = [&](const std::string& name) {
    LagrangianModel half;
    half.n = 2;
    half.base_dim = 1;
    half.name = name;
    half.mass = [mc, m, l](const Eigen::VectorXd& q) {
      Eigen::MatrixXd d(2, 2);
      const double c = std::cos(q[1]);
      d << mc / 2 + m, m * l * c, m * l * c, m * l * l;
      return d;
    };
    half.bias = [m, l, g](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
      Eigen::VectorXd h(2);
      const double s = std::sin(q[1]);
      h << -m * l * qd[1] * qd[1] * s, m * g * l * s;
      return h;
    };
    half.input = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
    half.j_couple = (Eigen::MatrixXd(1, 2) << 1, 0).finished();
    return half;
  };

  const LagrangianModel front = make_half("split_cart_front");
  const LagrangianModel rear = make_half("split_cart_rear");
  const OutputSpec out = default_angle_output(2, 1);

  // unsplit cart with both pendula, q = (s, th1, th2)
  LagrangianModel full;
  full.n = 3;
  full.base_dim = 1;
  full.name = "split_cart_full";
  full.mass = [mc, m, l](const Eigen::VectorXd& q) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d(0, 0) = mc + 2 * m;
    d(0, 1) = d(1, 0) = m * l * std::cos(q[1]);
    d(0, 2) = d(2, 0) = m * l * std::cos(q[2]);
    d(1, 1) = d(2, 2) = m * l * l;
    return d;
  };
  full.bias = [m, l, g](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
    Eigen::VectorXd h(3);
    h << -m * l * (qd[1] * qd[1] * std::sin(q[1]) + qd[2] * qd[2] * std::sin(q[2])),
        m * g * l * std::sin(q[1]), m * g * l * std::sin(q[2]);
    return h;
  };
  full.input = (Eigen::MatrixXd(3, 2) << 0, 0, 1, 0, 0, 1).finished();
  full.j_couple = (Eigen::MatrixXd(1, 3) << 1, 0, 0).finished();

  SplitCartExample ex{full,
                      {front, rear},
                      {out, out},
                      {MechanicalChart(front, out), MechanicalChart(rear, out)},
                      to_ccs(front, rear, out, out),
                      p};
  ex.ccs.name = "split_cart";
  return ex;
}

DoublePendulumExample example_double_pendulum_pivot(const DoublePendulumParams& p) {
  const double m = p.mass;
  const double l = p.length;
  const double g = p.gravity;
  const double inertia = m * l * l / 12.0;  // uniform rod about its center

  // Rod between the shared joint xi and a far end at xi -/+ l*u(theta),
  // u(theta) = (sin, -cos); sign -1 pins the far end to the world.
  auto make_link = [&](double sgn, bool pinned, const std::string& name) {
    LagrangianModel link;
    link.n = 3;
    link.base_dim = 2;
    link.name = name;
    link.mass = [m, l, inertia, sgn](const Eigen::VectorXd& q) {
      const double th = q[2];
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
      d(0, 0) = d(1, 1) = m;
      d(0, 2) = d(2, 0) = sgn * (m * l / 2) * std::cos(th);
      d(1, 2) = d(2, 1) = sgn * (m * l / 2) * std::sin(th);
      d(2, 2) = m * l * l / 4 + inertia;
      return d;
    };
    link.bias = [m, l, g, sgn](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
      const double th = q[2];
      const double w = qd[2];
      Eigen::VectorXd h(3);
      // COM at xi + sgn*(l/2)u: the theta-row Coriolis terms cancel exactly.
      h << -sgn * (m * l / 2) * w * w * std::sin(th),
          sgn * (m * l / 2) * w * w * std::cos(th) + m * g,
          sgn * (m * g * l / 2) * std::sin(th);
      return h;
    };
    link.input = (Eigen::MatrixXd(3, 1) << 0, 0, 1).finished();
    link.j_couple = (Eigen::MatrixXd(2, 3) << 1, 0, 0, 0, 1, 0).finished();
    if (pinned) {
      link.j_contact = [l](const Eigen::VectorXd& q) {
        const double th = q[2];
        Eigen::MatrixXd j(2, 3);
        j << 1, 0, -l * std::cos(th), 0, 1, -l * std::sin(th);
        return j;
      };
      link.jdot_contact = [l](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
        const double th = q[2];
        const double w = qd[2];
        Eigen::MatrixXd jd = Eigen::MatrixXd::Zero(2, 3);
        jd(0, 2) = l * std::sin(th) * w;
        jd(1, 2) = -l * std::cos(th) * w;
        return jd;
      };
    }
    return link;
  };

  const LagrangianModel pinned_link = make_link(-1.0, true, "pivot_link");
  const LagrangianModel free_link = make_link(+1.0, false, "swing_link");
  const OutputSpec out = default_angle_output(3, 2);

  DoublePendulumExample ex{{pinned_link, free_link},
                           {out, out},
                           {MechanicalChart(pinned_link, out), MechanicalChart(free_link, out)},
                           CcsModel{},
                           p};
  ex.ccs = to_ccs(ex.links[0], ex.links[1], ex.outputs[0], ex.outputs[1]);
  ex.ccs.name = "double_pendulum_pivot";
  return ex;
}

}  // namespace ccs
