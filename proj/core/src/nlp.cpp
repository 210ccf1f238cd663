#include "ccs/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "ccs/errors.hpp"

namespace ccs {
namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

double violation_inf(const Eigen::VectorXd& g) {
  return g.size() == 0 ? 0.0 : std::max(0.0, -g.minCoeff());
}

// Bound rows folded after the user inequalities:
//   x[i] - lb[i] >= 0 for finite lb, then ub[i] - x[i] >= 0 for finite ub.
struct BoundRows {
  std::vector<int> lower;
  std::vector<int> upper;

  int count() const { return static_cast<int>(lower.size() + upper.size()); }
};

BoundRows finite_bounds(const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) {
  BoundRows rows;
  for (int i = 0; i < lb.size(); ++i)
    if (std::isfinite(lb[i])) rows.lower.push_back(i);
  for (int i = 0; i < ub.size(); ++i)
    if (std::isfinite(ub[i])) rows.upper.push_back(i);
  return rows;
}

// Everything the augmented Lagrangian needs at one point.
struct PointEval {
  double f = 0.0;
  Eigen::VectorXd c;  // equalities
  Eigen::VectorXd g;  // inequalities, bounds folded in
};

struct PointDerivs {
  Eigen::VectorXd gf;
  Eigen::MatrixXd jc;
  Eigen::MatrixXd jg;
};

class AlmWorkspace {
 public:
  AlmWorkspace(const NlpProblem& p, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub)
      : p_(p), lb_(lb), ub_(ub), bounds_(finite_bounds(lb, ub)) {}

  int n() const { return static_cast<int>(lb_.size()); }

  PointEval eval(const Eigen::VectorXd& x) const {
    PointEval e;
    e.f = p_.cost(x);
    e.c = p_.equality ? p_.equality(x) : Eigen::VectorXd();
    const Eigen::VectorXd user = p_.inequality ? p_.inequality(x) : Eigen::VectorXd();
    e.g.resize(user.size() + bounds_.count());
    e.g.head(user.size()) = user;
    int at = static_cast<int>(user.size());
    for (int i : bounds_.lower) e.g[at++] = x[i] - lb_[i];
    for (int i : bounds_.upper) e.g[at++] = ub_[i] - x[i];
    return e;
  }

  PointDerivs derivs(const Eigen::VectorXd& x, int n_c, int n_g) const {
    PointDerivs d;
    d.gf = p_.cost_gradient(x);
    d.jc = n_c > 0 ? p_.eq_jacobian(x) : Eigen::MatrixXd(0, n());
    const int n_user = n_g - bounds_.count();
    d.jg.setZero(n_g, n());
    if (n_user > 0) d.jg.topRows(n_user) = p_.ineq_jacobian(x);
    int at = n_user;
    for (int i : bounds_.lower) d.jg(at++, i) = 1.0;
    for (int i : bounds_.upper) d.jg(at++, i) = -1.0;
    return d;
  }

  // AL(x) = f + lam' c + rho/2 |c|^2 + sum_j [ rho/2 max(0, mu_j/rho - g_j)^2
  //         - mu_j^2 / (2 rho) ]
  double value(const PointEval& e, const Eigen::VectorXd& lam, const Eigen::VectorXd& mu,
               double rho) const {
    double v = e.f;
    if (e.c.size() > 0) v += lam.dot(e.c) + 0.5 * rho * e.c.squaredNorm();
    for (int j = 0; j < e.g.size(); ++j) {
      const double t = mu[j] / rho - e.g[j];
      if (t > 0.0) v += 0.5 * rho * t * t;
      v -= mu[j] * mu[j] / (2.0 * rho);
    }
    return v;
  }

  // s_j = rho max(0, mu_j/rho - g_j); also the first-order multiplier estimate.
  static Eigen::VectorXd shifted_slack(const PointEval& e, const Eigen::VectorXd& mu,
                                       double rho) {
    Eigen::VectorXd s = (mu.array() - rho * e.g.array()).max(0.0).matrix();
    return s;
  }

  Eigen::VectorXd gradient(const PointEval& e, const PointDerivs& d, const Eigen::VectorXd& lam,
                           const Eigen::VectorXd& mu, double rho) const {
    Eigen::VectorXd grad = d.gf;
    if (e.c.size() > 0) grad += d.jc.transpose() * (lam + rho * e.c).eval();
    if (e.g.size() > 0) grad -= d.jg.transpose() * shifted_slack(e, mu, rho);
    return grad;
  }

  // Gradient of the ordinary Lagrangian at frozen multiplier estimates; the
  // difference of these across a step feeds the curvature update without the
  // rho J'J part the Gauss-Newton term already models.
  Eigen::VectorXd lagrangian_gradient(const PointDerivs& d, const Eigen::VectorXd& pi,
                                      const Eigen::VectorXd& s) const {
    Eigen::VectorXd grad = d.gf;
    if (pi.size() > 0) grad += d.jc.transpose() * pi;
    if (s.size() > 0) grad -= d.jg.transpose() * s;
    return grad;
  }

 private:
  const NlpProblem& p_;
  Eigen::VectorXd lb_, ub_;
  BoundRows bounds_;
};

struct InnerResult {
  PointEval eval;
  PointDerivs derivs;
  int iterations = 0;
  bool stalled = false;
};

// Minimizes the augmented Lagrangian for fixed multipliers: damped BFGS plus
// the Gauss-Newton term rho (Jc'Jc + Jact'Jact), Armijo backtracking.
InnerResult minimize_inner(const AlmWorkspace& ws, Eigen::VectorXd& x, Eigen::MatrixXd& bfgs,
                           const Eigen::VectorXd& lam, const Eigen::VectorXd& mu, double rho,
                           double tol, const SolverConfig& cfg,
                           std::vector<IterationRecord>& log, int& global_iter) {
  const int n = ws.n();
  InnerResult res;
  res.eval = ws.eval(x);
  res.derivs = ws.derivs(x, static_cast<int>(res.eval.c.size()),
                         static_cast<int>(res.eval.g.size()));
  Eigen::VectorXd grad = ws.gradient(res.eval, res.derivs, lam, mu, rho);
  double merit = ws.value(res.eval, lam, mu, rho);

  for (int it = 0; it < cfg.max_inner; ++it) {
    if (inf_norm(grad) <= tol) break;
    res.iterations = it + 1;

    Eigen::MatrixXd h = bfgs;
    if (res.eval.c.size() > 0)
      h += rho * (res.derivs.jc.transpose() * res.derivs.jc);
    if (res.eval.g.size() > 0) {
      const Eigen::VectorXd s = AlmWorkspace::shifted_slack(res.eval, mu, rho);
      for (int j = 0; j < s.size(); ++j)
        if (s[j] > 0.0)
          h += rho * (res.derivs.jg.row(j).transpose() * res.derivs.jg.row(j));
    }

    Eigen::VectorXd d;
    double sigma = 1e-8;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h + sigma * Eigen::MatrixXd::Identity(n, n));
      if (ldlt.info() == Eigen::Success) {
        d = ldlt.solve(-grad);
        if (d.allFinite() && grad.dot(d) < 0.0) break;
      }
      sigma *= 100.0;
      d.resize(0);
    }
    if (d.size() == 0) d = -grad;

    double directional = grad.dot(d);
    double alpha = 1.0;
    bool accepted = false;
    PointEval trial;
    for (int pass = 0; pass < 2 && !accepted; ++pass) {
      if (pass == 1) {  // quasi-Newton direction failed; restart from steepest descent
        d = -grad;
        directional = grad.dot(d);
        alpha = 1.0 / std::max(1.0, inf_norm(grad));
      }
      for (int ls = 0; ls < cfg.max_linesearch; ++ls) {
        trial = ws.eval(x + alpha * d);
        const double m = ws.value(trial, lam, mu, rho);
        if (std::isfinite(m) && m <= merit + cfg.armijo * alpha * directional) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }

    const Eigen::VectorXd step = alpha * d;
    const Eigen::VectorXd x_new = x + step;
    PointDerivs derivs_new = ws.derivs(x_new, static_cast<int>(trial.c.size()),
                                       static_cast<int>(trial.g.size()));
    Eigen::VectorXd grad_new = ws.gradient(trial, derivs_new, lam, mu, rho);

    // damped BFGS on the Lagrangian part (multiplier estimates frozen at the
    // new point so the rho J'J curvature stays out of the update)
    const Eigen::VectorXd pi =
        trial.c.size() > 0 ? Eigen::VectorXd(lam + rho * trial.c) : Eigen::VectorXd();
    const Eigen::VectorXd s_hat = AlmWorkspace::shifted_slack(trial, mu, rho);
    const Eigen::VectorXd y = ws.lagrangian_gradient(derivs_new, pi, s_hat) -
                              ws.lagrangian_gradient(res.derivs, pi, s_hat);
    const double ss = step.squaredNorm();
    if (ss > 1e-28) {
      const Eigen::VectorXd bs = bfgs * step;
      const double sbs = step.dot(bs);
      double sy = step.dot(y);
      Eigen::VectorXd y_used = y;
      if (sy < 0.2 * sbs && sbs - sy > 0.0) {
        const double theta = 0.8 * sbs / (sbs - sy);
        y_used = theta * y + (1.0 - theta) * bs;
        sy = step.dot(y_used);
      }
      if (sy > 1e-14 * std::sqrt(ss) && sbs > 0.0)
        bfgs += y_used * y_used.transpose() / sy - bs * bs.transpose() / sbs;
    }

    x = x_new;
    res.eval = trial;
    res.derivs = std::move(derivs_new);
    grad = std::move(grad_new);
    merit = ws.value(res.eval, lam, mu, rho);
    log.push_back({++global_iter, merit,
                   std::max(violation_inf(res.eval.g), inf_norm(res.eval.c)), alpha});

    if (inf_norm(step) <= 1e-14 * (1.0 + inf_norm(x))) break;
  }
  return res;
}

}  // namespace

int NlpProblem::n_equalities(const Eigen::VectorXd& x) const {
  return equality ? static_cast<int>(equality(x).size()) : 0;
}

int NlpProblem::n_inequalities(const Eigen::VectorXd& x) const {
  return inequality ? static_cast<int>(inequality(x).size()) : 0;
}

Eigen::VectorXd NlpProblem::cost_gradient(const Eigen::VectorXd& x) const {
  if (gradient) return gradient(x);
  return central_gradient(cost, x, fd_step);
}

Eigen::MatrixXd NlpProblem::eq_jacobian(const Eigen::VectorXd& x) const {
  if (equality_jacobian) return equality_jacobian(x);
  return central_jacobian(equality, x, fd_step);
}

Eigen::MatrixXd NlpProblem::ineq_jacobian(const Eigen::VectorXd& x) const {
  if (inequality_jacobian) return inequality_jacobian(x);
  return central_jacobian(inequality, x, fd_step);
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iterations:
      return "max_iterations";
    case SolveStatus::line_search_failure:
      return "line_search_failure";
  }
  return "unknown";
}

NlpSolution solve_nlp(const NlpProblem& problem, const Eigen::VectorXd& x0,
                      const SolverConfig& cfg) {
  if (!problem.cost) throw std::invalid_argument("solve_nlp needs a cost function");
  const auto t_start = std::chrono::steady_clock::now();

  const int n = static_cast<int>(x0.size());
  Eigen::VectorXd lb = problem.lb;
  Eigen::VectorXd ub = problem.ub;
  if (lb.size() == 0) lb.setConstant(n, -std::numeric_limits<double>::infinity());
  if (ub.size() == 0) ub.setConstant(n, std::numeric_limits<double>::infinity());
  if (lb.size() != n || ub.size() != n)
    throw DimensionError("solve_nlp: bound vectors do not match the decision size");

  NlpSolution sol;
  for (int i = 0; i < n; ++i)
    if (x0[i] < lb[i] || x0[i] > ub[i]) sol.initial_bound_violations.push_back(i);

  AlmWorkspace ws(problem, lb, ub);
  Eigen::VectorXd x = x0;
  PointEval e = ws.eval(x);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(e.c.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(e.g.size());
  double rho = cfg.rho0;
  Eigen::MatrixXd bfgs = Eigen::MatrixXd::Identity(n, n);

  double prev_feas = std::numeric_limits<double>::infinity();
  bool last_stalled = false;
  int global_iter = 0;

  Eigen::VectorXd best_x = x;
  double best_feas = std::max(inf_norm(e.c), violation_inf(e.g));
  double best_cost = e.f;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    sol.outer_iterations = outer + 1;
    const double inner_tol = std::max(cfg.stat_tol * std::pow(0.1, outer), 1e-12);
    InnerResult inner =
        minimize_inner(ws, x, bfgs, lam, mu, rho, inner_tol, cfg, sol.log, global_iter);
    sol.iterations += inner.iterations;
    last_stalled = inner.stalled;
    e = inner.eval;

    const double feas_eq = inf_norm(e.c);
    const double feas_in = violation_inf(e.g);
    const double feas = std::max(feas_eq, feas_in);

    lam += rho * e.c;
    mu = (mu - rho * e.g).cwiseMax(0.0);

    const Eigen::VectorXd stat_grad = ws.lagrangian_gradient(inner.derivs, lam, mu);
    const double stat = inf_norm(stat_grad);

    if (cfg.verbose)
      std::printf("outer %2d  rho %.1e  feas %.3e  stat %.3e  cost %.6e  inner %d\n", outer,
                  rho, feas, stat, e.f, inner.iterations);

    if (feas < best_feas || (feas <= best_feas && e.f < best_cost)) {
      best_x = x;
      best_feas = feas;
      best_cost = e.f;
    }

    if (feas_eq <= cfg.eq_tol && feas_in <= cfg.ineq_tol && stat <= cfg.stat_tol) {
      sol.status = SolveStatus::converged;
      sol.x = x;
      sol.cost = e.f;
      sol.kkt_stationarity = stat;
      sol.kkt_equality = feas_eq;
      sol.kkt_inequality = feas_in;
      sol.multipliers_eq = lam;
      sol.multipliers_ineq = mu;
      sol.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      return sol;
    }

    if (feas > 0.25 * prev_feas && rho < cfg.rho_max)
      rho = std::min(rho * cfg.rho_growth, cfg.rho_max);
    prev_feas = feas;
  }

  sol.status = last_stalled ? SolveStatus::line_search_failure : SolveStatus::max_iterations;
  sol.x = best_x;
  PointEval be = ws.eval(best_x);
  PointDerivs bd = ws.derivs(best_x, static_cast<int>(be.c.size()),
                             static_cast<int>(be.g.size()));
  sol.cost = be.f;
  sol.kkt_equality = inf_norm(be.c);
  sol.kkt_inequality = violation_inf(be.g);
  sol.kkt_stationarity = inf_norm(ws.lagrangian_gradient(bd, lam, mu));
  sol.multipliers_eq = lam;
  sol.multipliers_ineq = mu;
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return sol;
}

}  // namespace ccs
