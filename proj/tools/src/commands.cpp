#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "artifacts.hpp"
#include "ccs/reduction.hpp"

namespace ccs::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// io-linear feedback needs x0 = (y0, -eps y0) for the decay to be exact; the
// zero controller just gets a plain offset.
Eigen::VectorXd default_x0(const IsolatedModel& iso, const std::string& controller,
                           double eps) {
  const int n_x = iso.n_x();
  const int half = n_x / 2;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n_x);
  x0.head(half).setConstant(0.1);
  if (controller == "io_linear") x0.tail(n_x - half) = -eps * x0.head(n_x - half);
  return x0;
}

IsolatedController pick_controller(const IsolatedModel& iso, const std::string& name,
                                   double eps) {
  if (name == "zero") {
    const int n_u = iso.n_u();
    return [n_u](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(n_u).eval();
    };
  }
  return io_linearizing_controller(iso, eps);
}

void check_dim(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n)
    throw ConfigError(std::string(what) + " has length " + std::to_string(v.size()) +
                      ", expected " + std::to_string(n));
}

double max_error(const TrajectoryError& e) {
  return std::max({e.max_state_error, e.max_input_error, e.max_lambda_error});
}

json check_json(const VerifyCheck& c) {
  return json{{"name", c.name},
              {"value", c.value},
              {"threshold", c.threshold},
              {"comparison", c.comparison},
              {"pass", c.pass}};
}

}  // namespace

VerifyReport run_verify(const RunConfig& cfg) {
  const VerifyConfig& v = cfg.verify;
  const CcsModel model = build_model(cfg);
  const IsolatedModel iso = make_isolated(model, 0);
  const IsolatedController ctrl = io_linearizing_controller(iso, v.epsilon);

  const Eigen::VectorXd x0 = default_x0(iso, "io_linear", v.epsilon);
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(iso.n_z());
  const Eigen::VectorXd x0_other = Eigen::VectorXd::Zero(iso.n_x_j());

  VertexController c_i = make_vertex_controller(iso.vertex(), ctrl);
  VertexController c_j = make_induced_controller(iso.relation(), c_i);
  if (v.break_relation) {
    // deliberate corruption: vertex j leaves its zero-dynamics manifold
    VertexController honest = c_j;
    c_j = [honest](const CcsState& s) { return Eigen::VectorXd(1.05 * honest(s)); };
  }
  std::array<VertexController, 2> controllers;
  controllers[iso.vertex()] = c_i;
  controllers[iso.other()] = c_j;
  std::array<Eigen::VectorXd, 2> full_x0;
  full_x0[iso.vertex()] = x0;
  full_x0[iso.other()] = x0_other;

  auto discrepancy_at = [&](double step) {
    IntegratorConfig icfg;
    icfg.step = step;
    icfg.horizon = v.horizon;
    Trajectory iso_traj = simulate_isolated(iso, ctrl, x0, z0, z0, icfg);
    Trajectory full_traj = simulate_full_cds(model, controllers, full_x0, {z0, z0}, icfg);
    Trajectory recon = reconstruct_full(iso_traj, iso);
    struct Out {
      double disc;
      double constraint;
    } out{max_error(trajectory_error(recon, full_traj)),
          std::max(max_constraint_violation(iso_traj), max_constraint_violation(full_traj))};
    return out;
  };

  const auto coarse = discrepancy_at(v.step);
  const auto fine = discrepancy_at(v.step / 2.0);

  VerifyReport rep;
  rep.checks.push_back({"theorem1_equivalence", coarse.disc, 1e-5, "<=", coarse.disc <= 1e-5});
  rep.checks.push_back(
      {"constraint_preservation", std::max(coarse.constraint, fine.constraint), 1e-6, "<=",
       std::max(coarse.constraint, fine.constraint) <= 1e-6});

  // RK4 order dominance until both discrepancies sit on the lambda-solve
  // round-off floor, where the ratio is meaningless; report whichever branch
  // actually decided the check so the tuple stays self-consistent.
  const double floor = 1e-10;
  const double ratio = fine.disc > 0.0 ? coarse.disc / fine.disc : 8.0;
  const bool on_floor = coarse.disc <= floor && fine.disc <= floor;
  if (on_floor)
    rep.checks.push_back(
        {"order_halving", std::max(coarse.disc, fine.disc), floor, "<=", true});
  else
    rep.checks.push_back({"order_halving", ratio, 8.0, ">=", ratio >= 8.0});

  std::mt19937_64 rng(cfg.seed);
  const Box x_box = Box::centered(iso.n_x(), 1.0);
  const Box z_box = Box::centered(iso.n_z(), 1.0);
  const Box u_box = Box::centered(iso.n_u(), 1.0);
  double worst_inv = 0.0;
  double worst_rate = 0.0;
  for (int k = 0; k < v.points; ++k) {
    const Eigen::VectorXd x = x_box.sample(rng);
    const Eigen::VectorXd z = z_box.sample(rng);
    const Eigen::VectorXd u = u_box.sample(rng);
    const Eigen::VectorXd inv = zero_invariance_residual(iso.relation(), x, {z, z}, u);
    worst_inv = std::max(worst_inv, inv.lpNorm<Eigen::Infinity>());
    const ManifoldResiduals mr = manifold_residuals(iso, x, z, z, u);
    worst_rate = std::max(worst_rate, mr.cdot.lpNorm<Eigen::Infinity>());
  }
  rep.checks.push_back({"zero_invariance", worst_inv, 1e-10, "<=", worst_inv <= 1e-10});
  rep.checks.push_back({"constraint_rate", worst_rate, 1e-10, "<=", worst_rate <= 1e-10});

  rep.pass = true;
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
  return rep;
}

int cmd_verify(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out);
  const VerifyReport rep = run_verify(cfg);

  json doc{{"pass", rep.pass}, {"checks", json::array()}};
  for (const auto& c : rep.checks) {
    doc["checks"].push_back(check_json(c));
    std::printf("%s  %-24s %.3e (%s %.1e)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.comparison.c_str(), c.threshold);
  }
  write_json_file((fs::path(cfg.out) / "verify_report.json").string(), doc);
  write_manifest(cfg.out, "verify", cfg, seconds_since(t0), {"verify_report.json"});
  return rep.pass ? 0 : 1;
}

Trajectory run_simulate(const RunConfig& cfg) {
  const SimulateConfig& s = cfg.simulate;
  const CcsModel model = build_model(cfg);
  const IsolatedModel iso = make_isolated(model, s.vertex);

  Eigen::VectorXd x0 = s.x0 ? *s.x0 : default_x0(iso, s.controller, s.epsilon);
  Eigen::VectorXd z0 = s.z0 ? *s.z0 : Eigen::VectorXd::Zero(iso.n_z());
  check_dim(x0, iso.n_x(), "simulate.x0");
  check_dim(z0, iso.n_z(), "simulate.z0");

  IntegratorConfig icfg;
  icfg.step = s.step;
  icfg.horizon = s.horizon;
  if (s.baumgarte) icfg.baumgarte = BaumgarteGains{};

  const IsolatedController ctrl = pick_controller(iso, s.controller, s.epsilon);
  if (s.system == "isolated") return simulate_isolated(iso, ctrl, x0, z0, z0, icfg);

  std::array<VertexController, 2> controllers;
  if (s.controller == "zero") {
    controllers[0] = make_zero_controller(model.sub[0].n_u);
    controllers[1] = make_zero_controller(model.sub[1].n_u);
  } else {
    controllers[s.vertex] = make_vertex_controller(s.vertex, ctrl);
    controllers[iso.other()] = make_induced_controller(iso.relation(), controllers[s.vertex]);
  }
  Eigen::VectorXd x0_other =
      s.x0_2 ? *s.x0_2 : Eigen::VectorXd::Zero(model.sub[iso.other()].n_x).eval();
  check_dim(x0_other, model.sub[iso.other()].n_x, "simulate.x0_2");
  std::array<Eigen::VectorXd, 2> full_x0;
  full_x0[s.vertex] = x0;
  full_x0[iso.other()] = x0_other;
  return simulate_full_cds(model, controllers, full_x0, {z0, z0}, icfg);
}

int cmd_simulate(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out);
  const Trajectory traj = run_simulate(cfg);

  std::vector<std::string> outputs{"trajectory.csv"};
  write_trajectory_csv((fs::path(cfg.out) / "trajectory.csv").string(), traj);
  for (const auto& f : write_plots(cfg.out, traj, cfg.plots, {})) outputs.push_back(f);
  write_manifest(cfg.out, "simulate", cfg, seconds_since(t0), outputs);
  std::printf("wrote %d samples to %s/trajectory.csv\n", traj.samples(), cfg.out.c_str());
  return 0;
}

OptimizeArtifacts run_optimize(const RunConfig& cfg) {
  const OptimizeConfig& o = cfg.optimize;
  const CcsModel model = build_model(cfg);
  const IsolatedModel iso = make_isolated(model, 0);

  Grid grid{o.grid_k, o.period};
  TranscriptionOptions opt;
  opt.cost = o.cost;
  opt.reset = identity_reset();
  opt.anchor = {o.anchor_coord, o.anchor_value};
  opt.free_period = o.free_period;
  opt.period_min = o.period_min;
  opt.period_max = o.period_max;
  opt.contraction_eps = o.contraction_epsilon;
  if (o.amplitude) opt.path.push_back(amplitude_limit(iso, *o.amplitude));
  if (o.lambda_ceiling) opt.path.push_back(lambda_ceiling(iso, *o.lambda_ceiling));

  TranscribedProblem problem = assemble(iso, grid, opt);
  const Eigen::VectorXd guess = make_initial_guess(problem.layout);

  OptimizeArtifacts art;
  art.solution = solve_nlp(problem.nlp, guess, o.solver);
  art.post = postcheck(iso, problem.layout, art.solution.x, opt, o.substeps);
  art.node_trajectory = solution_to_trajectory(iso, problem.layout, art.solution.x);
  art.full_orbit = reconstruct_full(art.node_trajectory, iso);
  art.full_orbit_periodicity_inf =
      periodicity_residual(art.full_orbit, identity_reset()).lpNorm<Eigen::Infinity>();
  art.period = problem.layout.period(art.solution.x);
  return art;
}

int cmd_optimize(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out);
  const OptimizeArtifacts art = run_optimize(cfg);
  const NlpSolution& sol = art.solution;

  std::vector<std::string> outputs{"solution.csv", "full_orbit.csv", "solution.json",
                                   "postcheck.json", "iterations.csv"};
  write_trajectory_csv((fs::path(cfg.out) / "solution.csv").string(), art.node_trajectory);
  write_trajectory_csv((fs::path(cfg.out) / "full_orbit.csv").string(), art.full_orbit);

  json sol_doc{{"status", to_string(sol.status)},
               {"cost", sol.cost},
               {"kkt_stationarity", sol.kkt_stationarity},
               {"kkt_equality", sol.kkt_equality},
               {"kkt_inequality", sol.kkt_inequality},
               {"iterations", sol.iterations},
               {"outer_iterations", sol.outer_iterations},
               {"wall_time_s", sol.wall_time_s},
               {"period", art.period},
               {"initial_bound_violations", sol.initial_bound_violations}};
  write_json_file((fs::path(cfg.out) / "solution.json").string(), sol_doc);

  json post_doc{{"equality_inf", art.post.equality_inf},
                {"periodicity_inf", art.post.periodicity_inf},
                {"resim_return_inf_zoh", art.post.resim_return_inf_zoh},
                {"resim_return_inf_linear", art.post.resim_return_inf_linear},
                {"full_orbit_periodicity_inf", art.full_orbit_periodicity_inf}};
  write_json_file((fs::path(cfg.out) / "postcheck.json").string(), post_doc);

  {
    std::ofstream it((fs::path(cfg.out) / "iterations.csv").string(), std::ios::binary);
    it << "iteration,merit,feasibility,step_length\n";
    char buf[128];
    for (const auto& r : sol.log) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.iteration, r.merit,
                    r.feasibility, r.step_length);
      it << buf;
    }
  }

  const std::vector<PlotSpec> fallback{{"z_i[0]", "z_i[1]", "phase_portrait.svg"}};
  for (const auto& f : write_plots(cfg.out, art.node_trajectory, cfg.plots, fallback))
    outputs.push_back(f);
  write_manifest(cfg.out, "optimize", cfg, seconds_since(t0), outputs);

  std::printf("%s  cost %.6e  eq %.3e  resim %.3e  (%d inner / %d outer, %.2f s)\n",
              to_string(sol.status).c_str(), sol.cost, sol.kkt_equality,
              art.post.resim_return_inf_zoh, sol.iterations, sol.outer_iterations,
              sol.wall_time_s);
  return sol.converged() ? 0 : 1;
}

}  // namespace ccs::cli
