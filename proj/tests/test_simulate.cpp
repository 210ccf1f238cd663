#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "ccs/mechanical.hpp"
#include "ccs/simulate.hpp"
#include "test_models.hpp"

using namespace ccs;

TEST_CASE("rk4_step has fourth order local accuracy on a linear field") {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, -4.0, -0.3;
  const Eigen::VectorXd b = (Eigen::VectorXd(2) << 0.2, -0.1).finished();
  auto rhs = [&](double, const Eigen::VectorXd& y) { return Eigen::VectorXd(a * y + b); };
  const Eigen::VectorXd y0 = (Eigen::VectorXd(2) << 1.0, 0.5).finished();

  auto local_err = [&](double h) {
    return (rk4_step(rhs, 0.0, y0, h) - test::affine_flow(a, b, y0, h))
        .lpNorm<Eigen::Infinity>();
  };
  const double e1 = local_err(0.1);
  const double e2 = local_err(0.05);
  CHECK(e1 / e2 > 25.0);  // h^5 local truncation, ratio 32 up to constants
  CHECK(e2 < 1e-6);
}

TEST_CASE("isolated simulation tracks the exact affine flow") {
  // constant breve maps keep lambda affine in the state, so the whole
  // isolated field is affine and the matrix exponential is the exact flow
  const CcsModel m = test::random_affine_ccs(101, false);
  const IsolatedModel iso = make_isolated(m, 0);

  // Build the linear field via FD of the isolated rhs (exact for affine maps).
  const int n = iso.n_x() + 2 * iso.n_z();
  auto pack_rhs = [&](const Eigen::VectorXd& y) {
    const IsolatedRhs r = isolated_rhs(iso, y.head(iso.n_x()), y.segment(iso.n_x(), iso.n_z()),
                                       y.tail(iso.n_z()), Eigen::VectorXd::Zero(iso.n_u()));
    Eigen::VectorXd out(n);
    out << r.xdot_i, r.zdot_i, r.zdot_j;
    return out;
  };
  Eigen::MatrixXd a(n, n);
  const Eigen::VectorXd bias = pack_rhs(Eigen::VectorXd::Zero(n));
  for (int c = 0; c < n; ++c) {
    a.col(c) = pack_rhs(Eigen::VectorXd::Unit(n, c)) - bias;
  }

  std::mt19937_64 rng(7);
  const Eigen::VectorXd x0 = m.x_box[0].sample(rng);
  const Eigen::VectorXd z0 = m.z_box[0].sample(rng);
  IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 1.0;
  const Trajectory traj = simulate_isolated(
      iso, [&](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(iso.n_u()).eval();
      },
      x0, z0, z0, cfg);

  REQUIRE(traj.samples() == 1001);
  Eigen::VectorXd y0(n);
  y0 << x0, z0, z0;
  const Eigen::VectorXd y_end = test::affine_flow(a, bias, y0, 1.0);
  CHECK((traj.states.row(traj.samples() - 1).transpose() - y_end).lpNorm<Eigen::Infinity>() <
        1e-9);
  CHECK(traj.step == 1e-3);
  CHECK(traj.times[traj.samples() - 1] == doctest::Approx(1.0));
}

TEST_CASE("initial z_j is projected onto the constraint manifold") {
  const CcsModel m = test::random_affine_ccs(102);
  const IsolatedModel iso = make_isolated(m, 0);
  std::mt19937_64 rng(11);
  const Eigen::VectorXd z_i0 = m.z_box[0].sample(rng);
  Eigen::VectorXd z_j0 = z_i0;
  z_j0[0] += 0.5;  // off the manifold on purpose
  IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 0.01;
  const Trajectory traj = simulate_isolated(
      iso, [&](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(iso.n_u()).eval();
      },
      m.x_box[0].sample(rng), z_i0, z_j0, cfg);
  CHECK((traj.states.row(0).segment(iso.n_x(), iso.n_z()).transpose() - z_i0).norm() ==
        doctest::Approx(0.0));
  CHECK((traj.states.row(0).tail(iso.n_z()).transpose() - z_i0).norm() == doctest::Approx(0.0));
  CHECK(max_constraint_violation(traj) < 1e-8);
}

TEST_CASE("isolated and full coupled runs agree on the manifold") {
  for (unsigned seed : {103u, 104u}) {
    const CcsModel m = test::random_affine_ccs(seed);
    const IsolatedModel iso = make_isolated(m, 0);

    std::mt19937_64 rng(seed);
    const Eigen::VectorXd x0 = 0.3 * m.x_box[0].sample(rng);
    const Eigen::VectorXd z0 = 0.3 * m.z_box[0].sample(rng);
    const IsolatedController u_iso = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                                         const Eigen::VectorXd&) {
      return Eigen::VectorXd(-0.5 * x.head(iso.n_u()));
    };

    IntegratorConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 1.0;
    const Trajectory iso_traj = simulate_isolated(iso, u_iso, x0, z0, z0, cfg);

    std::array<VertexController, 2> ctrl;
    ctrl[0] = make_vertex_controller(0, u_iso);
    ctrl[1] = make_induced_controller(iso.relation(), ctrl[0]);
    const Trajectory full_traj = simulate_full_cds(
        m, ctrl, {x0, Eigen::VectorXd::Zero(m.sub[1].n_x)}, {z0, z0}, cfg);

    const Trajectory lifted = reconstruct_full(iso_traj, iso);
    const TrajectoryError err = trajectory_error(lifted, full_traj);
    CHECK(err.max_state_error < 1e-9);
    CHECK(err.max_input_error < 1e-9);
    CHECK(err.max_lambda_error < 1e-9);
    CHECK(max_constraint_violation(full_traj) < 1e-9);
  }
}

TEST_CASE("reconstruct_full negates lambda when isolating vertex 1") {
  const CcsModel m = test::random_affine_ccs(105);
  const IsolatedModel iso = make_isolated(m, 1);
  std::mt19937_64 rng(3);
  const Eigen::VectorXd x0 = 0.3 * m.x_box[1].sample(rng);
  const Eigen::VectorXd z0 = 0.3 * m.z_box[1].sample(rng);
  IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 0.2;
  const Trajectory iso_traj = simulate_isolated(
      iso, [&](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(iso.n_u()).eval();
      },
      x0, z0, z0, cfg);
  const Trajectory lifted = reconstruct_full(iso_traj, iso);

  // lifted lambda rides the edge 0 -> 1; the isolated log rides 1 -> 0
  CHECK((lifted.lambdas + iso_traj.lambdas).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  // x_0 is the off vertex and embeds to zero
  CHECK(lifted.states.leftCols(m.sub[0].n_x).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  // per-vertex blocks land in the full layout [x_0, x_1, z_0, z_1]
  const int nx0 = m.sub[0].n_x, nx1 = m.sub[1].n_x, nz = m.n_z();
  CHECK((lifted.states.middleCols(nx0, nx1) - iso_traj.states.leftCols(nx1)).norm() ==
        doctest::Approx(0.0));
  // isolated layout is (x_1, z_1, z_0); full wants z_0 first
  CHECK((lifted.states.middleCols(nx0 + nx1, nz) - iso_traj.states.rightCols(nz)).norm() ==
        doctest::Approx(0.0));
  CHECK((lifted.states.rightCols(nz) - iso_traj.states.middleCols(nx1, nz)).norm() ==
        doctest::Approx(0.0));
}

TEST_CASE("io_linearizing_controller drives x exponentially to zero") {
  const CcsModel m = test::random_affine_ccs(106);
  const IsolatedModel iso = make_isolated(m, 0);
  const double eps = 2.0;
  const IsolatedController ctrl = io_linearizing_controller(iso, eps);

  std::mt19937_64 rng(5);
  const Eigen::VectorXd x0 = m.x_box[0].sample(rng);
  const Eigen::VectorXd z0 = m.z_box[0].sample(rng);

  // the random g has full row rank over x, so xdot = -eps x exactly
  const IsolatedRhs r = isolated_rhs(iso, x0, z0, z0, ctrl(x0, z0, z0));
  CHECK((r.xdot_i + eps * x0).lpNorm<Eigen::Infinity>() < 1e-9);

  IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 2.0;
  const Trajectory traj = simulate_isolated(iso, ctrl, x0, z0, z0, cfg);
  const Eigen::VectorXd x_end = traj.states.row(traj.samples() - 1).head(iso.n_x());
  const double expected = x0.lpNorm<Eigen::Infinity>() * std::exp(-eps * cfg.horizon);
  CHECK(x_end.lpNorm<Eigen::Infinity>() < expected * 1.01 + 1e-12);
}

TEST_CASE("unforced split cart conserves energy along the coupled run") {
  const SplitCartExample ex = example_split_cart();
  const int nz = ex.ccs.n_z();

  // antisymmetric pendulum deflection, cart at rest: admissible and bounded
  Eigen::VectorXd x0_front(2), x0_rear(2);
  x0_front << 0.3, 0.0;
  x0_rear << -0.3, 0.0;
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nz);

  std::array<VertexController, 2> ctrl = {make_zero_controller(1), make_zero_controller(1)};
  IntegratorConfig cfg;
  cfg.step = 1e-4;
  cfg.horizon = 2.0;
  const Trajectory traj = simulate_full_cds(ex.ccs, ctrl, {x0_front, x0_rear}, {z0, z0}, cfg);

  CHECK(max_constraint_violation(traj) < 1e-8);

  // map full-cds samples onto the unsplit coordinates q = (s, th1, th2)
  auto energy_at = [&](int row) {
    const Eigen::VectorXd s = traj.states.row(row);
    const double th1 = s[0], th1d = s[1], th2 = s[2], th2d = s[3];
    const double pos = s[4], vel = s[5];
    Eigen::VectorXd q(3), qd(3);
    q << pos, th1, th2;
    qd << vel, th1d, th2d;
    return test::split_cart_energy(ex, q, qd);
  };
  const double e0 = energy_at(0);
  double worst = 0.0;
  for (int r = 0; r < traj.samples(); r += 50)
    worst = std::max(worst, std::abs(energy_at(r) - e0));
  CHECK(worst < 1e-6 * std::max(1.0, std::abs(e0)));
}

TEST_CASE("baumgarte solver steers the constraint back to zero") {
  const SplitCartExample ex = example_split_cart();
  const BaumgarteGains gains{};
  const LambdaSolver stabilized = make_cdot_lambda_solver(ex.ccs, gains);
  const LambdaSolver plain = make_cdot_lambda_solver(ex.ccs);

  // state off the manifold: cart blocks disagree in position and velocity
  CcsState s;
  s.x = {(Eigen::VectorXd(2) << 0.2, 0.1).finished(),
         (Eigen::VectorXd(2) << -0.15, 0.0).finished()};
  s.z = {(Eigen::VectorXd(2) << 0.05, 0.30).finished(),
         (Eigen::VectorXd(2) << 0.02, 0.26).finished()};
  const std::array<Eigen::VectorXd, 2> u = {Eigen::VectorXd::Zero(1),
                                            Eigen::VectorXd::Zero(1)};
  const Eigen::VectorXd c = s.z[0] - s.z[1];

  // plain solve only zeroes the velocity row (the position row has no
  // coupling coefficient and carries cdot_pos = c_vel by structure)
  const Eigen::VectorXd cdot0 =
      coupling_velocity_residual(ex.ccs, s.x, s.z, u, plain(s, u));
  CHECK(std::abs(cdot0[1]) < 1e-10);
  CHECK(cdot0[0] == doctest::Approx(c[1]));

  // with gains the velocity row chases -2 alpha c_vel - beta c_pos, which
  // together with cdot_pos = c_vel damps the gap exponentially
  const Eigen::VectorXd cdot1 =
      coupling_velocity_residual(ex.ccs, s.x, s.z, u, stabilized(s, u));
  CHECK(cdot1[1] == doctest::Approx(-2 * gains.alpha * c[1] - gains.beta * c[0]).epsilon(1e-9));
}

TEST_CASE("baumgarte run stays on the manifold over a long horizon") {
  const SplitCartExample ex = example_split_cart();
  const int nz = ex.ccs.n_z();
  std::array<VertexController, 2> ctrl = {make_zero_controller(1), make_zero_controller(1)};
  IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 3.0;
  cfg.baumgarte = BaumgarteGains{};

  Eigen::VectorXd x0_front(2), x0_rear(2);
  x0_front << 0.2, 0.0;
  x0_rear << -0.2, 0.0;
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nz);
  const Trajectory traj = simulate_full_cds(ex.ccs, ctrl, {x0_front, x0_rear}, {z0, z0}, cfg);
  CHECK(max_constraint_violation(traj) < 1e-8);
}

TEST_CASE("periodicity_residual differences reset of last against first") {
  Trajectory traj;
  traj.times = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
  traj.states = Eigen::MatrixXd::Zero(3, 2);
  traj.states.row(0) << 1.0, 2.0;
  traj.states.row(2) << 1.5, 2.5;

  CHECK((periodicity_residual(traj, identity_reset()) -
         (Eigen::VectorXd(2) << 0.5, 0.5).finished())
            .norm() == doctest::Approx(0.0));

  const ResetMap flip = [](const Eigen::VectorXd& s) { return Eigen::VectorXd(-s); };
  CHECK((periodicity_residual(traj, flip) + (Eigen::VectorXd(2) << 2.5, 4.5).finished())
            .norm() == doctest::Approx(0.0));
}

TEST_CASE("degenerate integrator configs are rejected") {
  const CcsModel m = test::random_affine_ccs(107);
  const IsolatedModel iso = make_isolated(m, 0);
  const IsolatedController zero = [&](const Eigen::VectorXd&, const Eigen::VectorXd&,
                                      const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(iso.n_u()).eval();
  };
  IntegratorConfig cfg;
  cfg.step = 0.0;
  cfg.horizon = 1.0;
  CHECK_THROWS(simulate_isolated(iso, zero, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3),
                                 Eigen::VectorXd::Zero(3), cfg));
  cfg.step = 1e-3;
  cfg.horizon = -1.0;
  CHECK_THROWS(simulate_isolated(iso, zero, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3),
                                 Eigen::VectorXd::Zero(3), cfg));
}

TEST_CASE("trajectory_error rejects mismatched grids") {
  Trajectory a, b;
  a.times = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
  b.times = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
  a.states = Eigen::MatrixXd::Zero(3, 2);
  b.states = Eigen::MatrixXd::Zero(4, 2);
  a.inputs = Eigen::MatrixXd::Zero(3, 1);
  b.inputs = Eigen::MatrixXd::Zero(4, 1);
  a.lambdas = Eigen::MatrixXd::Zero(3, 1);
  b.lambdas = Eigen::MatrixXd::Zero(4, 1);
  CHECK_THROWS_AS(trajectory_error(a, b), DimensionError);
}
