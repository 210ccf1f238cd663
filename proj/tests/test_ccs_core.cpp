#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "ccs/ccs.hpp"
#include "test_models.hpp"

using namespace ccs;

TEST_CASE("validate accepts the random affine pair") {
  CHECK_NOTHROW(validate(test::random_affine_ccs(1)));
}

TEST_CASE("validate rejects mismatched coupled dimensions") {
  CcsModel m = test::random_affine_ccs(2);
  m.sub[1].n_z = m.sub[0].n_z + 1;
  CHECK_THROWS_AS(validate(m), DimensionError);

  CcsModel m2 = test::random_affine_ccs(3);
  m2.sub[0].n_lambda = 1;
  CHECK_THROWS_AS(validate(m2), DimensionError);

  CcsModel m3 = test::random_affine_ccs(4);
  m3.u_box[1] = Box::centered(m3.sub[1].n_u + 2, 1.0);
  CHECK_THROWS_AS(validate(m3), DimensionError);
}

TEST_CASE("checked map evaluation names the offending map") {
  CcsModel m = test::random_affine_ccs(5);
  m.sub[0].f = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(7).eval();
  };
  try {
    m.sub[0].f_at(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("f") != std::string::npos);
  }
}

TEST_CASE("eval_rhs matches the affine maps assembled by hand") {
  const CcsModel m = test::random_affine_ccs(6);
  std::mt19937_64 rng(99);
  const Eigen::VectorXd x = m.x_box[0].sample(rng);
  const Eigen::VectorXd z0 = m.z_box[0].sample(rng);
  const Eigen::VectorXd z1 = m.z_box[1].sample(rng);
  const Eigen::VectorXd u = m.u_box[0].sample(rng);
  const Eigen::VectorXd lam = Eigen::VectorXd::Random(m.n_lambda());

  const SubsystemRhs rhs = eval_rhs(m, 0, x, z0, z1, u, lam);
  const SubsystemModel& s = m.sub[0];
  const Eigen::VectorXd xdot =
      s.f_at(x, z0) + s.g_at(x, z0) * u + s.g_breve_at(x, z0, z1) * lam;
  const Eigen::VectorXd zdot =
      s.p_at(x, z0) + s.q_at(x, z0) * u + s.q_breve_at(x, z0, z1) * lam;
  CHECK((rhs.xdot - xdot).norm() == doctest::Approx(0.0));
  CHECK((rhs.zdot - zdot).norm() == doctest::Approx(0.0));
}

TEST_CASE("embed zeroes the off vertex and copies the rest") {
  const CcsModel m = test::random_affine_ccs(7);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd x1 = m.x_box[1].sample(rng);
  const std::array<Eigen::VectorXd, 2> z = {m.z_box[0].sample(rng), m.z_box[1].sample(rng)};

  const CcsState s = embed(m, 1, x1, z);
  CHECK(s.x[0].isZero(0.0));
  CHECK(s.x[1] == x1);
  CHECK(s.z[0] == z[0]);
  CHECK(s.z[1] == z[1]);
}

TEST_CASE("lambda_on negates across the reversed edge") {
  CcsState s;
  s.lambda[0] = (Eigen::VectorXd(2) << 1.0, -2.0).finished();
  CHECK(s.lambda_on(0) == *s.lambda[0]);
  CHECK(s.lambda_on(1) == -*s.lambda[0]);

  s.lambda[1] = (Eigen::VectorXd(2) << -1.0, 2.0).finished();
  CHECK(s.lambda_antisymmetric());
  *s.lambda[1] = (Eigen::VectorXd(2) << -1.0, 2.5).finished();
  CHECK_FALSE(s.lambda_antisymmetric(1e-9));
}

TEST_CASE("coupling residual and its rate") {
  const CcsModel m = test::random_affine_ccs(8);
  std::mt19937_64 rng(17);
  const std::array<Eigen::VectorXd, 2> x = {m.x_box[0].sample(rng), m.x_box[1].sample(rng)};
  const std::array<Eigen::VectorXd, 2> z = {m.z_box[0].sample(rng), m.z_box[1].sample(rng)};
  const std::array<Eigen::VectorXd, 2> u = {m.u_box[0].sample(rng), m.u_box[1].sample(rng)};
  const Eigen::VectorXd lam = Eigen::VectorXd::Random(m.n_lambda());

  CHECK((coupling_residual(z[0], z[1]) - (z[0] - z[1])).norm() == doctest::Approx(0.0));

  // cdot_e must be zdot_0(lam) - zdot_1(-lam)
  const Eigen::VectorXd cdot = coupling_velocity_residual(m, x, z, u, lam);
  const Eigen::VectorXd zdot0 = eval_rhs(m, 0, x[0], z[0], z[1], u[0], lam).zdot;
  const Eigen::VectorXd zdot1 = eval_rhs(m, 1, x[1], z[1], z[0], u[1], -lam).zdot;
  CHECK((cdot - (zdot0 - zdot1)).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("closed_loop_rhs wires controllers and the lambda solver through") {
  const CcsModel m = test::random_affine_ccs(9);
  std::mt19937_64 rng(3);
  CcsState s;
  s.x = {m.x_box[0].sample(rng), m.x_box[1].sample(rng)};
  s.z = {m.z_box[0].sample(rng), m.z_box[1].sample(rng)};

  const Eigen::VectorXd u0 = (Eigen::VectorXd(2) << 0.3, -0.1).finished();
  const Eigen::VectorXd lam_fixed = (Eigen::VectorXd(3) << 0.2, 0.0, -0.4).finished();
  std::array<VertexController, 2> ctrl;
  ctrl[0] = [u0](const CcsState&) { return u0; };
  ctrl[1] = [](const CcsState& st) { return Eigen::VectorXd(2.0 * st.z[1].head(2)); };
  LambdaSolver solver = [lam_fixed](const CcsState&, const std::array<Eigen::VectorXd, 2>&) {
    return lam_fixed;
  };

  const CdsDeriv d = closed_loop_rhs(m, ctrl, solver)(s);
  CHECK(d.u[0] == u0);
  CHECK((d.u[1] - 2.0 * s.z[1].head(2)).norm() == doctest::Approx(0.0));
  CHECK(d.lambda_e == lam_fixed);
  const SubsystemRhs r0 = eval_rhs(m, 0, s.x[0], s.z[0], s.z[1], d.u[0], lam_fixed);
  const SubsystemRhs r1 = eval_rhs(m, 1, s.x[1], s.z[1], s.z[0], d.u[1], -lam_fixed);
  CHECK((d.xdot[0] - r0.xdot).norm() == doctest::Approx(0.0));
  CHECK((d.zdot[1] - r1.zdot).norm() == doctest::Approx(0.0));
}

TEST_CASE("box membership and sampling") {
  const Box b = Box::centered(3, 0.5);
  CHECK(b.contains(Eigen::VectorXd::Zero(3)));
  CHECK(b.contains((Eigen::VectorXd(3) << 0.5, -0.5, 0.5).finished()));
  CHECK_FALSE(b.contains((Eigen::VectorXd(3) << 0.51, 0, 0).finished()));
  CHECK(b.contains((Eigen::VectorXd(3) << 0.51, 0, 0).finished(), 0.02));

  std::mt19937_64 rng(42);
  for (int k = 0; k < 200; ++k) CHECK(b.contains(b.sample(rng)));

  const Box ub = Box::unbounded(2);
  CHECK(ub.contains((Eigen::VectorXd(2) << 1e12, -1e12).finished()));
}

TEST_CASE("rcond on known matrices") {
  CHECK(rcond(Eigen::MatrixXd::Identity(4, 4)) == doctest::Approx(1.0));
  Eigen::MatrixXd sing(2, 2);
  sing << 1, 2, 2, 4;
  CHECK(rcond(sing) == doctest::Approx(0.0));
  Eigen::MatrixXd d = Eigen::Vector3d(1.0, 0.5, 0.01).asDiagonal();
  CHECK(rcond(d) == doctest::Approx(0.01));
}

TEST_CASE("nonzero_rows drops structural zeros only") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 3);
  m.row(1) << 1, 0, 0;
  m.row(3) << 0, 1e-20, 0;  // round-off sized, dropped under the relative tol
  const std::vector<int> rows = nonzero_rows(m);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == 1);

  const Eigen::MatrixXd sel = select_rows(m, rows);
  CHECK(sel.rows() == 1);
  CHECK((sel.row(0) - m.row(1)).norm() == doctest::Approx(0.0));

  const Eigen::VectorXd v = (Eigen::VectorXd(4) << 9, 8, 7, 6).finished();
  const Eigen::VectorXd vsel = select_rows(v, {0, 3});
  CHECK(vsel.size() == 2);
  CHECK(vsel[0] == 9);
  CHECK(vsel[1] == 6);
}

TEST_CASE("central differences recover polynomial derivatives") {
  auto f = [](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(2);
    out << v[0] * v[0] * v[1], std::sin(v[1]);
    return out;
  };
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.7, -0.3).finished();
  Eigen::MatrixXd j_exact(2, 2);
  j_exact << 2 * x[0] * x[1], x[0] * x[0], 0.0, std::cos(x[1]);
  const Eigen::MatrixXd j = central_jacobian(f, x, 1e-6);
  CHECK((j - j_exact).lpNorm<Eigen::Infinity>() < 1e-9);

  auto s = [](const Eigen::VectorXd& v) { return v[0] * v[0] + 3.0 * v[1]; };
  const Eigen::VectorXd g = central_gradient(s, x, 1e-6);
  CHECK(g[0] == doctest::Approx(2 * x[0]).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(3.0).epsilon(1e-8));
}
