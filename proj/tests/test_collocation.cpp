#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "ccs/collocation.hpp"
#include "test_models.hpp"

using namespace ccs;

namespace {

// isolated affine field flattened to chi = (x_i, z_i, z_j), u = 0
struct LinearField {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  int n = 0;
};

LinearField linearize_isolated(const IsolatedModel& iso) {
  const int n = iso.n_x() + 2 * iso.n_z();
  auto eval = [&](const Eigen::VectorXd& chi) {
    const IsolatedRhs r =
        isolated_rhs(iso, chi.head(iso.n_x()), chi.segment(iso.n_x(), iso.n_z()),
                     chi.tail(iso.n_z()), Eigen::VectorXd::Zero(iso.n_u()));
    Eigen::VectorXd out(n);
    out << r.xdot_i, r.zdot_i, r.zdot_j;
    return out;
  };
  LinearField f;
  f.n = n;
  f.b = eval(Eigen::VectorXd::Zero(n));
  f.a.resize(n, n);
  for (int c = 0; c < n; ++c) f.a.col(c) = eval(Eigen::VectorXd::Unit(n, c)) - f.b;
  return f;
}

NodeVars exact_node(const IsolatedModel& iso, const LinearField& f, const Eigen::VectorXd& chi0,
                    double t) {
  const Eigen::VectorXd chi = test::affine_flow(f.a, f.b, chi0, t);
  const Eigen::VectorXd chidot = f.a * chi + f.b;
  NodeVars v;
  v.x = chi.head(iso.n_x());
  v.z_i = chi.segment(iso.n_x(), iso.n_z());
  v.z_j = chi.tail(iso.n_z());
  v.xdot = chidot.head(iso.n_x());
  v.zdot_i = chidot.segment(iso.n_x(), iso.n_z());
  v.zdot_j = chidot.tail(iso.n_z());
  v.u_i = Eigen::VectorXd::Zero(iso.n_u());
  v.uZ_j = Eigen::VectorXd::Zero(iso.n_u_j());
  return v;
}

}  // namespace

TEST_CASE("decision layout packs and unpacks nodes losslessly") {
  const CcsModel m = test::random_affine_ccs(201);
  const IsolatedModel iso = make_isolated(m, 0);
  const IsoDims d = dims_of(iso);
  CHECK(d.n_x == 2);
  CHECK(d.n_z == 3);
  CHECK(d.n_chi() == 8);

  const Grid grid{4, 2.0};
  const DecisionLayout lay(d, grid);
  CHECK(lay.node_size() == 2 * d.n_x + 4 * d.n_z + d.n_u + d.n_u_j);
  CHECK(lay.size() == lay.nodes() * lay.node_size());
  CHECK(lay.period_index() == -1);
  CHECK(lay.h(Eigen::VectorXd::Zero(lay.size())) == doctest::Approx(0.5));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd x(lay.size());
  for (int i = 0; i < x.size(); ++i) x[i] = dist(rng);

  for (int k = 0; k <= grid.intervals; ++k) {
    const NodeVars v = lay.node(x, k);
    CHECK(v.chi().size() == d.n_chi());
    CHECK((v.chi() - (Eigen::VectorXd(8) << v.x, v.z_i, v.z_j).finished()).norm() ==
          doctest::Approx(0.0));
    Eigen::VectorXd y = Eigen::VectorXd::Zero(lay.size());
    lay.set_node(y, k, v);
    CHECK((y.segment(lay.node_offset(k), lay.node_size()) -
           x.segment(lay.node_offset(k), lay.node_size()))
              .norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("free period rides last and layout validates its inputs") {
  const CcsModel m = test::random_affine_ccs(202);
  const IsoDims d = dims_of(make_isolated(m, 0));

  const DecisionLayout lay(d, Grid{3, 1.5}, true);
  CHECK(lay.period_index() == lay.size() - 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.size());
  x[lay.period_index()] = 2.4;
  CHECK(lay.period(x) == doctest::Approx(2.4));
  CHECK(lay.h(x) == doctest::Approx(0.8));

  CHECK_THROWS(DecisionLayout(d, Grid{1, 1.0}));
  CHECK_THROWS(DecisionLayout(d, Grid{10, -0.5}));
}

TEST_CASE("hermite interpolation is exact on cubics") {
  // chi(t) = (t^3 - t, 2 t^2 + 1) componentwise on [t0, t0 + h]
  auto chi_of = [](double t) {
    return (Eigen::VectorXd(2) << t * t * t - t, 2 * t * t + 1).finished();
  };
  auto chidot_of = [](double t) {
    return (Eigen::VectorXd(2) << 3 * t * t - 1, 4 * t).finished();
  };
  const double t0 = 0.3, h = 0.7, tc = t0 + h / 2;
  const auto [chi_c, chidot_c] =
      hermite_center(chi_of(t0), chidot_of(t0), chi_of(t0 + h), chidot_of(t0 + h), h);
  CHECK((chi_c - chi_of(tc)).lpNorm<Eigen::Infinity>() < 1e-13);
  CHECK((chidot_c - chidot_of(tc)).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("hermite defect vanishes exactly for quadratic solutions") {
  // chidot = (2 chi[1], 1) has solutions (c + t)^2, c + t: polynomial degree 2
  auto field = [](const Eigen::VectorXd& chi, const Eigen::VectorXd&) {
    return (Eigen::VectorXd(2) << 2 * chi[1], 1.0).finished();
  };
  auto sol = [](double t) { return (Eigen::VectorXd(2) << (0.4 + t) * (0.4 + t), 0.4 + t).finished(); };
  auto soldot = [&](double t) { return field(sol(t), Eigen::VectorXd()); };

  const double h = 0.31;
  const Eigen::VectorXd defect =
      hermite_defect(field, sol(0.0), soldot(0.0), sol(h), soldot(h), Eigen::VectorXd(), h);
  CHECK(defect.lpNorm<Eigen::Infinity>() < 1e-14);

  // a transcendental field leaves a real defect on the same data
  auto bent = [](const Eigen::VectorXd& chi, const Eigen::VectorXd&) {
    return (Eigen::VectorXd(2) << 2 * chi[1], std::cos(chi[0])).finished();
  };
  CHECK(hermite_defect(bent, sol(0.0), soldot(0.0), sol(h), soldot(h), Eigen::VectorXd(), h)
            .lpNorm<Eigen::Infinity>() > 1e-3);
}

TEST_CASE("collocation defect drops sixteenfold when the grid doubles") {
  // constant breve maps make the isolated field affine, so the exponential
  // flow below is the exact solution and the defect is pure h^4 truncation
  const CcsModel m = test::random_affine_ccs(203, false);
  const IsolatedModel iso = make_isolated(m, 0);
  const LinearField f = linearize_isolated(iso);

  std::mt19937_64 rng(11);
  Eigen::VectorXd chi0(f.n);
  chi0 << m.x_box[0].sample(rng), m.z_box[0].sample(rng), m.z_box[1].sample(rng);
  const double period = 1.2;

  auto worst_defect = [&](int intervals) {
    const double h = period / intervals;
    double worst = 0.0;
    for (int k = 0; k < intervals; ++k) {
      const NodeVars left = exact_node(iso, f, chi0, k * h);
      const NodeVars right = exact_node(iso, f, chi0, (k + 1) * h);
      worst = std::max(worst, c3_colloc(iso, left, right, h).lpNorm<Eigen::Infinity>());
    }
    return worst;
  };

  const double d10 = worst_defect(10);
  const double d20 = worst_defect(20);
  CHECK(d10 > 1e-12);  // not at the floor, the ratio below is meaningful
  CHECK(d10 / d20 > 10.0);
  CHECK(d10 / d20 < 25.0);
}

TEST_CASE("per-node residuals vanish exactly on consistent data") {
  const CcsModel m = test::random_affine_ccs(204);
  const IsolatedModel iso = make_isolated(m, 0);
  std::mt19937_64 rng(23);

  NodeVars v;
  v.x = m.x_box[0].sample(rng);
  v.z_i = m.z_box[0].sample(rng);
  v.z_j = m.z_box[1].sample(rng);
  v.u_i = m.u_box[0].sample(rng);
  const IsolatedRhs r = isolated_rhs(iso, v.x, v.z_i, v.z_j, v.u_i);
  v.xdot = r.xdot_i;
  v.zdot_i = r.zdot_i;
  v.zdot_j = r.zdot_j;
  v.uZ_j = r.u_jZ;

  CHECK(c1_zero(iso, v).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(c2_dyn(iso, v).lpNorm<Eigen::Infinity>() < 1e-11);

  // wrong induced input shows in c1, wrong derivative in c2
  NodeVars bad = v;
  bad.uZ_j[0] += 0.2;
  CHECK(c1_zero(iso, bad).lpNorm<Eigen::Infinity>() > 1e-3);
  bad = v;
  bad.zdot_i[1] += 0.1;
  CHECK(c2_dyn(iso, bad).lpNorm<Eigen::Infinity>() > 0.05);
}

TEST_CASE("periodicity block differences reset against the first node") {
  const CcsModel m = test::random_affine_ccs(205);
  const IsolatedModel iso = make_isolated(m, 0);
  std::mt19937_64 rng(29);

  NodeVars first, last;
  for (NodeVars* v : {&first, &last}) {
    v->x = m.x_box[0].sample(rng);
    v->z_i = m.z_box[0].sample(rng);
    v->z_j = m.z_box[1].sample(rng);
    v->xdot = Eigen::VectorXd::Zero(2);
    v->zdot_i = Eigen::VectorXd::Zero(3);
    v->zdot_j = Eigen::VectorXd::Zero(3);
    v->u_i = Eigen::VectorXd::Zero(2);
    v->uZ_j = Eigen::VectorXd::Zero(2);
  }

  const PhaseAnchor anchor{1, 0.25};
  const Eigen::VectorXd res = c6_periodic(first, last, identity_reset(), anchor);
  REQUIRE(res.size() == 9);
  CHECK((res.head(8) - (last.chi() - first.chi())).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(res[8] == doctest::Approx(first.z_i[1] - 0.25));

  // a reset map flips the comparison point
  const ResetMap negate = [](const Eigen::VectorXd& chi) { return Eigen::VectorXd(-chi); };
  const Eigen::VectorXd res2 = c6_periodic(first, last, negate, anchor);
  CHECK((res2.head(8) + (last.chi() + first.chi())).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("path constraint blocks are two-sided margins") {
  const CcsModel m = test::random_affine_ccs(206);
  const IsolatedModel iso = make_isolated(m, 0);
  std::mt19937_64 rng(31);

  NodeVars v;
  v.x = 0.5 * m.x_box[0].sample(rng);
  v.z_i = 0.5 * m.z_box[0].sample(rng);
  v.z_j = 0.5 * m.z_box[1].sample(rng);
  v.xdot = Eigen::VectorXd::Zero(2);
  v.zdot_i = Eigen::VectorXd::Zero(3);
  v.zdot_j = Eigen::VectorXd::Zero(3);
  v.u_i = 0.5 * m.u_box[0].sample(rng);
  v.uZ_j = Eigen::VectorXd::Zero(2);

  const PathConstraint amp = amplitude_limit(iso, 2.0);
  const Eigen::VectorXd rows = amp.eval(v);
  REQUIRE(rows.size() == 16);
  const Eigen::VectorXd chi = v.chi();
  for (int i = 0; i < 8; ++i) {
    CHECK(rows[i] == doctest::Approx(2.0 - chi[i]));
    CHECK(rows[8 + i] == doctest::Approx(chi[i] + 2.0));
  }
  CHECK(c5_path({amp}, v).size() == 16);

  const PathConstraint ceil = lambda_ceiling(iso, 1.5);
  const Eigen::VectorXd lam_rows = ceil.eval(v);
  REQUIRE(lam_rows.size() == 2 * m.n_lambda());
  const Eigen::VectorXd lam =
      iso.relation().lambda_at(v.x, {v.z_i, v.z_j}, v.u_i);
  for (int i = 0; i < m.n_lambda(); ++i)
    CHECK(lam_rows[i] == doctest::Approx(1.5 - lam[i]));

  CHECK(friction_cone_margin((Eigen::VectorXd(2) << 0.2, 1.0).finished(), 0.7, 1, 0) ==
        doctest::Approx(0.5));
  CHECK(clearance_margin(0.3, 0.1) == doctest::Approx(0.2));
}

TEST_CASE("assembled equality stack has the documented block sizes") {
  const CcsModel m = test::random_affine_ccs(207);
  const IsolatedModel iso = make_isolated(m, 0);
  const IsoDims d = dims_of(iso);
  const int K = 5;

  TranscriptionOptions opt;
  const TranscribedProblem tp = assemble(iso, Grid{K, 1.0}, opt);
  const Eigen::VectorXd guess = make_initial_guess(tp.layout);
  // (K+1) (n_x_j + n_chi) + K n_chi + (n_chi + 1)
  const int want = (K + 1) * (2 + d.n_chi()) + K * d.n_chi() + d.n_chi() + 1;
  CHECK(tp.nlp.equality(guess).size() == want);

  int named = 0;
  for (const auto& [name, rows] : tp.nlp.equality_blocks) named += rows;
  CHECK(named == want);

  TranscriptionOptions with_contraction = opt;
  with_contraction.contraction_eps = 2.0;
  const TranscribedProblem tp2 = assemble(iso, Grid{K, 1.0}, with_contraction);
  CHECK(tp2.nlp.equality(guess).size() == want + (K + 1) * d.n_x);

  // contraction rows are xdot + eps x at each node
  Eigen::VectorXd x = guess;
  NodeVars v = tp2.layout.node(x, 2);
  v.x = (Eigen::VectorXd(2) << 0.3, -0.1).finished();
  v.xdot = -2.0 * v.x;
  tp2.layout.set_node(x, 2, v);
  const Eigen::VectorXd eq = tp2.nlp.equality(x);
  // node block k: [c1 (n_x_j), c2 (n_chi), contraction (n_x)]
  const int node_rows = 2 + d.n_chi() + d.n_x;
  const Eigen::VectorXd contraction = eq.segment(2 * node_rows + 2 + d.n_chi(), d.n_x);
  CHECK(contraction.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("structured equality jacobian matches a dense finite difference") {
  const CcsModel m = test::random_affine_ccs(208);
  const IsolatedModel iso = make_isolated(m, 0);

  TranscriptionOptions opt;
  opt.path.push_back(amplitude_limit(iso, 3.0));
  opt.free_period = true;
  const TranscribedProblem tp = assemble(iso, Grid{4, 1.1}, opt);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> dist(-0.2, 0.2);
  Eigen::VectorXd x = make_initial_guess(tp.layout);
  for (int i = 0; i < x.size() - 1; ++i) x[i] += dist(rng);

  const Eigen::MatrixXd structured = tp.nlp.eq_jacobian(x);
  const Eigen::MatrixXd dense = central_jacobian(tp.nlp.equality, x, tp.nlp.fd_step);
  CHECK((structured - dense).lpNorm<Eigen::Infinity>() < 1e-7);

  const Eigen::MatrixXd ineq_structured = tp.nlp.ineq_jacobian(x);
  const Eigen::MatrixXd ineq_dense = central_jacobian(tp.nlp.inequality, x, tp.nlp.fd_step);
  CHECK((ineq_structured - ineq_dense).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("costs accumulate over every node of the grid") {
  const CcsModel m = test::random_affine_ccs(209);
  const IsolatedModel iso = make_isolated(m, 0);
  const int K = 4;

  TranscriptionOptions opt;
  const TranscribedProblem tp = assemble(iso, Grid{K, 2.0}, opt);
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd x(tp.layout.size());
  for (int i = 0; i < x.size(); ++i) x[i] = dist(rng);

  double want = 0.0;
  for (int k = 0; k <= K; ++k) want += tp.layout.node(x, k).u_i.squaredNorm();
  want *= 0.5;  // h = 2.0 / 4
  CHECK(tp.nlp.cost(x) == doctest::Approx(want));

  TranscriptionOptions accel = opt;
  accel.cost = "base_accel";
  const TranscribedProblem tp2 = assemble(iso, Grid{K, 2.0}, accel);
  double want2 = 0.0;
  for (int k = 0; k <= K; ++k)
    want2 += tp2.layout.node(x, k).zdot_i.tail(1).squaredNorm();
  want2 *= 0.5;
  CHECK(tp2.nlp.cost(x) == doctest::Approx(want2));

  TranscriptionOptions junk = opt;
  junk.cost = "fuel";
  CHECK_THROWS(assemble(iso, Grid{K, 2.0}, junk));
}

TEST_CASE("initial guess is admissible and sits on the coupling manifold") {
  const CcsModel m = test::random_affine_ccs(210);
  const IsolatedModel iso = make_isolated(m, 0);
  const TranscribedProblem tp = assemble(iso, Grid{8, 1.0}, {});
  const Eigen::VectorXd guess = make_initial_guess(tp.layout);
  REQUIRE(guess.size() == tp.nlp.n());
  CHECK(((guess - tp.nlp.lb).array() >= -1e-12).all());
  CHECK(((tp.nlp.ub - guess).array() >= -1e-12).all());
  for (int k = 0; k <= 8; ++k) {
    const NodeVars v = tp.layout.node(guess, k);
    CHECK((v.z_i - v.z_j).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(v.u_i.lpNorm<Eigen::Infinity>() == 0.0);
  }
  // periodic seed: first and last nodes coincide
  CHECK((tp.layout.node(guess, 0).chi() - tp.layout.node(guess, 8).chi())
            .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("solution_to_trajectory samples nodes and recovers lambda") {
  const CcsModel m = test::random_affine_ccs(211);
  const IsolatedModel iso = make_isolated(m, 0);
  const Grid grid{6, 1.8};
  const DecisionLayout lay(dims_of(iso), grid);
  const Eigen::VectorXd guess = make_initial_guess(lay);

  const Trajectory traj = solution_to_trajectory(iso, lay, guess);
  REQUIRE(traj.samples() == 7);
  CHECK(traj.times[6] == doctest::Approx(1.8));
  CHECK(traj.integrator == "collocation");
  REQUIRE(traj.state_labels.size() == static_cast<size_t>(traj.states.cols()));
  REQUIRE(traj.lambdas.cols() == m.n_lambda());

  for (int k = 0; k <= 6; ++k) {
    const NodeVars v = lay.node(guess, k);
    const Eigen::VectorXd lam = iso.relation().lambda_at(v.x, {v.z_i, v.z_j}, v.u_i);
    CHECK((traj.lambdas.row(k).transpose() - lam).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(traj.states(k, 0) == doctest::Approx(v.x[0]));
  }
}

TEST_CASE("postcheck flags honest residuals of an unconverged vector") {
  const CcsModel m = test::random_affine_ccs(212);
  const IsolatedModel iso = make_isolated(m, 0);
  const TranscribedProblem tp = assemble(iso, Grid{5, 1.0}, {});
  const Eigen::VectorXd guess = make_initial_guess(tp.layout);

  const PostcheckReport rep = postcheck(iso, tp.layout, guess, {});
  CHECK(rep.equality_inf ==
        doctest::Approx(tp.nlp.equality(guess).lpNorm<Eigen::Infinity>()));
  // identity reset on a closed seed: the periodicity rows are already tight
  CHECK(rep.periodicity_inf < 1e-12);
  CHECK(rep.resim_return_inf_zoh > 0.0);
  CHECK(std::isfinite(rep.resim_return_inf_linear));
}
