#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "ccs/collocation.hpp"
#include "ccs/mechanical.hpp"
#include "ccs/reduction.hpp"
#include "ccs/simulate.hpp"

// Hot paths: the per-stage coupling solve, the reduced field, a full
// integration sweep, and the transcription residual/jacobian the optimizer
// hammers on. Run with --benchmark_min_time=... for tighter numbers.

namespace {

using namespace ccs;

const SplitCartExample& cart() {
  static const SplitCartExample ex = example_split_cart();
  return ex;
}

const IsolatedModel& cart_iso() {
  static const IsolatedModel iso = make_isolated(cart().ccs, 0);
  return iso;
}

void bm_coupling_solve(benchmark::State& state) {
  const CcsModel& m = cart().ccs;
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.2, -0.1).finished();
  const std::array<Eigen::VectorXd, 2> z = {(Eigen::VectorXd(2) << 0.05, 0.3).finished(),
                                            (Eigen::VectorXd(2) << 0.05, 0.3).finished()};
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(coupling_solve(m, 0, x, z, u));
  }
}
BENCHMARK(bm_coupling_solve);

void bm_isolated_rhs(benchmark::State& state) {
  const IsolatedModel& iso = cart_iso();
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.2, -0.1).finished();
  const Eigen::VectorXd z = (Eigen::VectorXd(2) << 0.05, 0.3).finished();
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(isolated_rhs(iso, x, z, z, u));
  }
}
BENCHMARK(bm_isolated_rhs);

void bm_simulate_isolated(benchmark::State& state) {
  const IsolatedModel& iso = cart_iso();
  const IsolatedController ctrl = io_linearizing_controller(iso, 1.0);
  const Eigen::VectorXd x0 = (Eigen::VectorXd(2) << 0.1, -0.1).finished();
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(2);
  IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = state.range(0) * 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_isolated(iso, ctrl, x0, z0, z0, cfg));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(cfg.horizon / cfg.step));
}
BENCHMARK(bm_simulate_isolated)->Arg(1)->Arg(10);

void bm_transcription_residual(benchmark::State& state) {
  const TranscribedProblem tp =
      assemble(cart_iso(), Grid{static_cast<int>(state.range(0)), 1.0}, {});
  const Eigen::VectorXd x = make_initial_guess(tp.layout);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tp.nlp.equality(x));
  }
}
BENCHMARK(bm_transcription_residual)->Arg(10)->Arg(40);

void bm_transcription_jacobian(benchmark::State& state) {
  const TranscribedProblem tp =
      assemble(cart_iso(), Grid{static_cast<int>(state.range(0)), 1.0}, {});
  const Eigen::VectorXd x = make_initial_guess(tp.layout);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tp.nlp.eq_jacobian(x));
  }
}
BENCHMARK(bm_transcription_jacobian)->Arg(10)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
