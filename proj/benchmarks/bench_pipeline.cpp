#include <benchmark/benchmark.h>

#include "covsteer/config.hpp"
#include "covsteer/ipm.hpp"
#include "covsteer/kalman.hpp"
#include "covsteer/lift.hpp"
#include "covsteer/policy.hpp"
#include "covsteer/simulate.hpp"
#include "covsteer/transcribe.hpp"

#ifndef COVSTEER_EXAMPLES_DIR
#define COVSTEER_EXAMPLES_DIR "examples"
#endif

using namespace covsteer;

namespace {

const SteeringProblem& example() {
    static const SteeringProblem p =
        symmetrized(load_config(std::string(COVSTEER_EXAMPLES_DIR) + "/double_integrator.json"));
    return p;
}

// The example truncated to `horizon` steps with the target moved to the drift endpoint.
SteeringProblem truncated(int horizon) {
    SteeringProblem p = example();
    p.horizon = horizon;
    p.A.resize(static_cast<std::size_t>(horizon));
    p.B.resize(static_cast<std::size_t>(horizon));
    p.G.resize(static_cast<std::size_t>(horizon));
    p.Q.resize(static_cast<std::size_t>(horizon));
    p.R.resize(static_cast<std::size_t>(horizon));
    p.C.resize(static_cast<std::size_t>(horizon + 1));
    p.D.resize(static_cast<std::size_t>(horizon + 1));
    p.constraints.clear();
    Vector drift = p.prior_mean;
    for (const auto& A : p.A) {
        drift = A * drift;
    }
    p.target_mean = drift;
    p.target_cov_bound *= 10.0;
    return p;
}

void BM_Schedule(benchmark::State& state) {
    const SteeringProblem& p = example();
    for (auto _ : state) {
        benchmark::DoNotOptimize(kalman::run_schedule(p));
    }
}
BENCHMARK(BM_Schedule);

void BM_Lift(benchmark::State& state) {
    const SteeringProblem& p = example();
    const FilterSchedule sch = kalman::run_schedule(p);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lift::build(p, sch));
    }
}
BENCHMARK(BM_Lift)->Unit(benchmark::kMillisecond);

void BM_Transcribe(benchmark::State& state) {
    const SteeringProblem& p = example();
    const FilterSchedule sch = kalman::run_schedule(p);
    const LiftedOperators ops = lift::build(p, sch);
    for (auto _ : state) {
        benchmark::DoNotOptimize(transcribe_problem(p, sch, ops));
    }
}
BENCHMARK(BM_Transcribe)->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& state) {
    const SteeringProblem p = truncated(static_cast<int>(state.range(0)));
    const FilterSchedule sch = kalman::run_schedule(p);
    const LiftedOperators ops = lift::build(p, sch);
    const Transcription tr = transcribe_problem(p, sch, ops);
    const InteriorPointSolver solver;
    for (auto _ : state) {
        const SolveOutcome out = solve(tr, ops, solver);
        if (out.status != SolveStatus::Optimal) {
            state.SkipWithError("solve failed");
            break;
        }
        benchmark::DoNotOptimize(out.objective);
    }
    state.counters["variables"] = static_cast<double>(tr.program.num_variables());
}
BENCHMARK(BM_Solve)->Arg(4)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
    const SteeringProblem& p = example();
    const FilterSchedule sch = kalman::run_schedule(p);
    const LiftedOperators ops = lift::build(p, sch);
    // Open-loop policy: the cost of a run does not depend on the gains' values.
    const Matrix F = Matrix::Zero(ops.input_dim(), ops.state_dim());
    const Policy pol = policy::propagate_distribution(F, Vector::Zero(ops.input_dim()), ops, sch, p.prior_mean);
    SimulationOptions opt;
    opt.runs = static_cast<std::size_t>(state.range(0));
    opt.threads = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_closed_loop(p, sch, pol, opt));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
