#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "nemf/graphon.hpp"
#include "nemf/meanfield.hpp"
#include "nemf/metrics.hpp"
#include "nemf/netsim.hpp"

using namespace nemf;

namespace {

void BM_SimulateNetwork(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto model = make_model(acceptance_model_spec());
    const auto w = std::make_shared<const WeightMatrix>(gen_uniform_attachment(n, 1));
    const auto x0 = sample_initial_state(InitialLaw::uniform(-1.0, 1.0), n, 2);
    SimulationOptions opt;
    opt.sample_times = {1.0};
    opt.record_spikes = false;
    std::uint64_t seed = 3;
    for (auto _ : state) {
        auto log = simulate_network(model, w, x0, 1.0, StreamSeeds{seed++}, opt);
        benchmark::DoNotOptimize(log);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SimulateNetwork)->Arg(100)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_H11Distance(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = sample_initial_state(InitialLaw::uniform(-1.0, 1.0), n, 4);
    const auto b = sample_initial_state(InitialLaw::uniform(-1.0, 1.0), n, 5);
    const auto p = Partition::identity(n);
    const auto mu1 = extended_empirical_measure(a, p);
    const auto mu2 = extended_empirical_measure(b, p);
    for (auto _ : state) {
        benchmark::DoNotOptimize(h11_distance(mu1, mu2));
    }
}
BENCHMARK(BM_H11Distance)->Arg(100)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_MeanFieldSolve(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto model = make_model(acceptance_model_spec());
    const auto kernel = StepGraphon::from_analytic({AnalyticKernel::Kind::uniform_attachment_limit, 1.0}, m);
    const auto law = InitialLaw::uniform(-1.0, 1.0).particles(64);
    const auto mu0 = SpatialMeasure::uniform_in_xi(law, 1);
    MeanFieldOptions o;
    o.T = 0.1;
    o.dt = 1e-3;
    o.m_cells = m;
    for (auto _ : state) {
        auto sol = solve_meanfield(model, kernel, mu0, o);
        benchmark::DoNotOptimize(sol);
    }
    state.SetLabel("100 steps");
}
BENCHMARK(BM_MeanFieldSolve)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_OpNormExhaustive(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(m * m);
    for (auto& x : v) {
        x = u(eng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(op_norm_exhaustive(v, m));
    }
}
BENCHMARK(BM_OpNormExhaustive)->Arg(8)->Arg(12)->Arg(16);

void BM_OpNormLocalSearch(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(m * m);
    for (auto& x : v) {
        x = u(eng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(op_norm_local_search(v, m, 10, 1));
    }
}
BENCHMARK(BM_OpNormLocalSearch)->Arg(16)->Arg(64)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
