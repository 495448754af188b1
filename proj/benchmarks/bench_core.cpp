#include <benchmark/benchmark.h>

#include "leadlag/phase1.hpp"
#include "leadlag/phase2.hpp"
#include "leadlag/proxops.hpp"
#include "leadlag/rng.hpp"
#include "leadlag/shaker.hpp"
#include "leadlag/synth.hpp"

using namespace leadlag;

namespace {

Eigen::MatrixXd bench_matrix(Eigen::Index n) {
    SplitMix64 rng(42);
    return gaussian_matrix(rng, n, n);
}

void BM_svt(benchmark::State& state) {
    const Eigen::MatrixXd m = bench_matrix(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(svt(m, 0.5));
    }
}
BENCHMARK(BM_svt)->Arg(32)->Arg(128)->Arg(256);

void BM_group_soft_threshold(benchmark::State& state) {
    const Eigen::MatrixXd m = bench_matrix(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(group_soft_threshold(m, 0.5));
    }
}
BENCHMARK(BM_group_soft_threshold)->Arg(128)->Arg(512);

void BM_phase1_fit_view(benchmark::State& state) {
    const Eigen::Index n = state.range(0);
    SplitMix64 rng(7);
    LagPair pair;
    pair.view = "v0";
    pair.x = gaussian_matrix(rng, 4 * n, n);
    pair.y = pair.x * (gaussian_matrix(rng, n, 3) * gaussian_matrix(rng, n, 3).transpose()) +
             0.1 * gaussian_matrix(rng, 4 * n, n);
    Phase1Config cfg;
    cfg.max_iter = 30;
    for (auto _ : state) {
        benchmark::DoNotOptimize(phase1_fit_view(pair, cfg));
    }
}
BENCHMARK(BM_phase1_fit_view)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_phase2_fit(benchmark::State& state) {
    const Eigen::Index n = state.range(0);
    Phase1Result p1;
    SplitMix64 rng(11);
    const Eigen::MatrixXd base = gaussian_matrix(rng, n, n);
    for (int v = 0; v < 2; ++v) {
        Phase1ViewResult view;
        view.view = "v" + std::to_string(v);
        view.w_hat = base + 0.3 * gaussian_matrix(rng, n, n);
        view.w = view.w_hat;
        view.theta = Eigen::MatrixXd::Zero(n, n);
        view.lambda1 = view.theta;
        p1.views.push_back(std::move(view));
    }
    Phase2Config cfg;
    cfg.k = 3;
    cfg.max_iter = 20;
    for (auto _ : state) {
        benchmark::DoNotOptimize(phase2_fit(p1, cfg));
    }
}
BENCHMARK(BM_phase2_fit)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_accumulate_influence(benchmark::State& state) {
    const Eigen::MatrixXd w = 0.5 / std::sqrt(static_cast<double>(state.range(0))) *
                              bench_matrix(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(accumulate_influence(w, 3));
    }
}
BENCHMARK(BM_accumulate_influence)->Arg(128)->Arg(512);

void BM_generate(benchmark::State& state) {
    GeneratorParams params;
    params.entities = state.range(0);
    params.views = 1;
    params.length = 30;
    params.k_star = 5;
    params.sigma = 0.1;
    params.seed = 3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate(params));
    }
}
BENCHMARK(BM_generate)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
