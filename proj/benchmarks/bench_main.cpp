#include <random>

#include <benchmark/benchmark.h>

#include "orthosurv/approximator.hpp"
#include "orthosurv/nuisance.hpp"
#include "orthosurv/orthogonal.hpp"
#include "orthosurv/synthetic.hpp"

using namespace orthosurv;

namespace {

Eigen::MatrixXd random_inputs(Eigen::Index n, Eigen::Index p) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    return x;
}

void BM_Predict(benchmark::State& state) {
    ApproxConfig c;
    c.input_dim = 8;
    c.hidden_layers = {64, 64, 64};
    const Approximator m(c);
    const Eigen::MatrixXd x = random_inputs(state.range(0), 8);
    for (auto _ : state) benchmark::DoNotOptimize(m.predict(x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(64)->Arg(1024);

void BM_LossAndGradient(benchmark::State& state) {
    ApproxConfig c;
    c.input_dim = 8;
    c.hidden_layers = {64, 64, 64};
    const Approximator m(c);
    const Eigen::MatrixXd x = random_inputs(state.range(0), 8);
    const Eigen::VectorXd y = x.col(0);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(x.rows());
    Eigen::VectorXd g;
    for (auto _ : state) benchmark::DoNotOptimize(m.loss(x, y, w, LossKind::weighted_squared, &g));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGradient)->Arg(64)->Arg(1024);

void BM_PseudoRows(benchmark::State& state) {
    const auto sim = generate(ScenarioSpec::make(1, Setting::full, static_cast<std::size_t>(state.range(0)), 3));
    const auto evaluated = sim.truth.evaluate(sim.data.covariates(), 0.01);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_pseudo_rows(sim.data, evaluated, WeightScheme::tcs, 5));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PseudoRows)->Arg(1000)->Arg(30000);

void BM_NuisanceEvaluation(benchmark::State& state) {
    const GroundTruth truth(2, violations_for(Setting::low_censoring));
    const Eigen::MatrixXd x = random_inputs(state.range(0), 10);
    for (auto _ : state) benchmark::DoNotOptimize(truth.evaluate(x, 0.01));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NuisanceEvaluation)->Arg(1000);

void BM_Generate(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate(ScenarioSpec::make(1, Setting::full, 10000, 7)));
    }
}
BENCHMARK(BM_Generate);

}  // namespace

BENCHMARK_MAIN();
