#include <benchmark/benchmark.h>

#include <random>

#include "scene/generator.hpp"
#include "scene/mlp.hpp"
#include "scene/oracle.hpp"
#include "scene/scene_loss.hpp"
#include "scene/simulation.hpp"
#include "scene/survival.hpp"
#include "scene/trainer.hpp"

using namespace scene;

namespace {

Dataset ph_dataset(std::size_t n, int p, std::uint64_t seed = 1) {
  sim::SimulationSpec spec = sim::SimulationSpec::defaults(sim::Model::ph);
  spec.n = n;
  spec.p = p;
  spec.tau = 19.0;
  spec.seed = seed;
  return sim::simulate(spec);
}

void BM_KaplanMeier(benchmark::State& state) {
  const Dataset d = ph_dataset(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(km_estimate(d));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KaplanMeier)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_SelfConsistentOracle(benchmark::State& state) {
  const Dataset d = ph_dataset(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(solve_self_consistent(d));
}
BENCHMARK(BM_SelfConsistentOracle)->Arg(500)->Arg(4000);

void BM_MlpForwardBackward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const nn::Mlp net = nn::Mlp::glorot({10, width, width, width, 1}, nn::HiddenActivation::relu,
                                      nn::OutputActivation::exp, 3);
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = draw_aux(10, 2000, rng);
  const Eigen::RowVectorXd up = Eigen::RowVectorXd::Ones(2000);
  for (auto _ : state) {
    const nn::ForwardCache cache = nn::forward_batch(net, x);
    benchmark::DoNotOptimize(nn::backward_batch(net, cache, up));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(100)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TrainingIteration(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const Dataset d = ph_dataset(2000, 5);
  TrainConfig cfg = TrainConfig::low_dim_defaults();
  cfg.gen_arch.hidden = {width, width, width};
  cfg.phi_arch.hidden = {width, width};
  TrainedModel model = initial_model(5, cfg);
  OptimizerPair opt{nn::OptimizerState(model.generator.net, cfg.gen_optimizer),
                    nn::OptimizerState(model.phi, cfg.phi_optimizer)};
  IterationSampler sampler(cfg);
  long iter = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_iteration(model, opt, d, sampler.next(d), cfg, ++iter));
}
BENCHMARK(BM_TrainingIteration)->Arg(100)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SampleTimes(benchmark::State& state) {
  const GeneratorModel g = GeneratorModel::create(5, 5, {256, 256, 256}, nn::HiddenActivation::relu, 2);
  const std::vector<double> x(5, 0.5);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_times(g, x, static_cast<int>(state.range(0)), ++seed));
}
BENCHMARK(BM_SampleTimes)->Arg(400)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
