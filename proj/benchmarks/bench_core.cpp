#include <benchmark/benchmark.h>

#include "fpmd/critic.hpp"
#include "fpmd/flow_policy.hpp"
#include "fpmd/meanflow_policy.hpp"
#include "fpmd/net.hpp"
#include "fpmd/wasserstein.hpp"

namespace {

using namespace fpmd;

void BM_Forward(benchmark::State& state) {
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const MlpParams p = make_mlp(12, {256, 256}, 2, Activation::Tanh, 1);
  Batch x = Batch::Random(batch, 12);
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(256);

void BM_GradBackward(benchmark::State& state) {
  const MlpParams p = make_mlp(12, {256, 256}, 2, Activation::Tanh, 1);
  Batch x = Batch::Random(256, 12);
  Batch up = Batch::Random(256, 2);
  for (auto _ : state) benchmark::DoNotOptimize(grad(p, x, up));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_GradBackward);

void BM_Jvp(benchmark::State& state) {
  const MlpParams p = make_mlp(20, {256, 256}, 2, Activation::Tanh, 1);
  Batch x = Batch::Random(256, 20);
  Batch t = Batch::Random(256, 20);
  for (auto _ : state) benchmark::DoNotOptimize(jvp(p, x, t));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Jvp);

// the inference-cost story: 20-step integration vs one average-velocity step
void BM_EulerSample20(benchmark::State& state) {
  const FlowPolicy p = make_flow_policy(2, 2, {256, 256}, 3);
  Rng rng(1);
  const Batch s = Batch::Random(1, 2);
  const Batch a0 = sample_prior(p, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(euler_sample_batch(p, s, a0, 20));
}
BENCHMARK(BM_EulerSample20);

void BM_OneStepSample(benchmark::State& state) {
  const MeanFlowPolicy p = make_meanflow_policy(2, 2, {256, 256}, 3);
  Rng rng(1);
  const Batch s = Batch::Random(1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(one_step_sample_batch(p, s, rng));
}
BENCHMARK(BM_OneStepSample);

void BM_AssignmentW2(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(5);
  Eigen::MatrixXd a(n, 2), b(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) {
      a(i, j) = rng.normal();
      b(i, j) = rng.normal();
    }
  for (auto _ : state)
    benchmark::DoNotOptimize(empirical_w2({a, "a"}, {b, "b"}));
}
BENCHMARK(BM_AssignmentW2)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
