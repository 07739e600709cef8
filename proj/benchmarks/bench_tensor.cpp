#include <benchmark/benchmark.h>

#include "cloudlstm/random.hpp"
#include "cloudlstm/tensor.hpp"

namespace {

cloudlstm::Tensor random_tensor(cloudlstm::Shape shape, std::uint64_t seed) {
  cloudlstm::Rng rng(seed);
  cloudlstm::Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Hidden-to-gate convolution at desk scale: 24x24 tile, r = range(0), four gates fused.
void BM_Conv2dSame(benchmark::State& state) {
  const auto r = static_cast<std::size_t>(state.range(0));
  const auto input = random_tensor({24, 24, r}, 1);
  const auto kernel = random_tensor({3, 3, r, 4 * r}, 2);
  for (auto _ : state) {
    auto out = cloudlstm::conv2d_same(input, kernel);
    benchmark::DoNotOptimize(out.data().data());
  }
  const double macs = 24.0 * 24.0 * 9.0 * static_cast<double>(r * 4 * r);
  state.counters["MAC/s"] = benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dSame)->Arg(8)->Arg(16)->Arg(32);

void BM_Conv2dGradInput(benchmark::State& state) {
  const auto r = static_cast<std::size_t>(state.range(0));
  const auto grad = random_tensor({24, 24, 4 * r}, 3);
  const auto kernel = random_tensor({3, 3, r, 4 * r}, 4);
  for (auto _ : state) {
    auto out = cloudlstm::conv2d_same_grad_input(grad, kernel);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_Conv2dGradInput)->Arg(32);

}  // namespace
