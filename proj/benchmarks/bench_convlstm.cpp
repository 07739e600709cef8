#include <benchmark/benchmark.h>

#include "cloudlstm/convlstm.hpp"
#include "cloudlstm/random.hpp"
#include "cloudlstm/train.hpp"

namespace {

cloudlstm::TrainingSample desk_tile(std::size_t frames) {
  cloudlstm::Rng rng(11);
  cloudlstm::Tensor values({frames, 24, 24, 4});
  for (double& v : values.data()) v = rng.uniform(0.0, 1.0);
  std::vector<std::size_t> labels(24 * 24);
  for (auto& l : labels) l = rng.index(6);
  return {{std::move(values), cloudlstm::ImageSequence::even_timestamps(frames)},
          cloudlstm::LabelMap::from_indices(24, 24, labels)};
}

cloudlstm::CellConfig desk_config(std::size_t hidden) {
  cloudlstm::CellConfig cfg;
  cfg.hidden_channels = hidden;
  return cfg;
}

void BM_EncodeBidirectional(benchmark::State& state) {
  const auto sample = desk_tile(30);
  const auto params = cloudlstm::init_params(desk_config(static_cast<std::size_t>(state.range(0))), 6, 5);
  for (auto _ : state) {
    auto out = cloudlstm::encode_bidirectional(sample.seq, params);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_EncodeBidirectional)->Arg(32)->Unit(benchmark::kMillisecond);

// One training tile: forward with recording plus full backpropagation through time.
void BM_BackwardTile(benchmark::State& state) {
  const auto sample = desk_tile(30);
  const auto params = cloudlstm::init_params(desk_config(static_cast<std::size_t>(state.range(0))), 6, 5);
  for (auto _ : state) {
    auto result = cloudlstm::backward(sample.seq, sample.labels, params);
    benchmark::DoNotOptimize(result.loss);
  }
}
BENCHMARK(BM_BackwardTile)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
