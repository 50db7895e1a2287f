#include <benchmark/benchmark.h>

#include <numeric>

#include "dytok/allocator.hpp"
#include "dytok/atnd.hpp"
#include "dytok/attention.hpp"
#include "dytok/compression.hpp"
#include "dytok/pipeline.hpp"
#include "dytok/synth.hpp"

namespace {

using namespace dytok;

AttentionDump bench_dump(std::uint32_t frames) {
  SynthSpec spec;
  spec.num_frames = frames;
  spec.keyframes = {0, frames / 2};
  spec.seed = 1;
  return generate_dump(spec);
}

void BM_FrameImportance(benchmark::State& state) {
  const auto dump = bench_dump(static_cast<std::uint32_t>(state.range(0)));
  const auto layers = select_deep_layers(dump.num_layers(), 1.0 / 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_frame_importance(dump, layers));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(dump.logits().size()));
}
BENCHMARK(BM_FrameImportance)->Arg(32)->Arg(128);

void BM_Allocate(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  std::vector<double> w(frames);
  for (std::size_t f = 0; f < frames; ++f) w[f] = 1.0 + static_cast<double>(f % 7);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= sum;
  const BudgetRequest req{w, frames * 49, 98, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(allocate(req));
}
BENCHMARK(BM_Allocate)->Arg(32)->Arg(1024);

void BM_CompressVideo(benchmark::State& state) {
  const auto dump = bench_dump(32);
  PipelineConfig config;
  config.retention_ratio = 0.25;
  const auto frames = frames_from_dump(dump, config);
  const auto imp = estimate_importance(dump, config);
  const auto plan = allocate(make_budget_request(imp, dump.tokens_per_frame(), config));
  const auto strategy = static_cast<Strategy>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(compress_video(frames, plan, strategy));
}
BENCHMARK(BM_CompressVideo)
    ->Arg(static_cast<int>(Strategy::kTopK))
    ->Arg(static_cast<int>(Strategy::kDominantContextual))
    ->Arg(static_cast<int>(Strategy::kUniform));

void BM_AtndDecode(benchmark::State& state) {
  const auto bytes = atnd::encode(bench_dump(32));
  for (auto _ : state) benchmark::DoNotOptimize(atnd::decode(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_AtndDecode);

}  // namespace

BENCHMARK_MAIN();
