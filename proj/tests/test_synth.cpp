#include <gtest/gtest.h>

#include <numeric>

#include "dytok/atnd.hpp"
#include "dytok/error.hpp"
#include "dytok/pipeline.hpp"
#include "dytok/rng.hpp"
#include "dytok/synth.hpp"

namespace dytok {
namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.num_frames = 16;
  s.tokens_per_frame = 20;
  s.num_layers = 12;
  s.num_heads = 2;
  s.noise_sigma = 1.0;
  s.seed = 42;
  return s;
}

PipelineConfig ratio_config(double ratio) {
  PipelineConfig c;
  c.retention_ratio = ratio;
  return c;
}

TEST(GaussianSource, FixedSequence) {
  // Frozen from an independent Python transcription of mt19937_64 and the
  // same Box-Muller transform.
  GaussianSource g(5);
  EXPECT_DOUBLE_EQ(g.standard_normal(), 0.8639450355930127);
  EXPECT_DOUBLE_EQ(g.standard_normal(), 0.21313376994404487);
  EXPECT_DOUBLE_EQ(g.standard_normal(), -0.7747838515274029);
  EXPECT_DOUBLE_EQ(g.standard_normal(), -1.5428727846644488);
  std::mt19937_64 ref(5489u);
  for (int i = 1; i < 10000; ++i) ref();
  EXPECT_EQ(ref(), 9981545732273789042ull);
}

TEST(GaussianSource, MomentsLookNormal) {
  GaussianSource g(1);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = g.standard_normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(GenerateDump, NoiseFreeIsUniform) {
  auto spec = small_spec();
  spec.noise_sigma = 0.0;
  const auto dump = generate_dump(spec);
  const auto imp = compute_frame_importance(dump, LayerSet::all(dump.num_layers()));
  for (double w : imp.weights) EXPECT_NEAR(w, 1.0 / 16, 1e-15);
}

TEST(GenerateDump, SingleKeyframeIsArgmax) {
  for (std::size_t key = 0; key < 16; key += 3) {
    auto spec = small_spec();
    spec.keyframes = {key};
    spec.keyframe_boost = 6.0;
    spec.seed = 100 + key;
    const auto dump = generate_dump(spec);
    const auto w = compute_frame_importance(dump, select_deep_layers(12, 1.0 / 3)).weights;
    const auto argmax =
        static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    EXPECT_EQ(argmax, key);
  }
}

TEST(GenerateDump, SameSeedSameBytes) {
  auto spec = small_spec();
  spec.keyframes = {3};
  EXPECT_EQ(atnd::encode(generate_dump(spec)), atnd::encode(generate_dump(spec)));
  auto other = spec;
  other.seed = 43;
  EXPECT_NE(atnd::encode(generate_dump(spec)), atnd::encode(generate_dump(other)));
}

TEST(GenerateDump, BoostsLandInTheirLayers) {
  auto spec = small_spec();
  spec.noise_sigma = 0.0;
  spec.keyframes = {2};
  spec.keyframe_boost = 3.0;
  spec.outliers = OutlierSpec{{9}, 2.0, 4, 5};
  const auto dump = generate_dump(spec);
  const auto at = [&](std::uint32_t layer, std::size_t frame) {
    return dump.row(layer, 0, 0)[frame * spec.tokens_per_frame];
  };
  EXPECT_EQ(at(0, 2), 0.0);
  EXPECT_EQ(at(8, 2), 3.0);  // deep layers start at 12 - 4 = 8
  EXPECT_EQ(at(7, 2), 0.0);
  EXPECT_EQ(at(4, 9), 2.0);
  EXPECT_EQ(at(6, 9), 0.0);
}

TEST(GenerateDump, InvalidSpecs) {
  auto spec = small_spec();
  spec.keyframes = {16};
  EXPECT_THROW(generate_dump(spec), Error);
  spec = small_spec();
  spec.keyframe_boost = 0.0;
  EXPECT_THROW(generate_dump(spec), Error);
  spec = small_spec();
  spec.keyframes = {4};
  spec.outliers = OutlierSpec{{4}, 1.0, 0, 1};
  EXPECT_THROW(generate_dump(spec), Error);
  spec.allow_overlap = true;
  EXPECT_NO_THROW(generate_dump(spec));
  spec.outliers->layer_hi = 12;
  EXPECT_THROW(generate_dump(spec), Error);
}

TEST(PipelineConfig, ExactlyOneBudgetSource) {
  PipelineConfig c;
  EXPECT_THROW(c.validate(), Error);
  c.total_budget = 10;
  c.retention_ratio = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c.total_budget.reset();
  EXPECT_NO_THROW(c.validate());
  c.retention_ratio = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(RunPipeline, PlantedKeyframesRecalled) {
  SynthSpec spec;
  spec.keyframes = {5, 23};
  spec.keyframe_boost = 6.0;
  spec.seed = 9;
  const auto dump = generate_dump(spec);
  auto config = ratio_config(0.25);
  config.recall_ks = {1, 2, 4};
  const auto report = run_pipeline(dump, config, {spec.keyframes, {}});
  EXPECT_DOUBLE_EQ(report.recall_at_k.at(2), 1.0);
  EXPECT_DOUBLE_EQ(report.recall_at_k.at(1), 1.0);
  EXPECT_DOUBLE_EQ(report.recall_at_k.at(4), 1.0);
  EXPECT_EQ(report.plan.total(), 1568u);
  EXPECT_EQ(report.plan.allocations[5], 98u);
  EXPECT_EQ(report.plan.allocations[23], 98u);
  EXPECT_EQ(report.kept_tokens, 1568u);
}

TEST(RunPipeline, UniformDumpConcentration) {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  const auto dump = generate_dump(spec);
  const std::set<std::size_t> truth{5, 23};
  const auto report = run_pipeline(dump, ratio_config(0.25), {truth, {}});
  EXPECT_DOUBLE_EQ(report.allocation_concentration, 2.0 / 32.0);
}

TEST(RunPipeline, SmoothingSuppressesOutlier) {
  SynthSpec spec;
  spec.outliers = OutlierSpec{{16}, 8.0, 12, 20};
  spec.seed = 3;
  const auto dump = generate_dump(spec);
  auto config = ratio_config(0.25);
  config.smoothing.enabled = true;
  const auto report = run_pipeline(dump, config, {{}, {16}});
  EXPECT_TRUE(report.detected_outliers.contains(16));
  EXPECT_GT(report.outlier_suppression, 0.0);
}

TEST(RunPipeline, DeterministicReports) {
  SynthSpec spec;
  spec.keyframes = {1, 30};
  spec.seed = 77;
  const auto dump = generate_dump(spec);
  auto config = ratio_config(0.5);
  config.strategy = Strategy::kDominantContextual;
  const auto a = run_pipeline(dump, config, {spec.keyframes, {}});
  const auto b = run_pipeline(generate_dump(spec), config, {spec.keyframes, {}});
  EXPECT_EQ(a.plan, b.plan);
  EXPECT_EQ(a.importance.weights, b.importance.weights);
  EXPECT_EQ(a.kept_tokens, b.kept_tokens);
}

TEST(RunPipelineProperty, BoostLadderNeverLowersKeyframeBudget) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::uint64_t previous = 0;
    for (double boost : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0}) {
      SynthSpec spec;
      spec.num_heads = 1;
      spec.keyframes = {4, 11, 27};
      spec.keyframe_boost = boost;
      spec.seed = seed;
      const auto report =
          run_pipeline(generate_dump(spec), ratio_config(0.25), {spec.keyframes, {}});
      std::uint64_t on_keyframes = 0;
      for (auto k : spec.keyframes) on_keyframes += report.plan.allocations[k];
      EXPECT_GE(on_keyframes, previous) << "seed " << seed << " boost " << boost;
      previous = on_keyframes;
    }
  }
}

TEST(RecallAtK, TiesAtCapOrderedByWeight) {
  AllocationPlan plan;
  plan.weights = {0.05, 0.05, 0.3, 0.6};
  plan.allocations = {10, 98, 98, 98};
  EXPECT_EQ(rank_frames_by_allocation(plan), (std::vector<std::size_t>{3, 2, 1, 0}));
  EXPECT_DOUBLE_EQ(recall_at_k(plan, {2, 3}, 2), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_k(plan, {0}, 1), 0.0);
  EXPECT_DOUBLE_EQ(recall_at_k(plan, {0, 2}, 4), 1.0);
}

}  // namespace
}  // namespace dytok
