#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dytok/attention.hpp"
#include "dytok/error.hpp"
#include "test_util.hpp"

namespace dytok {
namespace {

using testing::make_dump;
using testing::random_dump;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::vector<std::uint32_t> range(std::uint32_t lo, std::uint32_t hi) {
  std::vector<std::uint32_t> out;
  for (auto i = lo; i <= hi; ++i) out.push_back(i);
  return out;
}

TEST(SelectDeepLayers, LastThirdOf24) {
  EXPECT_EQ(select_deep_layers(24, 1.0 / 3.0).indices(), range(16, 23));
}

TEST(SelectDeepLayers, SingleLayer) {
  EXPECT_EQ(select_deep_layers(1, 1.0).indices(), range(0, 0));
}

TEST(SelectDeepLayers, HalfOf28) {
  EXPECT_EQ(select_deep_layers(28, 0.5).indices(), range(14, 27));
}

TEST(SelectDeepLayers, CeilingRoundsUp) {
  // ceil(28 / 3) = 10
  EXPECT_EQ(select_deep_layers(28, 1.0 / 3.0).indices(), range(18, 27));
}

TEST(SelectDeepLayers, RejectsBadFraction) {
  EXPECT_THROW(select_deep_layers(24, 0.0), Error);
  EXPECT_THROW(select_deep_layers(24, 1.5), Error);
  EXPECT_THROW(select_deep_layers(0, 0.5), Error);
}

TEST(LayerSet, Invariants) {
  EXPECT_THROW(LayerSet({}, 4), Error);
  EXPECT_THROW(LayerSet({2, 1}, 4), Error);
  EXPECT_THROW(LayerSet({1, 1}, 4), Error);
  EXPECT_THROW(LayerSet({4}, 4), Error);
  EXPECT_NO_THROW(LayerSet({0, 3}, 4));
}

TEST(AttentionDump, RejectsShapeMismatch) {
  EXPECT_THROW(make_dump({2, 2}, std::vector<double>(3)), Error);
  EXPECT_THROW(make_dump({0, 2}, std::vector<double>(2)), Error);
  EXPECT_THROW(AttentionDump(1, 1, 2, QueryMode::kLastToken, {1}, {0.0, 0.0}), Error);
}

TEST(FrameImportance, EqualLogitsGiveUniformWeights) {
  auto dump = make_dump({3, 1, 2}, std::vector<double>(6 * 2 * 2, 0.7), 2, 2);
  auto imp = compute_frame_importance(dump, LayerSet::all(2));
  for (double w : imp.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(imp.estimator, Estimator::kCrossAttention);
}

TEST(FrameImportance, TwoFrameHandSoftmax) {
  auto dump = make_dump({1, 1}, {std::log(3.0), std::log(1.0)});
  auto imp = compute_frame_importance(dump, LayerSet::all(1));
  EXPECT_NEAR(imp.weights[0], 0.75, 1e-12);
  EXPECT_NEAR(imp.weights[1], 0.25, 1e-12);
}

TEST(FrameImportance, FrameMeanNotSum) {
  // Frame 0 has two tokens sharing 2/3 of the mass, frame 1 one token with 1/3:
  // per-token means are equal, so the weights are equal.
  auto dump = make_dump({2, 1}, {0.0, 0.0, 0.0});
  auto imp = compute_frame_importance(dump, LayerSet::all(1));
  EXPECT_NEAR(imp.weights[0], 0.5, 1e-15);
}

TEST(FrameImportance, HeadsAveragedAfterSoftmax) {
  // head 0 softmax [0.75, 0.25]; head 1 softmax [0.5, 0.5] -> mean [0.625, 0.375]
  auto dump = make_dump({1, 1}, {std::log(3.0), 0.0, 0.0, 0.0}, 1, 2);
  auto imp = compute_frame_importance(dump, LayerSet::all(1));
  EXPECT_NEAR(imp.weights[0], 0.625, 1e-12);
}

TEST(FrameImportance, LastTokenModeReadsFinalQueryRow) {
  // Two query rows: first is uniform, last favours frame 1 at 3:1.
  auto dump = make_dump({1, 1}, {0.0, 0.0, 0.0, std::log(3.0)}, 1, 1, 2);
  auto all = compute_frame_importance(dump, LayerSet::all(1));
  auto last = compute_frame_importance(dump, LayerSet::all(1),
                                       ImportanceOptions{QueryMode::kLastToken});
  EXPECT_NEAR(all.weights[1], 0.625, 1e-12);
  EXPECT_NEAR(last.weights[1], 0.75, 1e-12);
}

TEST(FrameImportance, RejectsLayersOutsideDump) {
  auto dump = make_dump({1, 1}, {0.0, 0.0});
  EXPECT_THROW(compute_frame_importance(dump, LayerSet({1}, 2)), Error);
}

TEST(FrameImportance, NonFiniteLogitIsDataCorruption) {
  auto dump = make_dump({1, 1}, {0.0, NAN});
  try {
    compute_frame_importance(dump, LayerSet::all(1));
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataCorruption);
  }
}

TEST(FrameImportance, PlantedKeyframeIsArgmax) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::uint32_t frames = 8, tokens = 10, layers = 6;
  for (std::uint32_t planted = 0; planted < frames; ++planted) {
    std::vector<double> logits(std::size_t{frames} * tokens * layers);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const auto frame = (i % (frames * tokens)) / tokens;
      logits[i] = noise(rng) + (frame == planted ? 6.0 : 0.0);
    }
    auto dump = make_dump(std::vector<std::uint32_t>(frames, tokens), logits, layers);
    auto w = compute_frame_importance(dump, LayerSet::all(layers)).weights;
    std::size_t argmax = 0;
    for (std::size_t f = 1; f < w.size(); ++f) {
      if (w[f] > w[argmax]) argmax = f;
    }
    EXPECT_EQ(argmax, planted);
  }
}

// Properties ----------------------------------------------------------------

TEST(FrameImportanceProperty, ShiftInvariancePerRow) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int trial = 0; trial < 300; ++trial) {
    auto dump = random_dump(rng);
    const auto base = compute_frame_importance(dump, LayerSet::all(dump.num_layers()));
    auto shifted = dump;
    for (std::uint32_t l = 0; l < dump.num_layers(); ++l)
      for (std::uint32_t h = 0; h < dump.num_heads(); ++h)
        for (std::uint32_t q = 0; q < dump.num_query_tokens(); ++q) {
          const double c = shift(rng);
          for (double& v : shifted.mutable_row(l, h, q)) v += c;
        }
    const auto moved = compute_frame_importance(shifted, LayerSet::all(dump.num_layers()));
    for (std::size_t f = 0; f < base.weights.size(); ++f) {
      ASSERT_NEAR(base.weights[f], moved.weights[f], 1e-9);
    }
  }
}

TEST(FrameImportanceProperty, PermutationEquivariance) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto dump = random_dump(rng);
    const auto frames = dump.num_frames();
    std::vector<std::uint32_t> perm(frames);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<std::uint32_t> tpf(frames);
    for (std::uint32_t f = 0; f < frames; ++f) tpf[f] = dump.tokens_per_frame()[perm[f]];
    std::vector<double> logits;
    const auto& off = dump.frame_offsets();
    for (std::uint32_t l = 0; l < dump.num_layers(); ++l)
      for (std::uint32_t h = 0; h < dump.num_heads(); ++h)
        for (std::uint32_t q = 0; q < dump.num_query_tokens(); ++q) {
          auto row = dump.row(l, h, q);
          for (auto src : perm) {
            logits.insert(logits.end(), row.begin() + static_cast<std::ptrdiff_t>(off[src]),
                          row.begin() + static_cast<std::ptrdiff_t>(off[src + 1]));
          }
        }
    auto permuted = AttentionDump(dump.num_layers(), dump.num_heads(),
                                  dump.num_query_tokens(), dump.query_mode(), tpf, logits);
    const auto a = compute_frame_importance(dump, LayerSet::all(dump.num_layers()));
    const auto b = compute_frame_importance(permuted, LayerSet::all(dump.num_layers()));
    for (std::uint32_t f = 0; f < frames; ++f) {
      // Summation order inside a row changes, so equality is up to rounding.
      ASSERT_NEAR(b.weights[f], a.weights[perm[f]], 1e-12);
    }
  }
}

TEST(FrameImportanceProperty, AllEstimatorsNormalized) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto dump = random_dump(rng);
    const auto layers = LayerSet::all(dump.num_layers());
    for (const auto& imp : {compute_frame_importance(dump, layers),
                            attention_entropy_importance(dump, layers)}) {
      ASSERT_NEAR(sum(imp.weights), 1.0, 1e-9);
      for (double w : imp.weights) ASSERT_TRUE(w >= 0.0 && w <= 1.0);
    }
  }
}

TEST(FrameImportanceProperty, DeepSubsetWithFullFractionEqualsAllLayers) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto dump = random_dump(rng);
    auto full = compute_frame_importance(dump, LayerSet::all(dump.num_layers()));
    auto deep = compute_frame_importance(dump, select_deep_layers(dump.num_layers(), 1.0));
    for (std::size_t f = 0; f < full.weights.size(); ++f) {
      ASSERT_NEAR(full.weights[f], deep.weights[f], 1e-12);
    }
  }
}

// Attention entropy -------------------------------------------------------------

TEST(AttentionEntropy, UniformAttentionUniformWeights) {
  auto dump = make_dump({4, 4, 4}, std::vector<double>(12, 0.0));
  auto imp = attention_entropy_importance(dump, LayerSet::all(1));
  for (double w : imp.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(imp.estimator, Estimator::kAttentionEntropy);
}

TEST(AttentionEntropy, SingleTokenFrameHasZeroEntropy) {
  // Frame 0: one token (entropy 0). Frame 1: two equal tokens (entropy ln 2).
  auto dump = make_dump({1, 2}, {0.0, 0.0, 0.0});
  auto imp = attention_entropy_importance(dump, LayerSet::all(1));
  EXPECT_NEAR(imp.weights[0], 0.0, 1e-15);
  EXPECT_NEAR(imp.weights[1], 1.0, 1e-15);
}

// Feature estimators ------------------------------------------------------------

FrameTokens feature_frame(std::size_t index, std::vector<std::vector<double>> rows) {
  FrameTokens ft;
  ft.frame_index = index;
  ft.token_count = rows.size();
  ft.feature_dim = rows.front().size();
  std::vector<double> flat;
  for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  ft.features = std::move(flat);
  return ft;
}

TEST(FeatureEntropy, IdenticalFeaturesUniform) {
  std::vector<FrameTokens> frames{feature_frame(0, {{1, 2, 3}, {1, 2, 3}}),
                                  feature_frame(1, {{1, 2, 3}})};
  auto imp = feature_entropy_importance(frames);
  EXPECT_NEAR(imp.weights[0], 0.5, 1e-15);
  EXPECT_EQ(imp.estimator, Estimator::kFeatureEntropy);
}

TEST(FeatureEntropy, FlatFeaturesBeatDominantCoordinate) {
  // softmax entropies: [0,0,0,0] -> ln 4 = 1.386..., [10,0,0,0] -> 0.00149...
  std::vector<FrameTokens> frames{feature_frame(0, {{0, 0, 0, 0}}),
                                  feature_frame(1, {{10, 0, 0, 0}})};
  auto imp = feature_entropy_importance(frames);
  EXPECT_GT(imp.weights[0], imp.weights[1]);
  EXPECT_NEAR(imp.weights[0], 1.3862943611198906 / (1.3862943611198906 + 0.0014980029292489647),
              1e-12);
  EXPECT_NEAR(sum(imp.weights), 1.0, 1e-12);
}

TEST(FeatureEntropy, MissingFeaturesRejected) {
  FrameTokens ft;
  ft.token_count = 2;
  ft.token_scores = std::vector<double>{1, 2};
  std::vector<FrameTokens> frames{ft};
  EXPECT_THROW(feature_entropy_importance(frames), Error);
  EXPECT_THROW(feature_magnitude_importance(frames), Error);
}

TEST(FeatureMagnitude, AllZeroFallsBackToUniform) {
  std::vector<FrameTokens> frames{feature_frame(0, {{0, 0}}), feature_frame(1, {{0, 0}}),
                                  feature_frame(2, {{0, 0}, {0, 0}})};
  auto imp = feature_magnitude_importance(frames);
  for (double w : imp.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
}

TEST(FeatureMagnitude, MeanNormRatio) {
  std::vector<FrameTokens> frames{feature_frame(0, {{2, 0}, {0, 2}}),
                                  feature_frame(1, {{1, 0}, {0, -1}})};
  auto imp = feature_magnitude_importance(frames);
  EXPECT_NEAR(imp.weights[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(imp.weights[1], 1.0 / 3.0, 1e-15);
}

// Outliers ---------------------------------------------------------------------

FrameImportance weights(std::vector<double> w) {
  return FrameImportance{std::move(w), Estimator::kCrossAttention, std::nullopt};
}

TEST(TemporalOutliers, UniformHasNone) {
  EXPECT_TRUE(detect_temporal_outliers(weights(std::vector<double>(10, 0.1))).empty());
}

TEST(TemporalOutliers, SpikedLastFrame) {
  std::vector<double> w(30, 0.02);
  w[29] = 0.42;
  // z(29) = 5.385 by hand; frame 0 sits below the mean.
  EXPECT_EQ(detect_temporal_outliers(weights(w)), (std::set<std::size_t>{29}));
}

TEST(TemporalOutliers, TooFewFrames) {
  EXPECT_TRUE(detect_temporal_outliers(weights({0.9, 0.1})).empty());
}

TEST(TemporalOutliers, BoundaryFramesUseLowerBar) {
  // mean 0.1, population sd 0.0358: a spike of z = 2.24 is flagged on frame 0
  // but not in the interior.
  std::vector<double> w = {0.18, 0.1, 0.1, 0.1, 0.1, 0.1, 0.02, 0.1, 0.1, 0.1};
  auto out = detect_temporal_outliers(weights(w));
  EXPECT_TRUE(out.contains(0));
  std::vector<double> interior = {0.1, 0.1, 0.1, 0.1, 0.18, 0.1, 0.02, 0.1, 0.1, 0.1};
  EXPECT_TRUE(detect_temporal_outliers(weights(interior)).empty());
}

TEST(SmoothOutliers, EmptySetIsIdentity) {
  auto imp = weights({0.2, 0.3, 0.5});
  EXPECT_EQ(smooth_outliers(imp, {}).weights, imp.weights);
}

TEST(SmoothOutliers, ClampAndRenormalize) {
  auto out = smooth_outliers(weights({0.1, 0.1, 0.8}), {2});
  for (double w : out.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
}

TEST(SmoothOutliers, AllFramesOutliersUnchanged) {
  auto imp = weights({0.2, 0.8});
  EXPECT_EQ(smooth_outliers(imp, {0, 1}).weights, imp.weights);
}

TEST(SmoothOutliers, RejectsOutOfRange) {
  EXPECT_THROW(smooth_outliers(weights({0.5, 0.5}), {2}), Error);
}

TEST(SmoothOutliersProperty, MaxNeverIncreasesAndOrderKept) {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> expo(1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    std::vector<double> raw(n);
    for (auto& v : raw) v = expo(rng);
    auto imp = weights(normalize_scores(raw));
    std::set<std::size_t> outliers;
    for (std::size_t f = 0; f < n; ++f) {
      if (rng() % 4 == 0) outliers.insert(f);
    }
    auto out = smooth_outliers(imp, outliers);
    ASSERT_NEAR(sum(out.weights), 1.0, 1e-9);
    ASSERT_LE(*std::max_element(out.weights.begin(), out.weights.end()),
              *std::max_element(imp.weights.begin(), imp.weights.end()) + 1e-15);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (outliers.contains(a) || outliers.contains(b)) continue;
        if (imp.weights[a] < imp.weights[b]) ASSERT_LE(out.weights[a], out.weights[b]);
      }
  }
}

}  // namespace
}  // namespace dytok
