#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "dytok/frame_tokens.hpp"

namespace dytok {

enum class QueryMode { kLastToken, kAllQueryTokens };

enum class Estimator {
  kCrossAttention,
  kAttentionEntropy,
  kFeatureEntropy,
  kFeatureMagnitude,
};

std::string_view to_string(QueryMode mode) noexcept;
std::string_view to_string(Estimator estimator) noexcept;
QueryMode parse_query_mode(std::string_view text);
Estimator parse_estimator(std::string_view text);

/// Pre-softmax text-to-visual attention logits captured from a decoder.
///
/// Logits are stored layer-major, then head, then query token, then visual
/// token, matching the on-disk ATND payload order.
class AttentionDump {
 public:
  AttentionDump() = default;
  AttentionDump(std::uint32_t num_layers, std::uint32_t num_heads,
                std::uint32_t num_query_tokens, QueryMode query_mode,
                std::vector<std::uint32_t> tokens_per_frame,
                std::vector<double> logits);

  std::uint32_t num_layers() const noexcept { return num_layers_; }
  std::uint32_t num_heads() const noexcept { return num_heads_; }
  std::uint32_t num_query_tokens() const noexcept { return num_query_tokens_; }
  std::uint32_t num_frames() const noexcept {
    return static_cast<std::uint32_t>(tokens_per_frame_.size());
  }
  QueryMode query_mode() const noexcept { return query_mode_; }
  std::size_t num_visual_tokens() const noexcept { return num_visual_; }
  const std::vector<std::uint32_t>& tokens_per_frame() const noexcept {
    return tokens_per_frame_;
  }
  /// Offset of each frame's first token; has num_frames()+1 entries.
  const std::vector<std::size_t>& frame_offsets() const noexcept {
    return frame_offsets_;
  }
  std::span<const double> logits() const noexcept { return logits_; }
  std::span<double> mutable_logits() noexcept { return logits_; }

  std::span<const double> row(std::uint32_t layer, std::uint32_t head,
                              std::uint32_t query) const;
  std::span<double> mutable_row(std::uint32_t layer, std::uint32_t head,
                                std::uint32_t query);

  std::optional<std::uint32_t> feature_dim;

  /// Structural checks throw invalid-argument; non-finite logits throw
  /// data-corruption.
  void validate() const;

  friend bool operator==(const AttentionDump&, const AttentionDump&) = default;

 private:
  std::size_t row_offset(std::uint32_t layer, std::uint32_t head,
                         std::uint32_t query) const;

  std::uint32_t num_layers_ = 0;
  std::uint32_t num_heads_ = 0;
  std::uint32_t num_query_tokens_ = 0;
  QueryMode query_mode_ = QueryMode::kLastToken;
  std::vector<std::uint32_t> tokens_per_frame_;
  std::vector<std::size_t> frame_offsets_;
  std::size_t num_visual_ = 0;
  std::vector<double> logits_;
};

/// Sorted, non-empty set of decoder layer indices.
class LayerSet {
 public:
  LayerSet(std::vector<std::uint32_t> indices, std::uint32_t total_layers);

  static LayerSet all(std::uint32_t total_layers);

  const std::vector<std::uint32_t>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }

  friend bool operator==(const LayerSet&, const LayerSet&) = default;

 private:
  std::vector<std::uint32_t> indices_;
};

struct FrameImportance {
  std::vector<double> weights;
  Estimator estimator = Estimator::kCrossAttention;
  std::optional<LayerSet> layer_set;
};

/// The final ceil(fraction * total_layers) layers.
LayerSet select_deep_layers(std::uint32_t total_layers, double fraction);

struct ImportanceOptions {
  /// Overrides the dump's query mode. kLastToken on an all-query-token dump
  /// reads only the final query row.
  std::optional<QueryMode> query_mode;
};

/// Per-visual-token attention: softmax per (layer, head, query) row, then
/// uniform mean over heads, query rows and layers. Length V.
std::vector<double> token_attention(const AttentionDump& dump,
                                    const LayerSet& layers,
                                    const ImportanceOptions& options = {});

/// Mean softmax attention mass per frame, one row per dump layer. Used for
/// layer-by-frame heatmaps.
std::vector<std::vector<double>> layer_frame_attention(const AttentionDump& dump);

FrameImportance compute_frame_importance(const AttentionDump& dump,
                                         const LayerSet& layers,
                                         const ImportanceOptions& options = {});

FrameImportance attention_entropy_importance(
    const AttentionDump& dump, const LayerSet& layers,
    const ImportanceOptions& options = {});

FrameImportance feature_entropy_importance(std::span<const FrameTokens> frames);

FrameImportance feature_magnitude_importance(std::span<const FrameTokens> frames);

inline constexpr double kDefaultOutlierZ = 3.0;
inline constexpr double kBoundaryOutlierZ = 1.0;

/// Frames whose weight exceeds mean + z*stddev (population), plus the first
/// and last frame when they exceed mean + 1*stddev. Empty for F < 3.
std::set<std::size_t> detect_temporal_outliers(const FrameImportance& imp,
                                               double z_threshold = kDefaultOutlierZ);

/// Clamps outlier weights to the largest non-outlier weight and renormalizes.
FrameImportance smooth_outliers(const FrameImportance& imp,
                                const std::set<std::size_t>& outliers);

/// Scales non-negative scores to sum to one; all-zero input yields uniform.
std::vector<double> normalize_scores(std::span<const double> scores);

}  // namespace dytok
