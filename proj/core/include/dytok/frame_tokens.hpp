#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace dytok {

/// Visual tokens of one frame as seen by a compression strategy.
///
/// `features` is row-major [token][feature_dim]. `token_scores` carries a
/// caller-supplied per-token importance (text-to-visual attention for
/// attention-based pruning, dominance for encoder-side pruning).
struct FrameTokens {
  std::size_t frame_index = 0;
  std::size_t token_count = 0;
  std::size_t feature_dim = 0;
  std::optional<std::vector<double>> features;
  std::optional<std::vector<double>> token_scores;

  bool has_features() const noexcept { return features.has_value(); }
  bool has_scores() const noexcept { return token_scores.has_value(); }

  /// Throws invalid-argument when the optional arrays disagree with token_count.
  void validate() const;
};

}  // namespace dytok
