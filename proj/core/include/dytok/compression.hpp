#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dytok/allocator.hpp"
#include "dytok/frame_tokens.hpp"

namespace dytok {

enum class TokenKind { kDominant, kContextual, kPlain };

enum class Strategy { kTopK, kDominantContextual, kUniform };

std::string_view to_string(TokenKind kind) noexcept;
std::string_view to_string(Strategy strategy) noexcept;
Strategy parse_strategy(std::string_view text);

struct CompressedFrame {
  std::size_t frame_index = 0;
  std::vector<std::size_t> kept_indices;  // ascending
  std::optional<std::vector<TokenKind>> kind_labels;

  friend bool operator==(const CompressedFrame&, const CompressedFrame&) = default;
};

/// Keeps the `budget` highest-scoring tokens (ties: lower index).
CompressedFrame compress_topk(const FrameTokens& frame, std::size_t budget);

struct DominantContextualSplit {
  std::size_t dominant = 0;
  std::size_t contextual = 0;

  std::size_t effective() const noexcept { return dominant + contextual; }
  friend bool operator==(const DominantContextualSplit&,
                         const DominantContextualSplit&) = default;
};

/// Rounds the budget down to a multiple of 7 and splits it 6:1.
DominantContextualSplit dominant_contextual_split(std::size_t budget);

/// Dominant slots go to the top-scored tokens; contextual slots are a
/// uniform-stride subsample of the remaining tokens in index order.
CompressedFrame compress_dominant_contextual(const FrameTokens& frame,
                                             std::size_t budget);

/// Score-free baseline: indices floor(i * n / budget), i = 0..budget-1.
CompressedFrame compress_uniform(const FrameTokens& frame, std::size_t budget);

CompressedFrame compress_frame(const FrameTokens& frame, std::size_t budget,
                               Strategy strategy);

/// Applies `strategy` per frame with the plan's allocation. Output order is
/// input order.
std::vector<CompressedFrame> compress_video(std::span<const FrameTokens> frames,
                                            const AllocationPlan& plan,
                                            Strategy strategy);

/// Uniform-stride pick of `count` positions out of `n`.
std::vector<std::size_t> stride_positions(std::size_t n, std::size_t count);

}  // namespace dytok
