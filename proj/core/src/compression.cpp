#include "dytok/compression.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dytok/error.hpp"

namespace dytok {

std::string_view to_string(TokenKind kind) noexcept {
  switch (kind) {
    case TokenKind::kDominant:
      return "dominant";
    case TokenKind::kContextual:
      return "contextual";
    case TokenKind::kPlain:
      return "plain";
  }
  return "unknown";
}

std::string_view to_string(Strategy strategy) noexcept {
  switch (strategy) {
    case Strategy::kTopK:
      return "topk";
    case Strategy::kDominantContextual:
      return "dominant_contextual";
    case Strategy::kUniform:
      return "uniform";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  for (auto s : {Strategy::kTopK, Strategy::kDominantContextual, Strategy::kUniform}) {
    if (text == to_string(s)) return s;
  }
  fail(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(text) + "'");
}

namespace {

void check_budget(const FrameTokens& frame, std::size_t budget) {
  frame.validate();
  require(budget <= frame.token_count,
          "frame " + std::to_string(frame.frame_index) + ": budget " +
              std::to_string(budget) + " exceeds token count " +
              std::to_string(frame.token_count));
}

const std::vector<double>& require_scores(const FrameTokens& frame) {
  require(frame.has_scores(),
          "frame " + std::to_string(frame.frame_index) + " has no token scores");
  return *frame.token_scores;
}

// Indices of the `k` best scores, best first; ties go to the lower index.
std::vector<std::size_t> top_indices(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

}  // namespace

std::vector<std::size_t> stride_positions(std::size_t n, std::size_t count) {
  require(count <= n, "stride sample larger than population");
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = i * n / count;
  return out;
}

CompressedFrame compress_topk(const FrameTokens& frame, std::size_t budget) {
  check_budget(frame, budget);
  const auto& scores = require_scores(frame);
  CompressedFrame out;
  out.frame_index = frame.frame_index;
  out.kept_indices = top_indices(scores, budget);
  std::sort(out.kept_indices.begin(), out.kept_indices.end());
  return out;
}

DominantContextualSplit dominant_contextual_split(std::size_t budget) {
  const std::size_t effective = budget / 7 * 7;
  return {effective / 7 * 6, effective / 7};
}

CompressedFrame compress_dominant_contextual(const FrameTokens& frame,
                                             std::size_t budget) {
  check_budget(frame, budget);
  const auto& scores = require_scores(frame);
  const auto split = dominant_contextual_split(budget);

  auto dominant = top_indices(scores, split.dominant);
  std::vector<bool> taken(frame.token_count, false);
  for (auto i : dominant) taken[i] = true;
  std::vector<std::size_t> rest;
  rest.reserve(frame.token_count - dominant.size());
  for (std::size_t i = 0; i < frame.token_count; ++i) {
    if (!taken[i]) rest.push_back(i);
  }

  std::vector<std::pair<std::size_t, TokenKind>> kept;
  kept.reserve(split.effective());
  for (auto i : dominant) kept.emplace_back(i, TokenKind::kDominant);
  for (auto p : stride_positions(rest.size(), split.contextual)) {
    kept.emplace_back(rest[p], TokenKind::kContextual);
  }
  std::sort(kept.begin(), kept.end());

  CompressedFrame out;
  out.frame_index = frame.frame_index;
  out.kind_labels.emplace();
  for (auto [i, kind] : kept) {
    out.kept_indices.push_back(i);
    out.kind_labels->push_back(kind);
  }
  return out;
}

CompressedFrame compress_uniform(const FrameTokens& frame, std::size_t budget) {
  check_budget(frame, budget);
  CompressedFrame out;
  out.frame_index = frame.frame_index;
  out.kept_indices = stride_positions(frame.token_count, budget);
  return out;
}

CompressedFrame compress_frame(const FrameTokens& frame, std::size_t budget,
                               Strategy strategy) {
  switch (strategy) {
    case Strategy::kTopK:
      return compress_topk(frame, budget);
    case Strategy::kDominantContextual:
      return compress_dominant_contextual(frame, budget);
    case Strategy::kUniform:
      return compress_uniform(frame, budget);
  }
  fail(ErrorCode::kInvalidArgument, "unknown strategy");
}

std::vector<CompressedFrame> compress_video(std::span<const FrameTokens> frames,
                                            const AllocationPlan& plan,
                                            Strategy strategy) {
  require(frames.size() == plan.allocations.size(),
          "frame count " + std::to_string(frames.size()) +
              " does not match plan length " + std::to_string(plan.allocations.size()));
  std::vector<CompressedFrame> out;
  out.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    out.push_back(compress_frame(frames[f], plan.allocations[f], strategy));
  }
  return out;
}

}  // namespace dytok
