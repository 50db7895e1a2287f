#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dytok/attention.hpp"

namespace dytok::testing {

inline AttentionDump make_dump(std::vector<std::uint32_t> tpf, std::vector<double> logits,
                               std::uint32_t layers = 1, std::uint32_t heads = 1,
                               std::uint32_t queries = 1) {
  const auto mode = queries > 1 ? QueryMode::kAllQueryTokens : QueryMode::kLastToken;
  return AttentionDump(layers, heads, queries, mode, std::move(tpf), std::move(logits));
}

/// Random dump with float-representable logits.
inline AttentionDump random_dump(std::mt19937_64& rng, std::uint32_t max_frames = 6,
                                 std::uint32_t max_tokens = 5, std::uint32_t max_layers = 4,
                                 std::uint32_t max_heads = 3, std::uint32_t max_queries = 3) {
  auto pick = [&](std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
  };
  const auto frames = pick(1, max_frames);
  std::vector<std::uint32_t> tpf(frames);
  std::size_t visual = 0;
  for (auto& n : tpf) {
    n = pick(1, max_tokens);
    visual += n;
  }
  const auto layers = pick(1, max_layers);
  const auto heads = pick(1, max_heads);
  const auto queries = pick(1, max_queries);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::vector<double> logits(visual * layers * heads * queries);
  for (auto& v : logits) v = static_cast<float>(noise(rng));
  return make_dump(std::move(tpf), std::move(logits), layers, heads, queries);
}

}  // namespace dytok::testing
