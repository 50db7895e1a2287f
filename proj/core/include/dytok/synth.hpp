#pragma once

#include <cstdint>
#include <optional>
#include <set>

#include "dytok/attention.hpp"

namespace dytok {

/// A frame-level attention spike confined to a band of layers.
struct OutlierSpec {
  std::set<std::size_t> positions;
  double boost = 0.0;
  std::uint32_t layer_lo = 0;  // inclusive
  std::uint32_t layer_hi = 0;  // inclusive
};

struct SynthSpec {
  std::uint32_t num_frames = 32;
  std::uint32_t tokens_per_frame = 196;
  std::uint32_t num_layers = 28;
  std::uint32_t num_heads = 4;
  std::uint32_t num_query_tokens = 1;
  std::set<std::size_t> keyframes;
  double keyframe_boost = 5.0;
  std::optional<OutlierSpec> outliers;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  bool allow_overlap = false;

  void validate() const;
};

/// Logits are N(0, noise_sigma) per entry, drawn in payload order from a
/// GaussianSource seeded with `seed`. Keyframe tokens get +keyframe_boost in
/// the last third of layers; outlier tokens get +boost inside the outlier
/// layer band. Values are rounded to float precision so that the dump
/// survives an ATND round trip unchanged.
AttentionDump generate_dump(const SynthSpec& spec);

}  // namespace dytok
