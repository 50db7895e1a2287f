#include "dytok/synth.hpp"

#include <cmath>
#include <string>

#include "dytok/error.hpp"
#include "dytok/rng.hpp"

namespace dytok {

void SynthSpec::validate() const {
  require(num_frames >= 1 && tokens_per_frame >= 1 && num_layers >= 1 &&
              num_heads >= 1 && num_query_tokens >= 1,
          "synthetic spec dimensions must be >= 1");
  require(std::isfinite(keyframe_boost) && keyframe_boost > 0.0,
          "keyframe_boost must be > 0");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, "noise_sigma must be >= 0");
  for (auto k : keyframes) {
    require(k < num_frames, "keyframe " + std::to_string(k) + " out of range");
  }
  if (outliers) {
    require(std::isfinite(outliers->boost), "outlier boost must be finite");
    require(outliers->layer_lo <= outliers->layer_hi &&
                outliers->layer_hi < num_layers,
            "outlier layer range out of bounds");
    for (auto p : outliers->positions) {
      require(p < num_frames, "outlier frame " + std::to_string(p) + " out of range");
      require(allow_overlap || !keyframes.contains(p),
              "outlier frame " + std::to_string(p) +
                  " is also a keyframe (set allow_overlap to permit)");
    }
  }
}

AttentionDump generate_dump(const SynthSpec& spec) {
  spec.validate();
  const std::size_t visual = std::size_t{spec.num_frames} * spec.tokens_per_frame;
  const std::size_t total =
      std::size_t{spec.num_layers} * spec.num_heads * spec.num_query_tokens * visual;

  const auto deep = select_deep_layers(spec.num_layers, 1.0 / 3.0);
  const std::uint32_t deep_start = deep.indices().front();

  std::vector<double> frame_offset_deep(spec.num_frames, 0.0);
  for (auto k : spec.keyframes) frame_offset_deep[k] += spec.keyframe_boost;

  std::vector<double> logits(total);
  GaussianSource rng(spec.seed);
  std::size_t i = 0;
  for (std::uint32_t l = 0; l < spec.num_layers; ++l) {
    const bool is_deep = l >= deep_start;
    const bool in_band = spec.outliers && l >= spec.outliers->layer_lo &&
                         l <= spec.outliers->layer_hi;
    for (std::uint32_t h = 0; h < spec.num_heads; ++h) {
      for (std::uint32_t q = 0; q < spec.num_query_tokens; ++q) {
        for (std::uint32_t f = 0; f < spec.num_frames; ++f) {
          double offset = is_deep ? frame_offset_deep[f] : 0.0;
          if (in_band && spec.outliers->positions.contains(f)) {
            offset += spec.outliers->boost;
          }
          for (std::uint32_t t = 0; t < spec.tokens_per_frame; ++t) {
            const double noise =
                spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.standard_normal() : 0.0;
            logits[i++] = static_cast<double>(static_cast<float>(noise + offset));
          }
        }
      }
    }
  }
  const QueryMode mode =
      spec.num_query_tokens > 1 ? QueryMode::kAllQueryTokens : QueryMode::kLastToken;
  return AttentionDump(spec.num_layers, spec.num_heads, spec.num_query_tokens, mode,
                       std::vector<std::uint32_t>(spec.num_frames, spec.tokens_per_frame),
                       std::move(logits));
}

}  // namespace dytok
