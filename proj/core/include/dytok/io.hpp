#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dytok/allocator.hpp"
#include "dytok/attention.hpp"
#include "dytok/budget_math.hpp"
#include "dytok/compression.hpp"
#include "dytok/pipeline.hpp"
#include "dytok/synth.hpp"

namespace dytok {

using Json = nlohmann::json;

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);
/// Parse failures raise a format error mentioning `what`.
Json parse_json(std::string_view text, std::string_view what);

// {"weights":[...], "estimator":"...", "layers":[...]}
Json to_json(const FrameImportance& imp);
FrameImportance importance_from_json(const Json& j);

Json to_json(const AllocationPlan& plan);
AllocationPlan plan_from_json(const Json& j);
/// frame,weight,floor,remainder,allocation
std::string plan_to_csv(const AllocationPlan& plan);

Json to_json(std::span<const CompressedFrame> frames);

/// Dominant,Contextual,Retention Ratio,Numerical Sum,Approximate Sum
std::string retention_table_csv(std::span<const RetentionRow> rows);

/// {"frames":[{"frame_index":0,"features":[[..],..],"token_scores":[..]}]}
std::vector<FrameTokens> frame_tokens_from_json(const Json& j);

SynthSpec synth_spec_from_json(const Json& j);
Json to_json(const SynthSpec& spec);

/// Reads recognised keys from `j` on top of `base`.
PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig base = {});

Json to_json(const HarnessReport& report);
/// frame,weight,smoothed_weight,allocation,keyframe,outlier
std::string report_frames_csv(const HarnessReport& report, const GroundTruth& truth);
/// layer,frame,attention
std::string heatmap_csv(const std::vector<std::vector<double>>& layer_frame);

}  // namespace dytok
