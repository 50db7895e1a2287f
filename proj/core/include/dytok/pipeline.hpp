#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dytok/allocator.hpp"
#include "dytok/attention.hpp"
#include "dytok/compression.hpp"

namespace dytok {

struct SmoothingConfig {
  bool enabled = false;
  double z_threshold = kDefaultOutlierZ;
};

struct PipelineConfig {
  Estimator estimator = Estimator::kCrossAttention;
  double layer_fraction = 1.0 / 3.0;
  std::optional<QueryMode> query_mode;
  SmoothingConfig smoothing;
  std::optional<std::uint64_t> total_budget;
  std::optional<double> retention_ratio;
  std::optional<std::uint64_t> per_frame_cap;
  Strategy strategy = Strategy::kTopK;
  std::vector<std::size_t> recall_ks;
  std::optional<std::string> output_path;
  std::optional<std::string> csv_path;

  /// Exactly one of total_budget / retention_ratio; ratio in (0, 1].
  void validate() const;

  /// Explicit total_budget, or floor(retention_ratio * total_tokens).
  std::uint64_t resolve_total_budget(std::uint64_t total_tokens) const;

  /// Explicit per_frame_cap, or half of the largest frame.
  std::uint64_t resolve_per_frame_cap(std::uint64_t max_tokens_per_frame) const;
};

/// Importance from a dump with the configured estimator, deep-layer
/// fraction and query mode. Feature estimators need `frames`.
FrameImportance estimate_importance(const AttentionDump& dump,
                                    const PipelineConfig& config);
FrameImportance estimate_importance(std::span<const FrameTokens> frames,
                                    const PipelineConfig& config);

/// Applies outlier detection + smoothing when the config enables it.
FrameImportance apply_smoothing(const FrameImportance& imp,
                                const PipelineConfig& config);

/// Per-frame FrameTokens carrying the dump's deep-layer per-token attention
/// as token scores.
std::vector<FrameTokens> frames_from_dump(const AttentionDump& dump,
                                          const PipelineConfig& config);

BudgetRequest make_budget_request(const FrameImportance& imp,
                                  std::span<const std::uint32_t> tokens_per_frame,
                                  const PipelineConfig& config);

struct GroundTruth {
  std::set<std::size_t> keyframes;
  std::set<std::size_t> outlier_positions;
};

struct HarnessReport {
  std::map<std::size_t, double> recall_at_k;
  double allocation_concentration = 0.0;
  /// Outlier frames' budget share without smoothing minus with smoothing.
  double outlier_suppression = 0.0;
  FrameImportance importance;
  FrameImportance smoothed_importance;
  std::set<std::size_t> detected_outliers;
  AllocationPlan plan;
  std::uint64_t kept_tokens = 0;
};

/// Frames ordered by allocation descending. Frames pinned at the same cap
/// are ordered by the plan's weights, then by index.
std::vector<std::size_t> rank_frames_by_allocation(const AllocationPlan& plan);

/// |top-k allocated frames ∩ truth| / min(k, |truth|).
double recall_at_k(const AllocationPlan& plan, const std::set<std::size_t>& truth,
                   std::size_t k);

/// Estimation -> optional smoothing -> allocation -> compression, scored
/// against planted truth. When truth.outlier_positions is empty the detected
/// outliers stand in for it.
HarnessReport run_pipeline(const AttentionDump& dump, const PipelineConfig& config,
                           const GroundTruth& truth);

}  // namespace dytok
