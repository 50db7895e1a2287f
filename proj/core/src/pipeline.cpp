#include "dytok/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dytok/budget_math.hpp"
#include "dytok/error.hpp"

namespace dytok {

void PipelineConfig::validate() const {
  require(total_budget.has_value() != retention_ratio.has_value(),
          "set exactly one of total_budget and retention_ratio");
  if (retention_ratio) {
    require(std::isfinite(*retention_ratio) && *retention_ratio > 0.0 &&
                *retention_ratio <= 1.0,
            "retention_ratio must lie in (0, 1]");
  }
  require(layer_fraction > 0.0 && layer_fraction <= 1.0,
          "layer_fraction must lie in (0, 1]");
  require(!per_frame_cap || *per_frame_cap >= 1, "per_frame_cap must be >= 1");
  require(std::isfinite(smoothing.z_threshold), "z_threshold must be finite");
}

std::uint64_t PipelineConfig::resolve_total_budget(std::uint64_t total_tokens) const {
  validate();
  if (total_budget) return *total_budget;
  return budget_from_retention(*retention_ratio, total_tokens);
}

std::uint64_t PipelineConfig::resolve_per_frame_cap(
    std::uint64_t max_tokens_per_frame) const {
  if (per_frame_cap) return *per_frame_cap;
  return default_per_frame_cap(max_tokens_per_frame);
}

FrameImportance estimate_importance(const AttentionDump& dump,
                                    const PipelineConfig& config) {
  const auto layers = select_deep_layers(dump.num_layers(), config.layer_fraction);
  const ImportanceOptions options{config.query_mode};
  switch (config.estimator) {
    case Estimator::kCrossAttention:
      return compute_frame_importance(dump, layers, options);
    case Estimator::kAttentionEntropy:
      return attention_entropy_importance(dump, layers, options);
    case Estimator::kFeatureEntropy:
    case Estimator::kFeatureMagnitude:
      break;
  }
  fail(ErrorCode::kInvalidArgument, std::string("estimator ") +
                                        std::string(to_string(config.estimator)) +
                                        " needs token features, not an attention dump");
}

FrameImportance estimate_importance(std::span<const FrameTokens> frames,
                                    const PipelineConfig& config) {
  switch (config.estimator) {
    case Estimator::kFeatureEntropy:
      return feature_entropy_importance(frames);
    case Estimator::kFeatureMagnitude:
      return feature_magnitude_importance(frames);
    default:
      break;
  }
  fail(ErrorCode::kInvalidArgument, std::string("estimator ") +
                                        std::string(to_string(config.estimator)) +
                                        " needs an attention dump");
}

FrameImportance apply_smoothing(const FrameImportance& imp,
                                const PipelineConfig& config) {
  if (!config.smoothing.enabled) return imp;
  return smooth_outliers(imp, detect_temporal_outliers(imp, config.smoothing.z_threshold));
}

std::vector<FrameTokens> frames_from_dump(const AttentionDump& dump,
                                          const PipelineConfig& config) {
  const auto layers = select_deep_layers(dump.num_layers(), config.layer_fraction);
  const auto tok = token_attention(dump, layers, ImportanceOptions{config.query_mode});
  const auto& offsets = dump.frame_offsets();
  std::vector<FrameTokens> frames(dump.num_frames());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    frames[f].frame_index = f;
    frames[f].token_count = offsets[f + 1] - offsets[f];
    frames[f].token_scores.emplace(tok.begin() + static_cast<std::ptrdiff_t>(offsets[f]),
                                   tok.begin() + static_cast<std::ptrdiff_t>(offsets[f + 1]));
  }
  return frames;
}

BudgetRequest make_budget_request(const FrameImportance& imp,
                                  std::span<const std::uint32_t> tokens_per_frame,
                                  const PipelineConfig& config) {
  require(imp.weights.size() == tokens_per_frame.size(),
          "importance length does not match the number of frames");
  const std::uint64_t total_tokens = std::accumulate(
      tokens_per_frame.begin(), tokens_per_frame.end(), std::uint64_t{0});
  const std::uint64_t max_tokens =
      *std::max_element(tokens_per_frame.begin(), tokens_per_frame.end());
  BudgetRequest req;
  req.weights = imp.weights;
  req.total_budget = config.resolve_total_budget(total_tokens);
  req.per_frame_cap = config.resolve_per_frame_cap(max_tokens);
  req.frame_capacities.emplace(tokens_per_frame.begin(), tokens_per_frame.end());
  return req;
}

std::vector<std::size_t> rank_frames_by_allocation(const AllocationPlan& plan) {
  std::vector<std::size_t> order(plan.allocations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool has_weights = plan.weights.size() == plan.allocations.size();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (plan.allocations[a] != plan.allocations[b]) {
      return plan.allocations[a] > plan.allocations[b];
    }
    return has_weights && plan.weights[a] > plan.weights[b];
  });
  return order;
}

double recall_at_k(const AllocationPlan& plan, const std::set<std::size_t>& truth,
                   std::size_t k) {
  require(k >= 1, "recall@k needs k >= 1");
  if (truth.empty()) return 0.0;
  const auto order = rank_frames_by_allocation(plan);
  const std::size_t top = std::min(k, order.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += truth.contains(order[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(std::min(k, truth.size()));
}

namespace {

double budget_share(const AllocationPlan& plan, const std::set<std::size_t>& frames) {
  const auto total = plan.total();
  if (total == 0) return 0.0;
  std::uint64_t sum = 0;
  for (auto f : frames) {
    if (f < plan.allocations.size()) sum += plan.allocations[f];
  }
  return static_cast<double>(sum) / static_cast<double>(total);
}

}  // namespace

HarnessReport run_pipeline(const AttentionDump& dump, const PipelineConfig& config,
                           const GroundTruth& truth) {
  config.validate();
  HarnessReport report;
  report.importance = estimate_importance(dump, config);
  report.detected_outliers =
      detect_temporal_outliers(report.importance, config.smoothing.z_threshold);
  report.smoothed_importance =
      smooth_outliers(report.importance, report.detected_outliers);

  const auto& tpf = dump.tokens_per_frame();
  const auto plan_raw = allocate(make_budget_request(report.importance, tpf, config));
  const auto plan_smoothed =
      allocate(make_budget_request(report.smoothed_importance, tpf, config));
  report.plan = config.smoothing.enabled ? plan_smoothed : plan_raw;

  const auto frames = frames_from_dump(dump, config);
  for (const auto& cf : compress_video(frames, report.plan, config.strategy)) {
    report.kept_tokens += cf.kept_indices.size();
  }

  if (!truth.keyframes.empty()) {
    auto ks = config.recall_ks;
    if (ks.empty()) ks.push_back(truth.keyframes.size());
    for (auto k : ks) report.recall_at_k[k] = recall_at_k(report.plan, truth.keyframes, k);
  }
  report.allocation_concentration = budget_share(report.plan, truth.keyframes);

  const auto& outlier_frames = truth.outlier_positions.empty()
                                   ? report.detected_outliers
                                   : truth.outlier_positions;
  report.outlier_suppression =
      budget_share(plan_raw, outlier_frames) - budget_share(plan_smoothed, outlier_frames);
  return report;
}

}  // namespace dytok
