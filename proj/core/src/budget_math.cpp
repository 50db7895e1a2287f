#include "dytok/budget_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dytok/compression.hpp"
#include "dytok/error.hpp"

namespace dytok {

namespace {

__extension__ typedef unsigned __int128 u128;

// A product like 0.25 * 6272 may land one ulp under the exact integer.
constexpr double kFloorSnap = 1e-9;

u128 layer_cost_wide(const FlopsModel& m, std::uint64_t n) {
  const u128 d = m.hidden_dim;
  const u128 ffn = m.ffn_dim;
  const u128 tokens = n;
  return 4 * tokens * d * d + 2 * tokens * tokens * d + 2 * tokens * d * ffn;
}

std::uint64_t narrow(u128 v) {
  require(v <= std::numeric_limits<std::uint64_t>::max(),
          "FLOPs count overflows 64 bits");
  return static_cast<std::uint64_t>(v);
}

void check_model(const FlopsModel& m) {
  require(m.num_layers >= 1 && m.hidden_dim >= 1 && m.ffn_dim >= 1,
          "FLOPs model dimensions must be >= 1");
}

}  // namespace

std::uint64_t layer_flops(const FlopsModel& model, std::uint64_t seq_len) {
  check_model(model);
  return narrow(layer_cost_wide(model, seq_len));
}

std::uint64_t total_flops(const FlopsModel& model, std::uint64_t seq_len) {
  check_model(model);
  const u128 per_layer = layer_cost_wide(model, seq_len);
  require(per_layer == 0 ||
              u128{model.num_layers} <= std::numeric_limits<u128>::max() / per_layer,
          "FLOPs count overflows");
  return narrow(per_layer * model.num_layers);
}

double llm_prune_reduction(const FlopsModel& model, std::uint64_t prune_layer,
                           std::uint64_t n_before, std::uint64_t n_after,
                           std::uint64_t total_layers) {
  check_model(model);
  require(prune_layer >= 1 && prune_layer <= total_layers,
          "prune layer must satisfy 0 < K <= L");
  require(n_after <= n_before, "retained tokens cannot exceed the original count");
  const auto full = static_cast<long double>(layer_cost_wide(model, n_before));
  if (full == 0) return 0.0;
  const auto pruned = static_cast<long double>(layer_cost_wide(model, n_after));
  const long double kept_cost = static_cast<long double>(prune_layer) * full +
                                static_cast<long double>(total_layers - prune_layer) * pruned;
  const long double base_cost = static_cast<long double>(total_layers) * full;
  return static_cast<double>(1.0L - kept_cost / base_cost);
}

double encoder_select_reduction(const FlopsModel& model, std::uint64_t n,
                                std::uint64_t k, bool include_projector) {
  check_model(model);
  require(k <= n, "selected tokens cannot exceed the original count");
  const long double layers =
      static_cast<long double>(model.num_layers) + (include_projector ? 1.0L : 0.0L);
  const long double full = layers * static_cast<long double>(layer_cost_wide(model, n));
  if (full == 0) return 0.0;
  const long double kept = layers * static_cast<long double>(layer_cost_wide(model, k));
  return static_cast<double>(1.0L - kept / full);
}

double aligned_avg_tokens(std::uint64_t total_layers, std::uint64_t prune_layer,
                          std::uint64_t pre_tokens, std::uint64_t post_tokens) {
  require(prune_layer >= 1 && prune_layer <= total_layers,
          "prune layer must satisfy 0 < K <= L");
  const long double sum =
      static_cast<long double>(prune_layer) * pre_tokens +
      static_cast<long double>(total_layers - prune_layer) * post_tokens;
  return static_cast<double>(sum / static_cast<long double>(total_layers));
}

AlignmentSolution solve_post_tokens(std::uint64_t total_layers,
                                    std::uint64_t prune_layer,
                                    std::uint64_t pre_tokens, double avg_tokens) {
  require(prune_layer >= 1 && prune_layer < total_layers,
          "solving for M needs 0 < K < L");
  require(std::isfinite(avg_tokens), "average token count must be finite");
  const long double exact =
      (static_cast<long double>(total_layers) * avg_tokens -
       static_cast<long double>(prune_layer) * pre_tokens) /
      static_cast<long double>(total_layers - prune_layer);
  constexpr long double kSlack = 1e-9L;
  if (exact < -kSlack) {
    fail(ErrorCode::kInfeasibleAlignment,
         "alignment needs M = " + std::to_string(static_cast<double>(exact)) +
             " < 0 tokens after layer " + std::to_string(prune_layer));
  }
  if (exact > static_cast<long double>(pre_tokens) + kSlack) {
    fail(ErrorCode::kInfeasibleAlignment,
         "alignment needs M = " + std::to_string(static_cast<double>(exact)) +
             " > N = " + std::to_string(pre_tokens));
  }
  long double rounded = std::round(exact);
  rounded = std::clamp(rounded, 0.0L, static_cast<long double>(pre_tokens));
  AlignmentSolution out;
  out.post_tokens = static_cast<std::uint64_t>(rounded);
  out.residual =
      aligned_avg_tokens(total_layers, prune_layer, pre_tokens, out.post_tokens) -
      avg_tokens;
  return out;
}

std::vector<RetentionRow> retention_table(std::uint64_t tokens_per_frame,
                                          std::span<const double> ratios) {
  require(tokens_per_frame >= 7, "tokens per frame must be >= 7");
  std::vector<RetentionRow> rows;
  rows.reserve(ratios.size());
  for (double ratio : ratios) {
    require(std::isfinite(ratio) && ratio >= 0.0 && ratio <= 1.0,
            "retention ratio must lie in [0, 1]");
    RetentionRow row;
    row.ratio = ratio;
    row.numerical_sum = ratio * static_cast<double>(tokens_per_frame);
    row.raw_budget = budget_from_retention(ratio, tokens_per_frame);
    const auto split = dominant_contextual_split(row.raw_budget);
    row.effective_budget = split.effective();
    row.dominant = split.dominant;
    row.contextual = split.contextual;
    rows.push_back(row);
  }
  return rows;
}

std::uint64_t budget_from_retention(double ratio, std::uint64_t total_tokens) {
  require(std::isfinite(ratio) && ratio >= 0.0 && ratio <= 1.0,
          "retention ratio must lie in [0, 1]");
  const double raw = ratio * static_cast<double>(total_tokens);
  return std::min(total_tokens, static_cast<std::uint64_t>(std::floor(raw + kFloorSnap)));
}

}  // namespace dytok
