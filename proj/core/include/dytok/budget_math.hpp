#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dytok {

/// Decoder cost model: T * (4 n d^2 + 2 n^2 d + 2 n d m) FLOPs for n tokens.
struct FlopsModel {
  std::uint64_t num_layers = 1;
  std::uint64_t hidden_dim = 1;
  std::uint64_t ffn_dim = 1;
};

/// Exact FLOPs; throws invalid-argument if the result does not fit 64 bits.
std::uint64_t total_flops(const FlopsModel& model, std::uint64_t seq_len);

/// Cost of a single layer (T = 1).
std::uint64_t layer_flops(const FlopsModel& model, std::uint64_t seq_len);

/// Fractional saving when tokens are pruned from n_before to n_after after
/// layer `prune_layer` of a `total_layers`-layer decoder.
double llm_prune_reduction(const FlopsModel& model, std::uint64_t prune_layer,
                           std::uint64_t n_before, std::uint64_t n_after,
                           std::uint64_t total_layers);

/// Fractional saving when only k of n encoder tokens enter the LLM. With
/// include_projector the projector is costed as one extra decoder layer.
double encoder_select_reduction(const FlopsModel& model, std::uint64_t n,
                                std::uint64_t k, bool include_projector = false);

/// R in K*N + (L-K)*M = L*R.
double aligned_avg_tokens(std::uint64_t total_layers, std::uint64_t prune_layer,
                          std::uint64_t pre_tokens, std::uint64_t post_tokens);

struct AlignmentSolution {
  std::uint64_t post_tokens = 0;
  /// aligned_avg_tokens(L, K, N, M) - R after rounding M.
  double residual = 0.0;
};

/// Post-pruning token count M matching a target average R. Throws
/// infeasible-alignment when the exact solution is negative or exceeds N.
AlignmentSolution solve_post_tokens(std::uint64_t total_layers,
                                    std::uint64_t prune_layer,
                                    std::uint64_t pre_tokens, double avg_tokens);

struct RetentionRow {
  double ratio = 0.0;
  double numerical_sum = 0.0;  // ratio * tokens_per_frame
  std::uint64_t raw_budget = 0;
  std::uint64_t effective_budget = 0;
  std::uint64_t dominant = 0;
  std::uint64_t contextual = 0;
};

/// Per-frame budgets at each retention ratio under the multiple-of-7,
/// 6:1 dominant/contextual rule.
std::vector<RetentionRow> retention_table(std::uint64_t tokens_per_frame,
                                          std::span<const double> ratios);

/// floor(ratio * total_tokens), never rounding up.
std::uint64_t budget_from_retention(double ratio, std::uint64_t total_tokens);

}  // namespace dytok
