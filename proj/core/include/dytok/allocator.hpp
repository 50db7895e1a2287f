#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace dytok {

/// Per-frame token budgets from importance weights under a global budget and
/// a per-frame ceiling.
struct BudgetRequest {
  std::vector<double> weights;  // sums to 1
  std::uint64_t total_budget = 0;
  std::uint64_t per_frame_cap = 1;
  std::optional<std::vector<std::uint64_t>> frame_capacities;

  /// min(per_frame_cap, capacity_f) for each frame.
  std::vector<std::uint64_t> effective_caps() const;
};

enum class RedistributionReason { kRemainderTopup, kCapOverflow };

std::string_view to_string(RedistributionReason reason) noexcept;

struct RedistributionEvent {
  std::size_t frame = 0;
  std::int64_t delta = 0;
  RedistributionReason reason = RedistributionReason::kRemainderTopup;

  friend bool operator==(const RedistributionEvent&,
                         const RedistributionEvent&) = default;
};

struct AllocationPlan {
  std::vector<double> weights;
  std::vector<std::uint64_t> allocations;
  std::vector<std::uint64_t> floors;
  std::vector<double> remainders;
  std::vector<RedistributionEvent> redistribution_log;

  std::uint64_t total() const noexcept;

  friend bool operator==(const AllocationPlan&, const AllocationPlan&) = default;
};

// Resolution at which fractional remainders are compared; equal remainders at
// this resolution are ties, won by the lower frame index.
inline constexpr double kRemainderTieTolerance = 1e-9;

/// Largest-remainder apportionment followed by a per-frame cap pass.
///
/// 1. floors a_f = floor(w_f * T); T_rem = T - sum(a_f).
/// 2. Frames ranked by descending remainder (ties: lower index) each receive
///    one token per pass, skipping frames at their cap, until T_rem = 0.
/// 3. Floors above a cap are truncated and the excess is handed out one token
///    at a time to the highest-weight frame still below its cap.
///
/// Throws infeasible-budget when T exceeds the sum of caps and
/// invalid-argument for negative, non-finite or non-normalized weights.
AllocationPlan allocate(const BudgetRequest& req);

/// Default per-frame ceiling: half of a frame's visual tokens (98 for 196).
std::uint64_t default_per_frame_cap(std::uint64_t tokens_per_frame);

}  // namespace dytok
