#include "dytok/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dytok/error.hpp"

namespace dytok {

namespace {

constexpr double kWeightSumTolerance = 1e-9;
// Products like 0.7 * 10 land a few ulps below the integer they represent.
constexpr double kFloorSnap = 1e-9;

}  // namespace

std::string_view to_string(RedistributionReason reason) noexcept {
  return reason == RedistributionReason::kRemainderTopup ? "remainder_topup"
                                                         : "cap_overflow";
}

std::vector<std::uint64_t> BudgetRequest::effective_caps() const {
  std::vector<std::uint64_t> caps(weights.size(), per_frame_cap);
  if (frame_capacities) {
    require(frame_capacities->size() == weights.size(),
            "frame_capacities length must match the number of frames");
    for (std::size_t f = 0; f < caps.size(); ++f) {
      caps[f] = std::min(caps[f], (*frame_capacities)[f]);
    }
  }
  return caps;
}

std::uint64_t AllocationPlan::total() const noexcept {
  return std::accumulate(allocations.begin(), allocations.end(), std::uint64_t{0});
}

std::uint64_t default_per_frame_cap(std::uint64_t tokens_per_frame) {
  return std::max<std::uint64_t>(1, tokens_per_frame / 2);
}

AllocationPlan allocate(const BudgetRequest& req) {
  const std::size_t num_frames = req.weights.size();
  require(num_frames >= 1, "allocation needs at least one frame");
  require(req.per_frame_cap >= 1, "per-frame cap must be >= 1");
  double weight_sum = 0.0;
  for (double w : req.weights) {
    require(std::isfinite(w) && w >= 0.0, "frame weights must be finite and non-negative");
    weight_sum += w;
  }
  require(std::abs(weight_sum - 1.0) <= kWeightSumTolerance,
          "frame weights must sum to 1 (got " + std::to_string(weight_sum) + ")");

  const auto caps = req.effective_caps();
  const std::uint64_t cap_sum =
      std::accumulate(caps.begin(), caps.end(), std::uint64_t{0});
  if (req.total_budget > cap_sum) {
    fail(ErrorCode::kInfeasibleBudget,
         "total budget " + std::to_string(req.total_budget) +
             " exceeds the sum of per-frame caps " + std::to_string(cap_sum));
  }

  AllocationPlan plan;
  plan.weights = req.weights;
  plan.floors.resize(num_frames);
  plan.remainders.resize(num_frames);
  const double total = static_cast<double>(req.total_budget);
  std::uint64_t floor_sum = 0;
  for (std::size_t f = 0; f < num_frames; ++f) {
    const double share = req.weights[f] * total;
    const double fl = std::floor(share + kFloorSnap);
    plan.floors[f] = static_cast<std::uint64_t>(fl);
    plan.remainders[f] = std::max(0.0, share - fl);
    floor_sum += plan.floors[f];
  }
  require(floor_sum <= req.total_budget,
          "weight rounding pushed the floor sum above the budget");
  plan.allocations = plan.floors;
  auto& alloc = plan.allocations;

  // Remainders are ranked on a 1e-9 grid so that float noise cannot break
  // ties that are exact in rational arithmetic.
  std::vector<std::int64_t> rank_key(num_frames);
  for (std::size_t f = 0; f < num_frames; ++f) {
    rank_key[f] = std::llround(plan.remainders[f] / kRemainderTieTolerance);
  }
  std::vector<std::size_t> order(num_frames);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rank_key[a] > rank_key[b];
  });

  std::uint64_t remaining = req.total_budget - floor_sum;
  while (remaining > 0) {
    bool granted = false;
    for (std::size_t f : order) {
      if (alloc[f] < caps[f]) {
        ++alloc[f];
        --remaining;
        granted = true;
        plan.redistribution_log.push_back({f, 1, RedistributionReason::kRemainderTopup});
        if (remaining == 0) break;
      }
    }
    if (!granted) {
      fail(ErrorCode::kInfeasibleBudget, "every frame reached its cap with tokens left");
    }
  }

  std::uint64_t excess = 0;
  for (std::size_t f = 0; f < num_frames; ++f) {
    if (alloc[f] > caps[f]) {
      const std::uint64_t over = alloc[f] - caps[f];
      excess += over;
      alloc[f] = caps[f];
      plan.redistribution_log.push_back(
          {f, -static_cast<std::int64_t>(over), RedistributionReason::kCapOverflow});
    }
  }

  // Importance ranking for overflow re-grants: weight descending, index ascending.
  std::vector<std::size_t> by_weight(num_frames);
  std::iota(by_weight.begin(), by_weight.end(), std::size_t{0});
  std::stable_sort(by_weight.begin(), by_weight.end(), [&](std::size_t a, std::size_t b) {
    return req.weights[a] > req.weights[b];
  });
  // Frames only gain tokens here, so a frame at its cap stays there and the
  // search can resume where it left off.
  auto it = by_weight.begin();
  while (excess > 0) {
    it = std::find_if(it, by_weight.end(), [&](std::size_t f) { return alloc[f] < caps[f]; });
    if (it == by_weight.end()) {
      fail(ErrorCode::kInfeasibleBudget, "no frame below its cap to absorb overflow");
    }
    ++alloc[*it];
    --excess;
    plan.redistribution_log.push_back({*it, 1, RedistributionReason::kCapOverflow});
  }
  return plan;
}

}  // namespace dytok
