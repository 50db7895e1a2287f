#include "dytok/error.hpp"

namespace dytok {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid-argument";
    case ErrorCode::kDataCorruption:
      return "data-corruption";
    case ErrorCode::kInfeasibleBudget:
      return "infeasible-budget";
    case ErrorCode::kInfeasibleAlignment:
      return "infeasible-alignment";
    case ErrorCode::kFormat:
      return "format";
  }
  return "unknown";
}

}  // namespace dytok
