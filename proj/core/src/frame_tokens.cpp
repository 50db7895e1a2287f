#include "dytok/frame_tokens.hpp"

#include <string>

#include "dytok/error.hpp"

namespace dytok {

void FrameTokens::validate() const {
  if (features) {
    require(features->size() == token_count * feature_dim,
            "frame " + std::to_string(frame_index) +
                ": feature array size does not match token_count * feature_dim");
  }
  if (token_scores) {
    require(token_scores->size() == token_count,
            "frame " + std::to_string(frame_index) +
                ": token_scores length does not match token_count");
  }
}

}  // namespace dytok
