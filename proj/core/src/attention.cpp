#include "dytok/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dytok/error.hpp"

namespace dytok {

std::string_view to_string(QueryMode mode) noexcept {
  return mode == QueryMode::kLastToken ? "last_token" : "all_query_tokens";
}

std::string_view to_string(Estimator estimator) noexcept {
  switch (estimator) {
    case Estimator::kCrossAttention:
      return "cross_attention";
    case Estimator::kAttentionEntropy:
      return "attention_entropy";
    case Estimator::kFeatureEntropy:
      return "feature_entropy";
    case Estimator::kFeatureMagnitude:
      return "feature_magnitude";
  }
  return "unknown";
}

QueryMode parse_query_mode(std::string_view text) {
  if (text == "last_token") return QueryMode::kLastToken;
  if (text == "all_query_tokens") return QueryMode::kAllQueryTokens;
  fail(ErrorCode::kInvalidArgument, "unknown query mode '" + std::string(text) + "'");
}

Estimator parse_estimator(std::string_view text) {
  for (auto e : {Estimator::kCrossAttention, Estimator::kAttentionEntropy,
                 Estimator::kFeatureEntropy, Estimator::kFeatureMagnitude}) {
    if (text == to_string(e)) return e;
  }
  fail(ErrorCode::kInvalidArgument, "unknown estimator '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// AttentionDump

AttentionDump::AttentionDump(std::uint32_t num_layers, std::uint32_t num_heads,
                             std::uint32_t num_query_tokens, QueryMode query_mode,
                             std::vector<std::uint32_t> tokens_per_frame,
                             std::vector<double> logits)
    : num_layers_(num_layers),
      num_heads_(num_heads),
      num_query_tokens_(num_query_tokens),
      query_mode_(query_mode),
      tokens_per_frame_(std::move(tokens_per_frame)),
      logits_(std::move(logits)) {
  require(num_layers_ >= 1, "attention dump needs at least one layer");
  require(num_heads_ >= 1, "attention dump needs at least one head");
  require(num_query_tokens_ >= 1, "attention dump needs at least one query token");
  require(query_mode_ == QueryMode::kAllQueryTokens || num_query_tokens_ == 1,
          "last_token mode requires exactly one query token");
  require(!tokens_per_frame_.empty(), "attention dump needs at least one frame");
  frame_offsets_.reserve(tokens_per_frame_.size() + 1);
  frame_offsets_.push_back(0);
  for (auto n : tokens_per_frame_) {
    require(n >= 1, "every frame needs at least one visual token");
    num_visual_ += n;
    frame_offsets_.push_back(num_visual_);
  }
  const std::size_t expected = std::size_t{num_layers_} * num_heads_ *
                               num_query_tokens_ * num_visual_;
  require(logits_.size() == expected,
          "logit count " + std::to_string(logits_.size()) + " does not match " +
              "L*H*Q*V = " + std::to_string(expected));
}

std::size_t AttentionDump::row_offset(std::uint32_t layer, std::uint32_t head,
                                      std::uint32_t query) const {
  require(layer < num_layers_ && head < num_heads_ && query < num_query_tokens_,
          "attention row index out of range");
  return ((std::size_t{layer} * num_heads_ + head) * num_query_tokens_ + query) *
         num_visual_;
}

std::span<const double> AttentionDump::row(std::uint32_t layer, std::uint32_t head,
                                           std::uint32_t query) const {
  return std::span<const double>(logits_).subspan(row_offset(layer, head, query),
                                                  num_visual_);
}

std::span<double> AttentionDump::mutable_row(std::uint32_t layer, std::uint32_t head,
                                             std::uint32_t query) {
  return std::span<double>(logits_).subspan(row_offset(layer, head, query),
                                            num_visual_);
}

void AttentionDump::validate() const {
  require(num_layers_ >= 1 && num_heads_ >= 1 && num_query_tokens_ >= 1,
          "attention dump has an empty dimension");
  require(!tokens_per_frame_.empty(), "attention dump has no frames");
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    if (!std::isfinite(logits_[i])) {
      fail(ErrorCode::kDataCorruption,
           "non-finite logit at flat index " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// LayerSet

LayerSet::LayerSet(std::vector<std::uint32_t> indices, std::uint32_t total_layers)
    : indices_(std::move(indices)) {
  require(!indices_.empty(), "layer set must not be empty");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    require(indices_[i] < total_layers,
            "layer index " + std::to_string(indices_[i]) + " out of range");
    require(i == 0 || indices_[i - 1] < indices_[i],
            "layer indices must be strictly increasing");
  }
}

LayerSet LayerSet::all(std::uint32_t total_layers) {
  std::vector<std::uint32_t> idx(total_layers);
  std::iota(idx.begin(), idx.end(), 0u);
  return LayerSet(std::move(idx), total_layers);
}

LayerSet select_deep_layers(std::uint32_t total_layers, double fraction) {
  require(total_layers >= 1, "total_layers must be >= 1");
  require(fraction > 0.0 && fraction <= 1.0, "layer fraction must lie in (0, 1]");
  // Guard against 1/3 * 24 evaluating to 8.000000000000002.
  auto count = static_cast<std::uint32_t>(
      std::ceil(fraction * static_cast<double>(total_layers) - 1e-9));
  count = std::clamp<std::uint32_t>(count, 1, total_layers);
  std::vector<std::uint32_t> idx(count);
  std::iota(idx.begin(), idx.end(), total_layers - count);
  return LayerSet(std::move(idx), total_layers);
}

// ---------------------------------------------------------------------------
// Estimators

namespace {

void softmax_accumulate(std::span<const double> logits, std::span<double> acc) {
  double max_logit = -INFINITY;
  for (double v : logits) {
    if (!std::isfinite(v)) fail(ErrorCode::kDataCorruption, "non-finite logit in dump");
    max_logit = std::max(max_logit, v);
  }
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - max_logit);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    acc[i] += std::exp(logits[i] - max_logit) / denom;
  }
}

double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace

std::vector<double> normalize_scores(std::span<const double> scores) {
  require(!scores.empty(), "cannot normalize an empty score vector");
  double sum = 0.0;
  for (double s : scores) {
    require(std::isfinite(s) && s >= 0.0, "frame scores must be finite and non-negative");
    sum += s;
  }
  std::vector<double> out(scores.size());
  if (sum == 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(scores.size()));
    return out;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] / sum;
  return out;
}

std::vector<double> token_attention(const AttentionDump& dump, const LayerSet& layers,
                                    const ImportanceOptions& options) {
  for (auto l : layers.indices()) {
    require(l < dump.num_layers(), "layer " + std::to_string(l) +
                                       " is not present in the dump");
  }
  const QueryMode mode = options.query_mode.value_or(dump.query_mode());
  const std::uint32_t q_begin =
      mode == QueryMode::kLastToken ? dump.num_query_tokens() - 1 : 0;
  const std::uint32_t q_end = dump.num_query_tokens();

  std::vector<double> acc(dump.num_visual_tokens(), 0.0);
  for (auto l : layers.indices()) {
    for (std::uint32_t h = 0; h < dump.num_heads(); ++h) {
      for (std::uint32_t q = q_begin; q < q_end; ++q) {
        softmax_accumulate(dump.row(l, h, q), acc);
      }
    }
  }
  // Equal row counts per layer/head make the flat mean equal to the nested
  // head -> query -> layer means.
  const double rows = static_cast<double>(layers.size()) * dump.num_heads() *
                      static_cast<double>(q_end - q_begin);
  for (double& v : acc) v /= rows;
  return acc;
}

std::vector<std::vector<double>> layer_frame_attention(const AttentionDump& dump) {
  std::vector<std::vector<double>> out;
  out.reserve(dump.num_layers());
  const auto& offsets = dump.frame_offsets();
  for (std::uint32_t l = 0; l < dump.num_layers(); ++l) {
    auto tok = token_attention(dump, LayerSet({l}, dump.num_layers()));
    std::vector<double> per_frame(dump.num_frames());
    for (std::size_t f = 0; f < per_frame.size(); ++f) {
      double s = 0.0;
      for (auto i = offsets[f]; i < offsets[f + 1]; ++i) s += tok[i];
      per_frame[f] = s / static_cast<double>(offsets[f + 1] - offsets[f]);
    }
    out.push_back(std::move(per_frame));
  }
  return out;
}

FrameImportance compute_frame_importance(const AttentionDump& dump,
                                         const LayerSet& layers,
                                         const ImportanceOptions& options) {
  const auto tok = token_attention(dump, layers, options);
  const auto& offsets = dump.frame_offsets();
  std::vector<double> per_frame(dump.num_frames());
  for (std::size_t f = 0; f < per_frame.size(); ++f) {
    double s = 0.0;
    for (auto i = offsets[f]; i < offsets[f + 1]; ++i) s += tok[i];
    per_frame[f] = s / static_cast<double>(offsets[f + 1] - offsets[f]);
  }
  return {normalize_scores(per_frame), Estimator::kCrossAttention, layers};
}

FrameImportance attention_entropy_importance(const AttentionDump& dump,
                                             const LayerSet& layers,
                                             const ImportanceOptions& options) {
  const auto tok = token_attention(dump, layers, options);
  const auto& offsets = dump.frame_offsets();
  std::vector<double> entropy(dump.num_frames());
  std::vector<double> local;
  for (std::size_t f = 0; f < entropy.size(); ++f) {
    local.assign(tok.begin() + static_cast<std::ptrdiff_t>(offsets[f]),
                 tok.begin() + static_cast<std::ptrdiff_t>(offsets[f + 1]));
    const double mass = std::accumulate(local.begin(), local.end(), 0.0);
    if (mass <= 0.0) {
      entropy[f] = 0.0;
      continue;
    }
    for (double& v : local) v /= mass;
    entropy[f] = shannon_entropy(local);
  }
  return {normalize_scores(entropy), Estimator::kAttentionEntropy, layers};
}

FrameImportance feature_entropy_importance(std::span<const FrameTokens> frames) {
  require(!frames.empty(), "feature entropy needs at least one frame");
  std::vector<double> scores(frames.size());
  std::vector<double> dist;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    fr.validate();
    require(fr.has_features(), "frame " + std::to_string(f) + " has no features");
    require(fr.token_count >= 1 && fr.feature_dim >= 1,
            "frame " + std::to_string(f) + " has no tokens");
    double total = 0.0;
    std::span<const double> feats(*fr.features);
    for (std::size_t t = 0; t < fr.token_count; ++t) {
      auto x = feats.subspan(t * fr.feature_dim, fr.feature_dim);
      dist.assign(fr.feature_dim, 0.0);
      softmax_accumulate(x, dist);
      total += shannon_entropy(dist);
    }
    scores[f] = total / static_cast<double>(fr.token_count);
  }
  return {normalize_scores(scores), Estimator::kFeatureEntropy, std::nullopt};
}

FrameImportance feature_magnitude_importance(std::span<const FrameTokens> frames) {
  require(!frames.empty(), "feature magnitude needs at least one frame");
  std::vector<double> scores(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    fr.validate();
    require(fr.has_features(), "frame " + std::to_string(f) + " has no features");
    require(fr.token_count >= 1, "frame " + std::to_string(f) + " has no tokens");
    std::span<const double> feats(*fr.features);
    double total = 0.0;
    for (std::size_t t = 0; t < fr.token_count; ++t) {
      double sq = 0.0;
      for (double v : feats.subspan(t * fr.feature_dim, fr.feature_dim)) {
        require(std::isfinite(v), "non-finite feature value");
        sq += v * v;
      }
      total += std::sqrt(sq);
    }
    scores[f] = total / static_cast<double>(fr.token_count);
  }
  return {normalize_scores(scores), Estimator::kFeatureMagnitude, std::nullopt};
}

// ---------------------------------------------------------------------------
// Temporal outliers

std::set<std::size_t> detect_temporal_outliers(const FrameImportance& imp,
                                               double z_threshold) {
  const auto& w = imp.weights;
  std::set<std::size_t> out;
  if (w.size() < 3) return out;
  const double n = static_cast<double>(w.size());
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / n;
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd == 0.0) return out;
  for (std::size_t f = 0; f < w.size(); ++f) {
    if (w[f] > mean + z_threshold * sd) out.insert(f);
  }
  for (std::size_t f : {std::size_t{0}, w.size() - 1}) {
    if (w[f] > mean + kBoundaryOutlierZ * sd) out.insert(f);
  }
  return out;
}

FrameImportance smooth_outliers(const FrameImportance& imp,
                                const std::set<std::size_t>& outliers) {
  const auto& w = imp.weights;
  for (auto f : outliers) {
    require(f < w.size(), "outlier frame " + std::to_string(f) + " out of range");
  }
  if (outliers.empty() || outliers.size() == w.size()) return imp;

  double ceiling = 0.0;
  for (std::size_t f = 0; f < w.size(); ++f) {
    if (!outliers.contains(f)) ceiling = std::max(ceiling, w[f]);
  }
  std::vector<double> clamped = w;
  for (auto f : outliers) clamped[f] = std::min(clamped[f], ceiling);

  FrameImportance out = imp;
  out.weights = normalize_scores(clamped);
  return out;
}

}  // namespace dytok
