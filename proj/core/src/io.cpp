#include "dytok/io.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <system_error>

#include "dytok/error.hpp"

namespace dytok {

namespace {

std::ostringstream csv_stream() {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  return os;
}

template <typename Fn>
auto with_format_errors(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kFormat, std::string(what) + ": " + e.what());
  }
}

template <typename T>
std::optional<T> opt(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kInvalidArgument, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::kInvalidArgument, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::kInvalidArgument, "cannot rename into " + path.string());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kInvalidArgument, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json parse_json(std::string_view text, std::string_view what) {
  return with_format_errors(what, [&] { return Json::parse(text); });
}

// ---------------------------------------------------------------------------

Json to_json(const FrameImportance& imp) {
  Json j;
  j["weights"] = imp.weights;
  j["estimator"] = std::string(to_string(imp.estimator));
  j["layers"] = imp.layer_set ? Json(imp.layer_set->indices()) : Json::array();
  return j;
}

FrameImportance importance_from_json(const Json& j) {
  return with_format_errors("importance JSON", [&] {
    FrameImportance imp;
    imp.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("estimator")) {
      imp.estimator = parse_estimator(j.at("estimator").get<std::string>());
    }
    if (j.contains("layers") && !j.at("layers").empty()) {
      auto idx = j.at("layers").get<std::vector<std::uint32_t>>();
      const auto total = idx.back() + 1;
      imp.layer_set.emplace(std::move(idx), total);
    }
    return imp;
  });
}

Json to_json(const AllocationPlan& plan) {
  Json log = Json::array();
  for (const auto& e : plan.redistribution_log) {
    log.push_back({{"frame", e.frame},
                   {"delta", e.delta},
                   {"reason", std::string(to_string(e.reason))}});
  }
  return {{"weights", plan.weights},       {"allocations", plan.allocations},
          {"floors", plan.floors},         {"remainders", plan.remainders},
          {"total", plan.total()},         {"redistribution_log", log}};
}

AllocationPlan plan_from_json(const Json& j) {
  return with_format_errors("plan JSON", [&] {
    AllocationPlan plan;
    plan.allocations = j.at("allocations").get<std::vector<std::uint64_t>>();
    plan.weights = j.value("weights", std::vector<double>{});
    plan.floors = j.value("floors", std::vector<std::uint64_t>{});
    plan.remainders = j.value("remainders", std::vector<double>{});
    if (j.contains("redistribution_log")) {
      for (const auto& e : j.at("redistribution_log")) {
        const auto reason = e.at("reason").get<std::string>();
        plan.redistribution_log.push_back(
            {e.at("frame").get<std::size_t>(), e.at("delta").get<std::int64_t>(),
             reason == "cap_overflow" ? RedistributionReason::kCapOverflow
                                      : RedistributionReason::kRemainderTopup});
      }
    }
    return plan;
  });
}

std::string plan_to_csv(const AllocationPlan& plan) {
  auto os = csv_stream();
  os << "frame,weight,floor,remainder,allocation\n";
  for (std::size_t f = 0; f < plan.allocations.size(); ++f) {
    os << f << ',' << (f < plan.weights.size() ? plan.weights[f] : 0.0) << ','
       << (f < plan.floors.size() ? plan.floors[f] : 0) << ','
       << (f < plan.remainders.size() ? plan.remainders[f] : 0.0) << ','
       << plan.allocations[f] << '\n';
  }
  return os.str();
}

Json to_json(std::span<const CompressedFrame> frames) {
  Json arr = Json::array();
  std::size_t total = 0;
  for (const auto& cf : frames) {
    Json j{{"frame", cf.frame_index}, {"kept_indices", cf.kept_indices}};
    if (cf.kind_labels) {
      Json labels = Json::array();
      for (auto k : *cf.kind_labels) labels.push_back(std::string(to_string(k)));
      j["kind_labels"] = labels;
    }
    total += cf.kept_indices.size();
    arr.push_back(std::move(j));
  }
  return {{"frames", arr}, {"total_kept", total}};
}

std::string retention_table_csv(std::span<const RetentionRow> rows) {
  auto os = csv_stream();
  os << "Dominant,Contextual,Retention Ratio,Numerical Sum,Approximate Sum\n";
  for (const auto& r : rows) {
    std::ostringstream pct;
    pct << r.ratio * 100.0 << '%';
    std::ostringstream sum;
    sum.precision(10);
    sum << r.numerical_sum;
    os << r.dominant << ',' << r.contextual << ',' << pct.str() << ',' << sum.str()
       << ',' << r.effective_budget << '\n';
  }
  return os.str();
}

std::vector<FrameTokens> frame_tokens_from_json(const Json& j) {
  return with_format_errors("frame tokens JSON", [&] {
    std::vector<FrameTokens> frames;
    for (const auto& jf : j.at("frames")) {
      FrameTokens ft;
      ft.frame_index = jf.value("frame_index", frames.size());
      if (jf.contains("features")) {
        const auto rows = jf.at("features").get<std::vector<std::vector<double>>>();
        ft.token_count = rows.size();
        ft.feature_dim = rows.empty() ? 0 : rows.front().size();
        std::vector<double> flat;
        flat.reserve(ft.token_count * ft.feature_dim);
        for (const auto& r : rows) {
          require(r.size() == ft.feature_dim, "ragged feature rows");
          flat.insert(flat.end(), r.begin(), r.end());
        }
        ft.features = std::move(flat);
      }
      if (jf.contains("token_scores")) {
        ft.token_scores = jf.at("token_scores").get<std::vector<double>>();
        if (!ft.features) ft.token_count = ft.token_scores->size();
      }
      if (jf.contains("token_count")) ft.token_count = jf.at("token_count").get<std::size_t>();
      ft.validate();
      frames.push_back(std::move(ft));
    }
    return frames;
  });
}

SynthSpec synth_spec_from_json(const Json& j) {
  return with_format_errors("synthetic spec JSON", [&] {
    SynthSpec s;
    s.num_frames = j.value("num_frames", s.num_frames);
    s.tokens_per_frame = j.value("tokens_per_frame", s.tokens_per_frame);
    s.num_layers = j.value("num_layers", s.num_layers);
    s.num_heads = j.value("num_heads", s.num_heads);
    s.num_query_tokens = j.value("num_query_tokens", s.num_query_tokens);
    s.keyframes = j.value("keyframes", std::set<std::size_t>{});
    s.keyframe_boost = j.value("keyframe_boost", s.keyframe_boost);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    s.allow_overlap = j.value("allow_overlap", s.allow_overlap);
    if (j.contains("outliers") && !j.at("outliers").is_null()) {
      const auto& jo = j.at("outliers");
      OutlierSpec o;
      o.positions = jo.at("positions").get<std::set<std::size_t>>();
      o.boost = jo.at("boost").get<double>();
      const auto range = jo.at("layer_range").get<std::vector<std::uint32_t>>();
      require(range.size() == 2, "outliers.layer_range must be [lo, hi]");
      o.layer_lo = range[0];
      o.layer_hi = range[1];
      s.outliers = std::move(o);
    }
    s.validate();
    return s;
  });
}

Json to_json(const SynthSpec& s) {
  Json j{{"num_frames", s.num_frames},
         {"tokens_per_frame", s.tokens_per_frame},
         {"num_layers", s.num_layers},
         {"num_heads", s.num_heads},
         {"num_query_tokens", s.num_query_tokens},
         {"keyframes", s.keyframes},
         {"keyframe_boost", s.keyframe_boost},
         {"noise_sigma", s.noise_sigma},
         {"seed", s.seed},
         {"allow_overlap", s.allow_overlap}};
  if (s.outliers) {
    j["outliers"] = {{"positions", s.outliers->positions},
                     {"boost", s.outliers->boost},
                     {"layer_range", {s.outliers->layer_lo, s.outliers->layer_hi}}};
  }
  return j;
}

PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig base) {
  return with_format_errors("pipeline config JSON", [&] {
    PipelineConfig c = std::move(base);
    if (auto v = opt<std::string>(j, "estimator")) c.estimator = parse_estimator(*v);
    if (auto v = opt<double>(j, "layer_fraction")) c.layer_fraction = *v;
    if (auto v = opt<std::string>(j, "query_mode")) c.query_mode = parse_query_mode(*v);
    if (j.contains("smoothing")) {
      const auto& js = j.at("smoothing");
      c.smoothing.enabled = js.value("enabled", c.smoothing.enabled);
      c.smoothing.z_threshold = js.value("z_threshold", c.smoothing.z_threshold);
    }
    if (auto v = opt<std::uint64_t>(j, "total_budget")) {
      c.total_budget = *v;
      c.retention_ratio.reset();
    }
    if (auto v = opt<double>(j, "retention_ratio")) {
      c.retention_ratio = *v;
      c.total_budget.reset();
    }
    if (auto v = opt<std::uint64_t>(j, "per_frame_cap")) c.per_frame_cap = *v;
    if (auto v = opt<std::string>(j, "strategy")) c.strategy = parse_strategy(*v);
    if (auto v = opt<std::vector<std::size_t>>(j, "recall_ks")) c.recall_ks = *v;
    if (auto v = opt<std::string>(j, "output")) c.output_path = *v;
    if (auto v = opt<std::string>(j, "csv")) c.csv_path = *v;
    if (j.contains("total_budget") && j.contains("retention_ratio") &&
        !j.at("total_budget").is_null() && !j.at("retention_ratio").is_null()) {
      fail(ErrorCode::kInvalidArgument,
           "config sets both total_budget and retention_ratio");
    }
    return c;
  });
}

Json to_json(const HarnessReport& r) {
  Json recall = Json::object();
  for (auto [k, v] : r.recall_at_k) recall[std::to_string(k)] = v;
  return {{"recall_at_k", recall},
          {"allocation_concentration", r.allocation_concentration},
          {"outlier_suppression", r.outlier_suppression},
          {"importance", to_json(r.importance)},
          {"smoothed_importance", to_json(r.smoothed_importance)},
          {"detected_outliers", r.detected_outliers},
          {"kept_tokens", r.kept_tokens},
          {"plan", to_json(r.plan)}};
}

std::string report_frames_csv(const HarnessReport& r, const GroundTruth& truth) {
  auto os = csv_stream();
  os << "frame,weight,smoothed_weight,allocation,keyframe,outlier\n";
  for (std::size_t f = 0; f < r.plan.allocations.size(); ++f) {
    os << f << ',' << r.importance.weights[f] << ',' << r.smoothed_importance.weights[f]
       << ',' << r.plan.allocations[f] << ',' << (truth.keyframes.contains(f) ? 1 : 0)
       << ',' << (r.detected_outliers.contains(f) ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string heatmap_csv(const std::vector<std::vector<double>>& layer_frame) {
  auto os = csv_stream();
  os << "layer,frame,attention\n";
  for (std::size_t l = 0; l < layer_frame.size(); ++l) {
    for (std::size_t f = 0; f < layer_frame[l].size(); ++f) {
      os << l << ',' << f << ',' << layer_frame[l][f] << '\n';
    }
  }
  return os.str();
}

}  // namespace dytok
