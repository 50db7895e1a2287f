#include "commands.hpp"

#include <cstdlib>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "dytok/atnd.hpp"
#include "dytok/budget_math.hpp"
#include "dytok/error.hpp"
#include "dytok/io.hpp"
#include "dytok/pipeline.hpp"
#include "dytok/synth.hpp"

namespace dytok::cli {

namespace {

// Flag values layered over an optional JSON config file.
struct PipelineFlags {
  std::string config_path;
  std::optional<std::string> estimator;
  std::optional<double> layer_fraction;
  std::optional<std::string> query_mode;
  bool smooth = false;
  std::optional<double> z_threshold;
  std::optional<std::uint64_t> budget;
  std::optional<double> ratio;
  std::optional<std::uint64_t> cap;
  std::optional<std::string> strategy;
  std::optional<std::string> output;
  std::optional<std::string> csv;

  void add_to(CLI::App* cmd, bool budget_flags, bool estimator_flags) {
    cmd->add_option("--config", config_path, "JSON pipeline config");
    if (estimator_flags) {
      cmd->add_option("--estimator", estimator,
                      "cross_attention | attention_entropy | feature_entropy | "
                      "feature_magnitude");
      cmd->add_option("--layer-fraction", layer_fraction,
                      "fraction of deepest layers to average (default 1/3)");
      cmd->add_option("--query-mode", query_mode, "last_token | all_query_tokens");
      cmd->add_flag("--smooth", smooth, "clamp temporal attention outliers");
      cmd->add_option("--z", z_threshold, "outlier z threshold (default 3)");
    }
    if (budget_flags) {
      auto* b = cmd->add_option("--budget", budget, "total token budget");
      auto* r = cmd->add_option("--ratio", ratio, "retention ratio in (0, 1]");
      b->excludes(r);
      cmd->add_option("--cap", cap, "per-frame token cap (default: half a frame)");
    }
    cmd->add_option("-o,--output", output, "output path (default: stdout)");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_path.empty()) {
      c = pipeline_config_from_json(parse_json(read_text_file(config_path), config_path));
    }
    if (estimator) c.estimator = parse_estimator(*estimator);
    if (layer_fraction) c.layer_fraction = *layer_fraction;
    if (query_mode) c.query_mode = parse_query_mode(*query_mode);
    if (smooth) c.smoothing.enabled = true;
    if (z_threshold) c.smoothing.z_threshold = *z_threshold;
    if (budget) {
      c.total_budget = *budget;
      c.retention_ratio.reset();
    }
    if (ratio) {
      c.retention_ratio = *ratio;
      c.total_budget.reset();
    }
    if (cap) c.per_frame_cap = *cap;
    if (strategy) c.strategy = parse_strategy(*strategy);
    if (output) c.output_path = *output;
    if (csv) c.csv_path = *csv;
    return c;
  }
};

void emit(const std::optional<std::string>& path, const std::string& text,
          std::ostream& out) {
  if (path && !path->empty()) {
    write_file_atomic(*path, text);
  } else {
    out << text;
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

SynthSpec load_spec(const std::string& path) {
  auto spec = synth_spec_from_json(parse_json(read_text_file(path), path));
  if (const char* env = std::getenv("DYTOK_SEED"); env && *env) {
    try {
      spec.seed = std::stoull(env);
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, std::string("DYTOK_SEED is not an integer: ") + env);
    }
  }
  return spec;
}

std::vector<FrameTokens> load_tokens(const std::string& path) {
  return frame_tokens_from_json(parse_json(read_text_file(path), path));
}

FrameImportance importance_for(const PipelineConfig& config,
                               const std::optional<std::string>& dump_path,
                               const std::optional<std::string>& tokens_path) {
  if (dump_path) {
    const auto dump = atnd::read_file(*dump_path);
    return apply_smoothing(estimate_importance(dump, config), config);
  }
  const auto frames = load_tokens(*tokens_path);
  return apply_smoothing(estimate_importance(frames, config), config);
}

int map_error(const Error& e, std::ostream& err) {
  err << "dytok: " << to_string(e.code()) << ": " << e.what() << "\n";
  switch (e.code()) {
    case ErrorCode::kFormat:
      return kFormatError;
    case ErrorCode::kDataCorruption:
      return kDataError;
    case ErrorCode::kInfeasibleBudget:
    case ErrorCode::kInfeasibleAlignment:
      return kInfeasible;
    case ErrorCode::kInvalidArgument:
      break;
  }
  return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dytok: attention-guided per-frame token budgeting for video LLMs"};
  app.name("dytok");
  app.require_subcommand(1);

  // importance ---------------------------------------------------------------
  PipelineFlags imp_flags;
  std::optional<std::string> imp_dump, imp_tokens;
  auto* imp = app.add_subcommand("importance", "per-frame importance weights");
  auto* imp_d = imp->add_option("--dump", imp_dump, "ATND attention dump");
  auto* imp_t = imp->add_option("--tokens", imp_tokens, "frame tokens JSON");
  imp_d->excludes(imp_t);
  imp_flags.add_to(imp, false, true);

  // allocate -----------------------------------------------------------------
  PipelineFlags alloc_flags;
  std::optional<std::string> alloc_weights, alloc_dump, alloc_tokens;
  std::optional<std::uint64_t> alloc_tpf;
  auto* alloc = app.add_subcommand("allocate", "per-frame token budgets");
  auto* aw = alloc->add_option("--weights", alloc_weights, "importance JSON");
  auto* ad = alloc->add_option("--dump", alloc_dump, "ATND attention dump");
  aw->excludes(ad);
  alloc->add_option("--tokens-per-frame", alloc_tpf,
                    "visual tokens per frame (required with --weights and --ratio)");
  alloc_flags.add_to(alloc, true, true);
  alloc->add_option("--csv", alloc_flags.csv, "also write the plan as CSV");

  // compress -----------------------------------------------------------------
  PipelineFlags comp_flags;
  std::string comp_plan;
  std::optional<std::string> comp_dump, comp_tokens;
  auto* comp = app.add_subcommand("compress", "apply a plan with a compression strategy");
  comp->add_option("--plan", comp_plan, "allocation plan JSON")->required();
  auto* cd = comp->add_option("--dump", comp_dump, "ATND dump (attention as scores)");
  auto* ct = comp->add_option("--tokens", comp_tokens, "frame tokens JSON");
  cd->excludes(ct);
  comp->add_option("--strategy", comp_flags.strategy,
                   "topk | dominant_contextual | uniform");
  comp_flags.add_to(comp, false, false);
  comp->add_option("--layer-fraction", comp_flags.layer_fraction,
                   "deep-layer fraction used for dump token scores");

  // align --------------------------------------------------------------------
  std::uint64_t al_layers = 0, al_k = 0, al_pre = 0;
  std::optional<double> al_avg;
  std::optional<std::uint64_t> al_post;
  std::optional<std::string> al_out;
  auto* align = app.add_subcommand("align", "budget alignment K*N + (L-K)*M = L*R");
  align->add_option("--layers,-L", al_layers, "decoder layers L")->required();
  align->add_option("--prune-layer,-K", al_k, "pruning layer K")->required();
  align->add_option("--pre,-N", al_pre, "tokens before pruning N")->required();
  auto* a_r = align->add_option("--avg,-R", al_avg, "target average tokens R");
  auto* a_m = align->add_option("--post,-M", al_post, "tokens after pruning M");
  a_r->excludes(a_m);
  align->add_option("-o,--output", al_out, "output path");

  // table --------------------------------------------------------------------
  std::uint64_t tb_tpf = 196;
  std::vector<double> tb_ratios{1.0, 0.75, 0.5, 0.25, 0.20, 0.15, 0.10};
  std::optional<std::string> tb_out;
  auto* table = app.add_subcommand("table", "dominant/contextual retention table (CSV)");
  table->add_option("--tokens-per-frame", tb_tpf, "visual tokens per frame");
  table->add_option("--ratios", tb_ratios, "retention ratios");
  table->add_option("-o,--output", tb_out, "output CSV path");

  // flops --------------------------------------------------------------------
  FlopsModel fm;
  std::uint64_t fl_tokens = 0;
  std::optional<std::uint64_t> fl_k, fl_after, fl_keep;
  bool fl_projector = false;
  auto* flops = app.add_subcommand("flops", "decoder FLOPs and reduction ratios");
  flops->add_option("--layers", fm.num_layers, "decoder layers")->required();
  flops->add_option("--hidden", fm.hidden_dim, "hidden size d")->required();
  flops->add_option("--ffn", fm.ffn_dim, "FFN size m")->required();
  flops->add_option("--tokens", fl_tokens, "sequence length n")->required();
  flops->add_option("--prune-layer", fl_k, "in-LLM pruning layer K");
  flops->add_option("--retained", fl_after, "tokens kept after layer K");
  flops->add_option("--encoder-keep", fl_keep, "tokens kept by encoder-side selection");
  flops->add_flag("--include-projector", fl_projector, "cost the projector as a layer");

  // generate -----------------------------------------------------------------
  std::string gen_spec, gen_out;
  auto* gen = app.add_subcommand("generate", "write a synthetic ATND dump");
  gen->add_option("--spec", gen_spec, "synthetic spec JSON")->required();
  gen->add_option("-o,--output", gen_out, "output ATND path")->required();

  // simulate -----------------------------------------------------------------
  PipelineFlags sim_flags;
  std::string sim_spec;
  std::optional<std::string> sim_frames_csv, sim_heatmap_csv, sim_dump_out;
  auto* sim = app.add_subcommand("simulate", "synthetic end-to-end keyframe recovery run");
  sim->add_option("--spec", sim_spec, "synthetic spec JSON")->required();
  sim_flags.add_to(sim, true, true);
  sim->add_option("--strategy", sim_flags.strategy, "compression strategy");
  sim->add_option("--frames-csv", sim_frames_csv, "per-frame weights/allocations CSV");
  sim->add_option("--heatmap-csv", sim_heatmap_csv, "layer x frame attention CSV");
  sim->add_option("--dump-out", sim_dump_out, "also write the generated ATND dump");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "dytok: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*imp) {
      if (!imp_dump && !imp_tokens) fail(ErrorCode::kInvalidArgument, "give --dump or --tokens");
      const auto config = imp_flags.resolve();
      const auto result = importance_for(config, imp_dump, imp_tokens);
      emit(config.output_path, dump_json(to_json(result)), out);
    } else if (*alloc) {
      const auto config = alloc_flags.resolve();
      FrameImportance importance;
      std::vector<std::uint32_t> tpf;
      if (alloc_weights) {
        importance = importance_from_json(parse_json(read_text_file(*alloc_weights),
                                                     *alloc_weights));
        if (alloc_tpf) {
          tpf.assign(importance.weights.size(), static_cast<std::uint32_t>(*alloc_tpf));
        }
      } else if (alloc_dump) {
        const auto dump = atnd::read_file(*alloc_dump);
        importance = apply_smoothing(estimate_importance(dump, config), config);
        tpf = dump.tokens_per_frame();
      } else {
        fail(ErrorCode::kInvalidArgument, "give --weights or --dump");
      }
      BudgetRequest req;
      if (!tpf.empty()) {
        req = make_budget_request(importance, tpf, config);
      } else {
        config.validate();
        if (!config.total_budget) {
          fail(ErrorCode::kInvalidArgument,
               "--ratio with --weights needs --tokens-per-frame");
        }
        req.weights = importance.weights;
        req.total_budget = *config.total_budget;
        req.per_frame_cap = config.per_frame_cap.value_or(req.total_budget > 0
                                                              ? req.total_budget
                                                              : 1);
      }
      const auto plan = allocate(req);
      auto j = to_json(plan);
      j["total_budget"] = req.total_budget;
      j["per_frame_cap"] = req.per_frame_cap;
      emit(config.output_path, dump_json(j), out);
      if (config.csv_path) write_file_atomic(*config.csv_path, plan_to_csv(plan));
    } else if (*comp) {
      const auto config = comp_flags.resolve();
      const auto plan = plan_from_json(parse_json(read_text_file(comp_plan), comp_plan));
      std::vector<FrameTokens> frames;
      if (comp_dump) {
        frames = frames_from_dump(atnd::read_file(*comp_dump), config);
      } else if (comp_tokens) {
        frames = load_tokens(*comp_tokens);
      } else {
        fail(ErrorCode::kInvalidArgument, "give --dump or --tokens");
      }
      const auto result = compress_video(frames, plan, config.strategy);
      auto j = to_json(std::span<const CompressedFrame>(result));
      j["strategy"] = std::string(to_string(config.strategy));
      emit(config.output_path, dump_json(j), out);
    } else if (*align) {
      Json j{{"L", al_layers}, {"K", al_k}, {"N", al_pre}};
      if (al_post) {
        j["M"] = *al_post;
        j["R"] = aligned_avg_tokens(al_layers, al_k, al_pre, *al_post);
      } else if (al_avg) {
        const auto sol = solve_post_tokens(al_layers, al_k, al_pre, *al_avg);
        j["R"] = *al_avg;
        j["M"] = sol.post_tokens;
        j["residual"] = sol.residual;
      } else {
        fail(ErrorCode::kInvalidArgument, "give --avg or --post");
      }
      emit(al_out, dump_json(j), out);
    } else if (*table) {
      const auto rows = retention_table(tb_tpf, tb_ratios);
      emit(tb_out, retention_table_csv(rows), out);
    } else if (*flops) {
      Json j{{"total_flops", total_flops(fm, fl_tokens)},
             {"layer_flops", layer_flops(fm, fl_tokens)}};
      if (fl_k || fl_after) {
        if (!fl_k || !fl_after) {
          fail(ErrorCode::kInvalidArgument, "--prune-layer and --retained go together");
        }
        j["llm_prune_reduction"] =
            llm_prune_reduction(fm, *fl_k, fl_tokens, *fl_after, fm.num_layers);
      }
      if (fl_keep) {
        j["encoder_select_reduction"] =
            encoder_select_reduction(fm, fl_tokens, *fl_keep, fl_projector);
      }
      out << dump_json(j);
    } else if (*gen) {
      atnd::write_file(gen_out, generate_dump(load_spec(gen_spec)));
    } else if (*sim) {
      const auto config = sim_flags.resolve();
      const auto spec = load_spec(sim_spec);
      const auto dump = generate_dump(spec);
      GroundTruth truth{spec.keyframes, {}};
      if (spec.outliers) truth.outlier_positions = spec.outliers->positions;
      const auto report = run_pipeline(dump, config, truth);
      auto j = to_json(report);
      j["spec"] = to_json(spec);
      emit(config.output_path, dump_json(j), out);
      if (sim_frames_csv) write_file_atomic(*sim_frames_csv, report_frames_csv(report, truth));
      if (sim_heatmap_csv) {
        write_file_atomic(*sim_heatmap_csv, heatmap_csv(layer_frame_attention(dump)));
      }
      if (sim_dump_out) atnd::write_file(*sim_dump_out, dump);
    }
  } catch (const Error& e) {
    return map_error(e, err);
  }
  return kOk;
}

}  // namespace dytok::cli
