// SPDX-License-Identifier: Apache-2.0
//
// Operator surface: parse / score / rollout / train-toy / eval / curate.
// Machine-readable output goes to stdout (or --output files); progress and
// diagnostics go to stderr. A JSON --config file provides defaults with flat
// keys mirroring the long flag names; explicit flags always win.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "revseg/adapters.hpp"
#include "revseg/curation.hpp"
#include "revseg/geometry.hpp"
#include "revseg/parser.hpp"
#include "revseg/reward.hpp"
#include "revseg/rollout.hpp"
#include "revseg/synthetic.hpp"
#include "revseg/vos_metrics.hpp"

namespace {

using nlohmann::json;
using namespace revseg;

struct RunConfig {
  std::uint64_t seed = 0;
  int frames = 16;
  int group_size = 8;
  double beta = 1e-3;
  double lr = 0.15;
  int steps = 800;
  std::string temporal_mode = "soft";
  std::string policy_url;
  std::string tracker_url;
  std::string input;
  std::string output;
  double threshold = 0.6;
  std::string config_path;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// Applies --config values underneath any flag the user did not pass.
void apply_config_file(CLI::App* cmd, RunConfig& cfg) {
  if (cfg.config_path.empty()) return;
  const json file = json::parse(read_file(cfg.config_path));
  auto take = [&](const char* flag, const char* key, auto& slot) {
    const CLI::Option* opt = cmd->get_option_no_throw(flag);
    if (opt && opt->count() > 0) return;  // explicit flag wins
    if (!file.contains(key)) return;
    file[key].get_to(slot);
  };
  take("--seed", "seed", cfg.seed);
  take("--frames", "frames", cfg.frames);
  take("--group-size", "group-size", cfg.group_size);
  take("--beta", "beta", cfg.beta);
  take("--lr", "lr", cfg.lr);
  take("--steps", "steps", cfg.steps);
  take("--temporal-mode", "temporal-mode", cfg.temporal_mode);
  take("--policy-url", "policy-url", cfg.policy_url);
  take("--tracker-url", "tracker-url", cfg.tracker_url);
  take("--input", "input", cfg.input);
  take("--output", "output", cfg.output);
  take("--threshold", "threshold", cfg.threshold);
}

TemporalRewardMode mode_or_throw(const std::string& name) {
  const auto mode = temporal_mode_from_string(name);
  if (!mode) throw CLI::ValidationError("--temporal-mode", "expected one of none|binary|soft");
  return *mode;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

json parse_report(const std::string& text, int frames) {
  json report;
  const Round1Parse r1 = parse_round1(text, frames);
  report["round1"] = {{"status", to_string(r1.status)},
                      {"checklist",
                       {r1.checklist.think_block_present, r1.checklist.answer_block_present,
                        r1.checklist.payload_parses, r1.checklist.required_fields_valid}},
                      {"format_reward", format_reward(r1.checklist, std::nullopt)}};
  if (r1.status == Status::Succ) {
    report["round1"]["keyframe"] = r1.keyframe_index;
    report["round1"]["object"] = r1.description;
  }
  const Round2Parse r2 = parse_round2(text, {840, 840});
  report["round2"] = {{"status", to_string(r2.status)},
                      {"checklist",
                       {r2.checklist.think_block_present, r2.checklist.answer_block_present,
                        r2.checklist.payload_parses, r2.checklist.required_fields_valid}}};
  if (r2.status == Status::Succ) {
    report["round2"]["bbox"] = {r2.bbox.x1, r2.bbox.y1, r2.bbox.x2, r2.bbox.y2};
  }
  return report;
}

struct EpisodeBundle {
  EpisodeInput input;
  EpisodeGroundTruth gt;
};

// Builds the sampled-frame episode plus ground truth for one manifest query.
EpisodeBundle episode_from_manifest(const VideoRecord& video, int query_index, int frames) {
  EpisodeBundle b;
  b.input.original_frame_indices = sample_frames_uniform(video.num_frames, frames);
  b.input.num_frames = static_cast<int>(b.input.original_frame_indices.size());
  b.input.query = video.queries[query_index].text;
  b.input.fps = video.fps;
  b.input.total_source_frames = video.num_frames;
  b.input.source_size = video.size;
  b.input.video_id = video.id;
  b.input.query_index = query_index;

  const QueryRecord& q = video.queries[query_index];
  std::vector<std::optional<BBox>> boxes;
  for (const int src : b.input.original_frame_indices) {
    const auto& mask = q.masks[src];
    boxes.push_back(mask ? mask_to_bbox(rle_decode(*mask)) : std::nullopt);
  }
  b.gt = EpisodeGroundTruth::from_boxes(std::move(boxes));
  return b;
}

const VideoRecord* find_video(const VideoManifest& manifest, const std::string& id) {
  for (const VideoRecord& v : manifest.videos) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

int cmd_parse(const RunConfig& cfg, const std::string& file) {
  const std::string text = read_file(file);
  std::cout << parse_report(text, cfg.frames).dump(2) << "\n";
  return 0;
}

int cmd_score(const RunConfig& cfg, const std::string& trace_file) {
  if (cfg.input.empty()) throw std::runtime_error("score: --input ground-truth manifest required");
  const VideoManifest manifest = load_manifest(cfg.input);
  const TemporalRewardMode mode = mode_or_throw(cfg.temporal_mode);

  std::ifstream in(trace_file);
  if (!in) throw std::runtime_error("cannot open " + trace_file);
  std::ostringstream out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json trace = json::parse(line);
    const std::string video_id = trace.at("video_id").get<std::string>();
    const int query_index = trace.value("query_index", 0);
    const VideoRecord* video = find_video(manifest, video_id);
    if (!video) {
      throw std::runtime_error("score: trace line " + std::to_string(line_no) +
                               " references unknown video '" + video_id + "'");
    }
    if (query_index < 0 || query_index >= static_cast<int>(video->queries.size())) {
      throw std::runtime_error("score: trace line " + std::to_string(line_no) +
                               " references unknown query " + std::to_string(query_index));
    }
    const EpisodeBundle b = episode_from_manifest(*video, query_index, cfg.frames);
    const GtFrameAreas areas = b.gt.areas();

    const std::string y1 = trace.at("y1").get<std::string>();
    const Round1Parse r1 = parse_round1(y1, b.input.num_frames);
    std::optional<Round2Parse> r2;
    if (trace.contains("y2") && trace["y2"].is_string()) {
      r2 = parse_round2(trace["y2"].get<std::string>(), {840, 840});
    }

    const double r_f = r2 ? format_reward(r1.checklist, r2->checklist)
                          : format_reward(r1.checklist, std::nullopt);
    double r_t = 0.0;
    double r_s = 0.0;
    if (r1.status == Status::Succ) {
      r_t = temporal_reward(mode, r1.keyframe_index, areas);
      if (r2 && r2->status == Status::Succ && b.gt.boxes[r1.keyframe_index]) {
        const BBox pred = rescale_box(r2->bbox, {840, 840}, video->size);
        r_s = spatial_reward(pred, *b.gt.boxes[r1.keyframe_index]);
      }
    }
    const RewardBreakdown breakdown =
        total_reward(r_f, r_t, r_s, r1.status, r2 ? r2->status : Status::Fail);
    json rec = json::parse(reward_to_json(breakdown));
    rec["video_id"] = video_id;
    rec["query_index"] = query_index;
    out << rec.dump() << "\n";
  }
  if (cfg.output.empty()) {
    std::cout << out.str();
  } else {
    write_file(cfg.output, out.str());
  }
  return 0;
}

int cmd_rollout(const RunConfig& cfg) {
  if (cfg.input.empty()) throw std::runtime_error("rollout: --input manifest required");
  const std::string url = !cfg.policy_url.empty() ? cfg.policy_url : env_or("REVSEG_POLICY_URL", "");
  if (url.empty()) throw std::runtime_error("rollout: --policy-url or REVSEG_POLICY_URL required");
  if (cfg.group_size < 2) throw std::runtime_error("rollout: --group-size must be >= 2");

  const VideoManifest manifest = load_manifest(cfg.input);
  HttpPolicyClient policy(url);
  RolloutOptions opt;
  opt.temporal_mode = mode_or_throw(cfg.temporal_mode);

  std::ostringstream out;
  int failures = 0;
  int total = 0;
  std::string first_diagnostic;
  for (const VideoRecord& video : manifest.videos) {
    for (int qi = 0; qi < static_cast<int>(video.queries.size()); ++qi) {
      const EpisodeBundle b = episode_from_manifest(video, qi, cfg.frames);
      const GroupResult group = run_group(b.input, policy, cfg.group_size, b.gt, opt);
      for (const RolloutTrace& t : group.traces) {
        out << trace_to_json(t, b.input) << "\n";
        ++total;
        if (t.policy_failure) {
          ++failures;
          if (first_diagnostic.empty()) first_diagnostic = t.diagnostic;
        }
      }
    }
  }
  if (cfg.output.empty()) {
    std::cout << out.str();
  } else {
    write_file(cfg.output, out.str());
  }
  std::cerr << "rollout: " << total << " traces, " << failures << " policy failures\n";
  if (failures > 0) {
    std::cerr << "rollout: first failure: " << first_diagnostic << "\n";
    return 2;
  }
  return 0;
}

int cmd_train_toy(const RunConfig& cfg) {
  GrpoConfig grpo;
  grpo.seed = cfg.seed;
  grpo.n = cfg.group_size;
  grpo.beta = cfg.beta;
  grpo.learning_rate = cfg.lr;
  grpo.steps = cfg.steps;
  if (grpo.beta < 0) throw std::runtime_error("train-toy: --beta must be >= 0");
  if (grpo.n < 2) throw std::runtime_error("train-toy: --group-size must be >= 2");
  if (grpo.learning_rate <= 0) throw std::runtime_error("train-toy: --lr must be > 0");

  SyntheticLabConfig lab;
  lab.num_frames = cfg.frames;

  const TrainReport report = train_toy(grpo, mode_or_throw(cfg.temporal_mode), lab);

  const std::filesystem::path dir = cfg.output.empty() ? "revseg-train" : cfg.output;
  std::filesystem::create_directories(dir);
  write_file((dir / "train_log.csv").string(), report.csv());
  write_file((dir / "metrics.json").string(), report.metrics_json());
  write_file((dir / "reward.svg").string(), report.reward_curve_svg());
  std::cerr << "train-toy: wrote " << (dir / "train_log.csv").string() << ", metrics.json, "
            << "reward.svg\n";
  std::cout << report.metrics_json() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& pred_path, const std::string& gt_path) {
  const VideoManifest pred = load_manifest(pred_path);
  const VideoManifest gt = load_manifest(gt_path);

  std::vector<std::tuple<std::string, MaskSequence, MaskSequence>> pairs;
  for (const VideoRecord& gv : gt.videos) {
    const VideoRecord* pv = find_video(pred, gv.id);
    if (!pv) throw std::runtime_error("eval: prediction manifest is missing video '" + gv.id + "'");
    if (!(pv->size == gv.size) || pv->num_frames != gv.num_frames) {
      throw std::runtime_error("eval: geometry mismatch for video '" + gv.id + "'");
    }
    if (pv->queries.size() != gv.queries.size()) {
      throw std::runtime_error("eval: query count mismatch for video '" + gv.id + "'");
    }
    for (std::size_t qi = 0; qi < gv.queries.size(); ++qi) {
      auto decode_all = [](const VideoRecord& v, const QueryRecord& q) {
        MaskSequence seq;
        for (const auto& m : q.masks) {
          seq.frames.push_back(m ? rle_decode(*m) : BinaryMask::empty(v.size));
        }
        return seq;
      };
      pairs.emplace_back(gv.id + "#" + std::to_string(qi), decode_all(*pv, pv->queries[qi]),
                         decode_all(gv, gv.queries[qi]));
    }
  }
  const BenchmarkReport report = evaluate_dataset(pairs);
  if (cfg.output.empty()) {
    std::cout << report_to_json(report) << "\n";
  } else {
    write_file(cfg.output, report_to_json(report));
    std::cout << report_to_markdown(report);
  }
  return 0;
}

int cmd_curate(const RunConfig& cfg, const std::string& tracker_kind) {
  if (cfg.input.empty()) throw std::runtime_error("curate: --input manifest required");
  if (cfg.output.empty()) throw std::runtime_error("curate: --output path required");
  const VideoManifest manifest = load_manifest(cfg.input);

  std::unique_ptr<TrackerInterface> tracker;
  const std::string url =
      !cfg.tracker_url.empty() ? cfg.tracker_url : env_or("REVSEG_TRACKER_URL", "");
  if (tracker_kind == "oracle") {
    tracker = std::make_unique<ManifestOracleTracker>(manifest);
  } else if (!url.empty()) {
    tracker = std::make_unique<HttpTrackerClient>(url);
  } else {
    throw std::runtime_error("curate: pass --tracker oracle or --tracker-url URL");
  }

  const CurationResult result = tracker_filter(manifest, *tracker, cfg.threshold);
  write_manifest(result.curated, cfg.output);

  std::cout << "video_id,query_index,mean_iou,decision\n";
  for (const CurationDecision& d : result.decisions) {
    for (std::size_t qi = 0; qi < d.query_mean_ious.size(); ++qi) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%s\n", d.video_id.c_str(), qi,
                    d.query_mean_ious[qi], d.keep ? "keep" : "discard");
      std::cout << buf;
    }
  }
  std::cerr << "curate: kept " << result.curated.videos.size() << " of "
            << manifest.videos.size() << " videos\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decomposed two-round video grounding harness"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string parse_file, trace_file, pred_path, gt_path, tracker_kind = "http";

  auto add_common = [&cfg](CLI::App* cmd) {
    cmd->add_option("--seed", cfg.seed, "root random seed");
    cmd->add_option("--frames", cfg.frames, "sampled frames per video")->check(CLI::PositiveNumber);
    cmd->add_option("--group-size", cfg.group_size, "rollouts per group");
    cmd->add_option("--beta", cfg.beta, "KL regularization coefficient");
    cmd->add_option("--lr", cfg.lr, "optimizer step size");
    cmd->add_option("--steps", cfg.steps, "optimizer step budget")->check(CLI::NonNegativeNumber);
    cmd->add_option("--temporal-mode", cfg.temporal_mode, "none|binary|soft");
    cmd->add_option("--policy-url", cfg.policy_url, "policy endpoint");
    cmd->add_option("--tracker-url", cfg.tracker_url, "tracker endpoint");
    cmd->add_option("--input", cfg.input, "input path");
    cmd->add_option("--output", cfg.output, "output path");
    cmd->add_option("--threshold", cfg.threshold, "curation IoU threshold");
    cmd->add_option("--config", cfg.config_path, "JSON config file with flat flag keys");
  };

  CLI::App* parse_cmd = app.add_subcommand("parse", "parse a saved transcript");
  parse_cmd->add_option("file", parse_file, "transcript text file")->required();
  add_common(parse_cmd);

  CLI::App* score_cmd = app.add_subcommand("score", "recompute rewards for saved traces");
  score_cmd->add_option("traces", trace_file, "trace JSONL file")->required();
  add_common(score_cmd);

  CLI::App* rollout_cmd = app.add_subcommand("rollout", "run groups against a policy endpoint");
  add_common(rollout_cmd);

  CLI::App* train_cmd = app.add_subcommand("train-toy", "GRPO training on the synthetic lab");
  add_common(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  eval_cmd->add_option("predictions", pred_path, "prediction manifest")->required();
  eval_cmd->add_option("ground_truth", gt_path, "ground-truth manifest")->required();
  add_common(eval_cmd);

  CLI::App* curate_cmd = app.add_subcommand("curate", "tracker-consistency data filter");
  curate_cmd->add_option("--tracker", tracker_kind, "oracle|http");
  add_common(curate_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* active = app.get_subcommands().front();
    apply_config_file(active, cfg);
    if (active == parse_cmd) return cmd_parse(cfg, parse_file);
    if (active == score_cmd) return cmd_score(cfg, trace_file);
    if (active == rollout_cmd) return cmd_rollout(cfg);
    if (active == train_cmd) return cmd_train_toy(cfg);
    if (active == eval_cmd) return cmd_eval(cfg, pred_path, gt_path);
    if (active == curate_cmd) return cmd_curate(cfg, tracker_kind);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
