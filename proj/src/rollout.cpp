// SPDX-License-Identifier: Apache-2.0
#include "revseg/rollout.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace revseg {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

nlohmann::json checklist_json(const FormatChecklist& c) {
  return nlohmann::json::array(
      {c.think_block_present, c.answer_block_present, c.payload_parses, c.required_fields_valid});
}

// A transport failure yields a zero-reward member so the group keeps its
// size; reward statuses are forced to fail regardless of parse progress.
void mark_transport_failure(RolloutTrace& t, std::string diagnostic, int turns) {
  t.turns = turns;
  t.policy_failure = true;
  t.diagnostic = std::move(diagnostic);
  t.predicted_box_original.reset();
  t.reward = total_reward(0.0, 0.0, 0.0, Status::Fail, Status::Fail);
}

}  // namespace

bool EpisodeInput::valid() const {
  if (num_frames < 1 || query.empty() || fps <= 0.0) return false;
  if (static_cast<int>(original_frame_indices.size()) != num_frames) return false;
  for (std::size_t i = 1; i < original_frame_indices.size(); ++i) {
    if (original_frame_indices[i] <= original_frame_indices[i - 1]) return false;
  }
  if (!frame_images.empty() && static_cast<int>(frame_images.size()) != num_frames) return false;
  return total_source_frames >= num_frames;
}

GtFrameAreas EpisodeGroundTruth::areas() const {
  GtFrameAreas a;
  a.areas.reserve(boxes.size());
  for (const auto& b : boxes) a.areas.push_back(b ? bbox_area(*b) : 0);
  return a;
}

EpisodeGroundTruth EpisodeGroundTruth::from_boxes(std::vector<std::optional<BBox>> boxes) {
  EpisodeGroundTruth gt;
  gt.boxes = std::move(boxes);
  return gt;
}

std::vector<int> sample_frames_uniform(int total_frames, int target_count) {
  if (total_frames < 1) throw std::invalid_argument("sample_frames_uniform: empty video");
  if (target_count < 1) throw std::invalid_argument("sample_frames_uniform: empty target");
  std::vector<int> indices;
  if (total_frames <= target_count) {
    indices.resize(total_frames);
    for (int i = 0; i < total_frames; ++i) indices[i] = i;
    return indices;
  }
  indices.resize(target_count);
  for (int i = 0; i < target_count; ++i) {
    indices[i] = static_cast<int>(static_cast<std::int64_t>(i) * total_frames / target_count);
  }
  return indices;
}

std::string assemble_prompt_round1(const EpisodeInput& ep) {
  if (!ep.valid()) throw std::invalid_argument("assemble_prompt_round1: invalid episode");
  const double seconds = ep.total_source_frames / ep.fps;
  char head[160];
  std::snprintf(head, sizeof(head),
                "The video lasts %.1f seconds, and %d frames are uniformly sampled from it.",
                seconds, ep.num_frames);
  std::string p = head;
  p += " Question: " + ep.query + "\n";
  p += "Watch the frames, compare the salient objects, and decide which object the question "
       "refers to. Examine when that object appears across the frames and pick the single frame "
       "where it is most clearly visible, least occluded, and large enough for precise "
       "localization.\n";
  p += "First write your reasoning between <think> and </think> tags. Then give the result "
       "between <answer> and </answer> tags as JSON: {\"keyframe\": <integer in [0, " +
       std::to_string(ep.num_frames - 1) +
       "]>, \"object\": \"<concise description of the target object>\"}.";
  return p;
}

std::string assemble_prompt_round2(int keyframe, const std::string& description) {
  if (description.empty()) {
    throw std::invalid_argument("assemble_prompt_round2: empty object description");
  }
  if (keyframe < 0) throw std::invalid_argument("assemble_prompt_round2: negative keyframe");
  std::string p = "Here is frame " + std::to_string(keyframe) +
                  ", the keyframe you selected. Locate the " + description +
                  " in this image and give a tight bounding box.\n";
  p += "First write your reasoning between <think> and </think> tags. Then give the result "
       "between <answer> and </answer> tags as JSON: {\"bbox\": [x1, y1, x2, y2]}.";
  return p;
}

BBox rescale_box(const BBox& box, FrameSize from, FrameSize to) {
  if (!box.valid() || !from.valid() || !to.valid()) {
    throw std::invalid_argument("rescale_box: invalid input");
  }
  const auto scale = [](int v, int num, int den) {
    return static_cast<int>(std::llround(static_cast<double>(v) * num / den));
  };
  BBox out{scale(box.x1, to.width, from.width), scale(box.y1, to.height, from.height),
           scale(box.x2, to.width, from.width), scale(box.y2, to.height, from.height)};
  // rounding can collapse a thin box; keep at least one pixel inside the frame
  out.x1 = std::clamp(out.x1, 0, to.width - 1);
  out.y1 = std::clamp(out.y1, 0, to.height - 1);
  out.x2 = std::clamp(out.x2, 1, to.width);
  out.y2 = std::clamp(out.y2, 1, to.height);
  if (out.x2 <= out.x1) out.x2 = out.x1 + 1;
  if (out.y2 <= out.y1) out.y2 = out.y1 + 1;
  return out;
}

RolloutTrace run_rollout(const EpisodeInput& ep, PolicyInterface& policy,
                         const std::optional<EpisodeGroundTruth>& gt, const RolloutOptions& opt) {
  if (!ep.valid()) throw std::invalid_argument("run_rollout: invalid episode");
  if (gt && static_cast<int>(gt->boxes.size()) != ep.num_frames) {
    throw std::invalid_argument("run_rollout: ground truth length != num_frames");
  }
  const auto t0 = Clock::now();

  const std::string prompt1 = assemble_prompt_round1(ep);
  PolicyContext ctx1;
  ctx1.round = 1;
  ctx1.prompt = prompt1;
  ctx1.images = ep.frame_images;

  RolloutTrace trace;
  try {
    trace.y1 = policy.generate(ctx1);
  } catch (const TransportError& e) {
    mark_transport_failure(trace, std::string("round 1: ") + e.what(), 1);
    trace.elapsed_ms = ms_since(t0);
    return trace;
  }

  trace.round1 = parse_round1(trace.y1, ep.num_frames);
  trace.transcript = trace.y1;

  if (trace.round1.status == Status::Fail) {
    trace.turns = 1;
    trace.reward =
        total_reward(format_reward(trace.round1.checklist, std::nullopt), 0.0, 0.0, Status::Fail,
                     Status::Fail);
    trace.elapsed_ms = ms_since(t0);
    return trace;
  }

  const int k = trace.round1.keyframe_index;
  trace.keyframe_original_index = ep.original_frame_indices[k];

  PolicyContext ctx2;
  ctx2.round = 2;
  ctx2.prompt = assemble_prompt_round2(k, trace.round1.description);
  if (!ep.frame_images.empty()) ctx2.images = {ep.frame_images[k]};
  ctx2.history = {{"user", prompt1}, {"assistant", trace.y1}};

  std::string y2;
  try {
    y2 = policy.generate(ctx2);
  } catch (const TransportError& e) {
    mark_transport_failure(trace, std::string("round 2: ") + e.what(), 2);
    trace.elapsed_ms = ms_since(t0);
    return trace;
  }

  trace.y2 = y2;
  trace.turns = 2;
  trace.transcript = trace.y1 + y2;
  trace.round2 = parse_round2(y2, opt.round2_image_size);

  if (trace.round2->status == Status::Succ) {
    trace.predicted_box_original =
        rescale_box(trace.round2->bbox, opt.round2_image_size, ep.source_size);
  }

  const double r_f = format_reward(trace.round1.checklist, trace.round2->checklist);
  double r_t = 0.0;
  double r_s = 0.0;
  if (gt) {
    const GtFrameAreas areas = gt->areas();
    r_t = temporal_reward(opt.temporal_mode, k, areas);
    if (trace.predicted_box_original && gt->boxes[k]) {
      r_s = spatial_reward(*trace.predicted_box_original, *gt->boxes[k]);
    }
  }
  trace.reward = total_reward(r_f, r_t, r_s, trace.round1.status, trace.round2->status);
  trace.elapsed_ms = ms_since(t0);
  return trace;
}

GroupResult run_group(const EpisodeInput& ep, PolicyInterface& policy, int n,
                      const std::optional<EpisodeGroundTruth>& gt, const RolloutOptions& opt) {
  if (n < 2) throw std::invalid_argument("run_group: group size must be >= 2");
  GroupResult result;
  result.traces.reserve(n);
  result.rewards.reserve(n);
  for (int i = 0; i < n; ++i) {
    result.traces.push_back(run_rollout(ep, policy, gt, opt));
    result.rewards.push_back(result.traces.back().reward.total);
  }
  return result;
}

MaskSequence segment_video(const EpisodeInput& ep, const RolloutTrace& trace,
                           TrackerInterface& tracker) {
  if (!trace.round2 || trace.round2->status != Status::Succ || !trace.predicted_box_original ||
      !trace.keyframe_original_index) {
    throw std::invalid_argument("segment_video: rollout did not produce a grounded box");
  }
  TrackerFrames frames;
  frames.images = ep.frame_images;
  frames.manifest_ref = ep.video_id;
  frames.count = ep.total_source_frames;
  frames.size = ep.source_size;
  return tracker.propagate(frames, *trace.keyframe_original_index, *trace.predicted_box_original);
}

std::string trace_to_json(const RolloutTrace& trace, const EpisodeInput& ep) {
  nlohmann::json j;
  j["video_id"] = ep.video_id;
  j["query_index"] = ep.query_index;
  j["turns"] = trace.turns;
  j["y1"] = trace.y1;
  j["y2"] = trace.y2 ? nlohmann::json(*trace.y2) : nlohmann::json(nullptr);
  j["round1"] = {{"status", to_string(trace.round1.status)},
                 {"checklist", checklist_json(trace.round1.checklist)}};
  if (trace.round1.status == Status::Succ) {
    j["round1"]["keyframe"] = trace.round1.keyframe_index;
    j["round1"]["object"] = trace.round1.description;
  }
  if (trace.round2) {
    j["round2"] = {{"status", to_string(trace.round2->status)},
                   {"checklist", checklist_json(trace.round2->checklist)}};
    if (trace.round2->status == Status::Succ) {
      j["round2"]["bbox"] = {trace.round2->bbox.x1, trace.round2->bbox.y1, trace.round2->bbox.x2,
                             trace.round2->bbox.y2};
    }
  } else {
    j["round2"] = nullptr;
  }
  if (trace.predicted_box_original) {
    const BBox& b = *trace.predicted_box_original;
    j["predicted_box"] = {b.x1, b.y1, b.x2, b.y2};
  } else {
    j["predicted_box"] = nullptr;
  }
  j["keyframe_original_index"] =
      trace.keyframe_original_index ? nlohmann::json(*trace.keyframe_original_index)
                                    : nlohmann::json(nullptr);
  j["reward"] = nlohmann::json::parse(reward_to_json(trace.reward));
  j["policy_failure"] = trace.policy_failure;
  j["diagnostic"] = trace.diagnostic;
  j["elapsed_ms"] = trace.elapsed_ms;
  return j.dump();
}

}  // namespace revseg
