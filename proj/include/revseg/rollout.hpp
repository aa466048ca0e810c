// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "revseg/geometry.hpp"
#include "revseg/parser.hpp"
#include "revseg/reward.hpp"

namespace revseg {

/// Raised by policy/tracker adapters on transport failures (timeouts,
/// connection errors, bad HTTP statuses). The engine converts it into a
/// zero-reward trace so groups keep their size.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatTurn {
  std::string role;  // "user" | "assistant"
  std::string text;
};

struct PolicyContext {
  int round = 1;
  std::string prompt;
  std::vector<std::string> images;  // encoded image payloads, may be empty
  std::vector<ChatTurn> history;
};

class PolicyInterface {
 public:
  virtual ~PolicyInterface() = default;
  virtual std::string generate(const PolicyContext& ctx) = 0;
};

/// Frame payloads handed to a tracker; either inline images or a reference
/// the tracker resolves on its side.
struct TrackerFrames {
  std::vector<std::string> images;
  std::string manifest_ref;
  int count = 0;
  FrameSize size;
};

class TrackerInterface {
 public:
  virtual ~TrackerInterface() = default;
  /// Propagates from a seeded (frame, box) over the full source video.
  /// Output has one mask per source frame, all at the source frame size.
  virtual MaskSequence propagate(const TrackerFrames& frames, int keyframe_original_index,
                                 const BBox& box_original) = 0;
};

struct EpisodeInput {
  int num_frames = 0;                           // T, the sampled grid
  std::vector<int> original_frame_indices;      // sampled index -> source index
  std::string query;
  double fps = 1.0;
  int total_source_frames = 0;
  FrameSize source_size;
  std::vector<std::string> frame_images;        // optional, length T when present
  std::string video_id;
  int query_index = 0;

  bool valid() const;
};

/// Per-sampled-frame ground truth; boxes are in original frame coordinates
/// and absent where the target is occluded.
struct EpisodeGroundTruth {
  std::vector<std::optional<BBox>> boxes;

  GtFrameAreas areas() const;
  static EpisodeGroundTruth from_boxes(std::vector<std::optional<BBox>> boxes);
};

struct RolloutOptions {
  TemporalRewardMode temporal_mode = TemporalRewardMode::SoftArea;
  FrameSize round1_image_size{448, 448};
  FrameSize round2_image_size{840, 840};
};

struct RolloutTrace {
  std::string y1;
  Round1Parse round1;
  std::optional<std::string> y2;
  std::optional<Round2Parse> round2;
  std::string transcript;                       // y1 followed by y2
  RewardBreakdown reward;
  int turns = 1;
  std::optional<BBox> predicted_box_original;   // present iff round 2 succeeded
  std::optional<int> keyframe_original_index;
  bool policy_failure = false;
  std::string diagnostic;
  double elapsed_ms = 0.0;
};

struct GroupResult {
  std::vector<RolloutTrace> traces;
  std::vector<double> rewards;
};

/// Uniform temporal sampling: all indices when the video is short, otherwise
/// floor(i * total / count) for i in [0, count).
std::vector<int> sample_frames_uniform(int total_frames, int target_count = 16);

std::string assemble_prompt_round1(const EpisodeInput& ep);
std::string assemble_prompt_round2(int keyframe, const std::string& description);

/// Linear per-axis rescale with round-half-up; degenerate results are widened
/// to one pixel inside the target frame.
BBox rescale_box(const BBox& box, FrameSize from, FrameSize to);

RolloutTrace run_rollout(const EpisodeInput& ep, PolicyInterface& policy,
                         const std::optional<EpisodeGroundTruth>& gt,
                         const RolloutOptions& opt = {});

GroupResult run_group(const EpisodeInput& ep, PolicyInterface& policy, int n,
                      const std::optional<EpisodeGroundTruth>& gt,
                      const RolloutOptions& opt = {});

MaskSequence segment_video(const EpisodeInput& ep, const RolloutTrace& trace,
                           TrackerInterface& tracker);

std::string trace_to_json(const RolloutTrace& trace, const EpisodeInput& ep);

}  // namespace revseg
