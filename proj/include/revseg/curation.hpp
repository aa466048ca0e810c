// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "revseg/geometry.hpp"
#include "revseg/rollout.hpp"

namespace revseg {

struct QueryRecord {
  std::string text;
  std::vector<std::optional<RleRecord>> masks;  // one slot per frame; null = unannotated
};

struct VideoRecord {
  std::string id;
  double fps = 0.0;
  int num_frames = 0;
  FrameSize size;
  std::vector<QueryRecord> queries;
};

struct VideoManifest {
  std::vector<VideoRecord> videos;
};

/// Per-frame ground truth derived from one query's masks.
struct QueryBoxes {
  std::vector<std::optional<BBox>> boxes;
  GtFrameAreas areas;
};

struct CurationDecision {
  std::string video_id;
  std::vector<double> query_mean_ious;
  bool keep = true;
  double threshold = 0.6;
};

struct CurationResult {
  std::vector<CurationDecision> decisions;
  VideoManifest curated;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema-validated load; violations are reported with field paths such as
/// "videos[0].fps".
VideoManifest load_manifest(const std::string& path);
void write_manifest(const VideoManifest& manifest, const std::string& path);

VideoManifest manifest_from_json_text(const std::string& text);
std::string manifest_to_json_text(const VideoManifest& manifest);

/// Tight per-frame boxes for every query of every video. Empty or missing
/// masks yield an absent box and area 0.
std::vector<std::vector<QueryBoxes>> masks_to_boxes(const VideoManifest& manifest);

/// Label-quality filter: the tracker is seeded frame by frame with the
/// ground-truth box and its mask is scored against the annotation. A video
/// is dropped, with all of its queries, as soon as any query's mean IoU
/// falls strictly below the threshold. Frames without a ground-truth box
/// are skipped in the mean; a tracker failure scores that frame 0.
CurationResult tracker_filter(const VideoManifest& manifest, TrackerInterface& tracker,
                              double threshold = 0.6);

/// Resolves "video_id#query_index" references against a manifest and answers
/// with that query's own annotated masks. Used as the built-in `oracle`
/// tracker for curation runs and tests.
class ManifestOracleTracker : public TrackerInterface {
 public:
  explicit ManifestOracleTracker(const VideoManifest& manifest);
  MaskSequence propagate(const TrackerFrames& frames, int keyframe_original_index,
                         const BBox& box_original) override;

 private:
  const VideoManifest* manifest_;
};

}  // namespace revseg
