// SPDX-License-Identifier: Apache-2.0
#include "revseg/curation.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace revseg {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ManifestError("manifest schema violation at " + path + ": " + what);
}

int require_int(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path + "." + key, "missing field");
  if (!j[key].is_number_integer()) fail(path + "." + key, "expected integer");
  return j[key].get<int>();
}

double require_number(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path + "." + key, "missing field");
  if (!j[key].is_number()) fail(path + "." + key, "expected number");
  return j[key].get<double>();
}

std::string require_string(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path + "." + key, "missing field");
  if (!j[key].is_string()) fail(path + "." + key, "expected string");
  return j[key].get<std::string>();
}

RleRecord parse_rle(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected RLE object");
  RleRecord r;
  r.width = require_int(j, path, "w");
  r.height = require_int(j, path, "h");
  if (!j.contains("runs") || !j["runs"].is_array()) fail(path + ".runs", "expected array");
  for (const auto& v : j["runs"]) {
    if (!v.is_number_integer()) fail(path + ".runs", "expected integer run lengths");
    r.runs.push_back(v.get<std::int64_t>());
  }
  return r;
}

json rle_json(const RleRecord& r) {
  return json{{"w", r.width}, {"h", r.height}, {"runs", r.runs}};
}

}  // namespace

VideoManifest manifest_from_json_text(const std::string& text) {
  const json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw ManifestError("manifest is not valid JSON");
  if (!root.is_object() || !root.contains("videos") || !root["videos"].is_array()) {
    fail("videos", "missing or not an array");
  }

  VideoManifest manifest;
  for (std::size_t vi = 0; vi < root["videos"].size(); ++vi) {
    const json& jv = root["videos"][vi];
    const std::string vp = "videos[" + std::to_string(vi) + "]";
    VideoRecord video;
    video.id = require_string(jv, vp, "id");
    video.fps = require_number(jv, vp, "fps");
    if (video.fps <= 0.0) fail(vp + ".fps", "must be positive");
    video.num_frames = require_int(jv, vp, "num_frames");
    if (video.num_frames < 1) fail(vp + ".num_frames", "must be >= 1");
    video.size.width = require_int(jv, vp, "width");
    video.size.height = require_int(jv, vp, "height");
    if (!video.size.valid()) fail(vp + ".width", "frame size must be positive");
    if (!jv.contains("queries") || !jv["queries"].is_array()) fail(vp + ".queries", "expected array");

    for (std::size_t qi = 0; qi < jv["queries"].size(); ++qi) {
      const json& jq = jv["queries"][qi];
      const std::string qp = vp + ".queries[" + std::to_string(qi) + "]";
      QueryRecord query;
      query.text = require_string(jq, qp, "text");
      if (!jq.contains("masks") || !jq["masks"].is_array()) fail(qp + ".masks", "expected array");
      if (static_cast<int>(jq["masks"].size()) != video.num_frames) {
        fail(qp + ".masks", "length must equal num_frames");
      }
      for (std::size_t mi = 0; mi < jq["masks"].size(); ++mi) {
        const json& jm = jq["masks"][mi];
        const std::string mp = qp + ".masks[" + std::to_string(mi) + "]";
        if (jm.is_null()) {
          query.masks.push_back(std::nullopt);
          continue;
        }
        RleRecord r = parse_rle(jm, mp);
        if (!(FrameSize{r.width, r.height} == video.size)) fail(mp, "mask size != frame size");
        try {
          rle_decode(r);  // validates run sums and signs
        } catch (const std::exception& e) {
          fail(mp, e.what());
        }
        query.masks.push_back(std::move(r));
      }
      video.queries.push_back(std::move(query));
    }
    manifest.videos.push_back(std::move(video));
  }
  return manifest;
}

std::string manifest_to_json_text(const VideoManifest& manifest) {
  json root;
  auto& videos = root["videos"] = json::array();
  for (const VideoRecord& v : manifest.videos) {
    json jv{{"id", v.id},
            {"fps", v.fps},
            {"num_frames", v.num_frames},
            {"width", v.size.width},
            {"height", v.size.height}};
    auto& queries = jv["queries"] = json::array();
    for (const QueryRecord& q : v.queries) {
      json jq{{"text", q.text}};
      auto& masks = jq["masks"] = json::array();
      for (const auto& m : q.masks) masks.push_back(m ? rle_json(*m) : json(nullptr));
      queries.push_back(std::move(jq));
    }
    videos.push_back(std::move(jv));
  }
  return root.dump();
}

VideoManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_json_text(ss.str());
}

void write_manifest(const VideoManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestError("cannot write manifest: " + path);
  out << manifest_to_json_text(manifest);
  if (!out) throw ManifestError("short write to " + path);
}

std::vector<std::vector<QueryBoxes>> masks_to_boxes(const VideoManifest& manifest) {
  std::vector<std::vector<QueryBoxes>> out;
  for (const VideoRecord& v : manifest.videos) {
    std::vector<QueryBoxes> per_query;
    for (const QueryRecord& q : v.queries) {
      QueryBoxes qb;
      for (const auto& m : q.masks) {
        std::optional<BBox> box;
        if (m) box = mask_to_bbox(rle_decode(*m));
        qb.areas.areas.push_back(box ? bbox_area(*box) : 0);
        qb.boxes.push_back(box);
      }
      per_query.push_back(std::move(qb));
    }
    out.push_back(std::move(per_query));
  }
  return out;
}

CurationResult tracker_filter(const VideoManifest& manifest, TrackerInterface& tracker,
                              double threshold) {
  CurationResult result;
  const auto boxes = masks_to_boxes(manifest);

  for (std::size_t vi = 0; vi < manifest.videos.size(); ++vi) {
    const VideoRecord& video = manifest.videos[vi];
    CurationDecision decision;
    decision.video_id = video.id;
    decision.threshold = threshold;

    for (std::size_t qi = 0; qi < video.queries.size(); ++qi) {
      const QueryRecord& query = video.queries[qi];
      TrackerFrames frames;
      frames.manifest_ref = video.id + "#" + std::to_string(qi);
      frames.count = video.num_frames;
      frames.size = video.size;

      double iou_sum = 0.0;
      int scored = 0;
      for (int f = 0; f < video.num_frames; ++f) {
        const auto& gt_box = boxes[vi][qi].boxes[f];
        if (!gt_box) continue;  // no target, nothing to condition on
        const BinaryMask gt_mask = rle_decode(*query.masks[f]);
        double iou = 0.0;
        try {
          const MaskSequence pred = tracker.propagate(frames, f, *gt_box);
          if (f < static_cast<int>(pred.frames.size())) {
            iou = mask_iou(pred.frames[f], gt_mask);
          }
        } catch (const std::exception&) {
          iou = 0.0;  // tracker failure scores the frame as a miss
        }
        iou_sum += iou;
        ++scored;
      }
      // A query with no visible frames carries no evidence either way.
      decision.query_mean_ious.push_back(scored > 0 ? iou_sum / scored : 1.0);
    }

    decision.keep = true;
    for (const double mean_iou : decision.query_mean_ious) {
      if (mean_iou < threshold) decision.keep = false;  // strictly below
    }
    if (decision.keep) result.curated.videos.push_back(video);
    result.decisions.push_back(std::move(decision));
  }
  return result;
}

ManifestOracleTracker::ManifestOracleTracker(const VideoManifest& manifest)
    : manifest_(&manifest) {}

MaskSequence ManifestOracleTracker::propagate(const TrackerFrames& frames,
                                              int keyframe_original_index,
                                              const BBox& box_original) {
  (void)keyframe_original_index;
  (void)box_original;
  const std::string& ref = frames.manifest_ref;
  const auto hash = ref.find('#');
  const std::string video_id = hash == std::string::npos ? ref : ref.substr(0, hash);
  const int query_index = hash == std::string::npos ? 0 : std::stoi(ref.substr(hash + 1));

  for (const VideoRecord& v : manifest_->videos) {
    if (v.id != video_id) continue;
    if (query_index < 0 || query_index >= static_cast<int>(v.queries.size())) {
      throw TransportError("ManifestOracleTracker: query index out of range in " + ref);
    }
    MaskSequence seq;
    for (const auto& m : v.queries[query_index].masks) {
      seq.frames.push_back(m ? rle_decode(*m) : BinaryMask::empty(v.size));
    }
    return seq;
  }
  throw TransportError("ManifestOracleTracker: unknown video " + video_id);
}

}  // namespace revseg
