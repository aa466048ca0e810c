// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "revseg/geometry.hpp"
#include "revseg/rng.hpp"
#include "revseg/rollout.hpp"

namespace revseg {

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

struct HttpOptions {
  double timeout_seconds = 120.0;
  int max_retries = 2;  // attempts = 1 + max_retries
};

/// JSON-over-HTTP policy client: POST {url}/generate with
/// {"round","prompt","images","history"} and returns the "text" field.
/// Transport errors and HTTP >= 400 raise TransportError after retries.
class HttpPolicyClient : public PolicyInterface {
 public:
  explicit HttpPolicyClient(std::string base_url, HttpOptions options = {});
  std::string generate(const PolicyContext& ctx) override;

 private:
  std::string base_url_;
  HttpOptions options_;
};

/// POST {url}/propagate with {"frames"|"manifest_ref","keyframe","bbox"};
/// expects {"masks":[RleRecord,...]}.
class HttpTrackerClient : public TrackerInterface {
 public:
  explicit HttpTrackerClient(std::string base_url, HttpOptions options = {});
  MaskSequence propagate(const TrackerFrames& frames, int keyframe_original_index,
                         const BBox& box_original) override;

 private:
  std::string base_url_;
  HttpOptions options_;
};

/// Deterministic table-driven policy for tests. Rules match on round and a
/// prompt substring; the first match wins. A rule may carry several
/// responses, picked by the seeded stream. Unmatched requests fall through
/// to a configurable garbage default.
class ScriptedPolicy : public PolicyInterface {
 public:
  struct Rule {
    int round = 0;  // 0 matches any round
    std::string prompt_contains;
    std::vector<std::string> responses;
  };

  explicit ScriptedPolicy(std::vector<Rule> rules, std::uint64_t seed = 0,
                          std::string default_response = "garbled output with no tags");
  std::string generate(const PolicyContext& ctx) override;

 private:
  std::vector<Rule> rules_;
  RngStream rng_;
  std::string default_response_;
};

/// Emits a perfect two-round transcript for a known ground truth: round one
/// picks the largest-area visible frame, round two reports its box in
/// policy-image coordinates.
class OraclePolicy : public PolicyInterface {
 public:
  OraclePolicy(EpisodeGroundTruth gt, FrameSize source_size, FrameSize round2_image_size,
               std::string description = "the target object");
  std::string generate(const PolicyContext& ctx) override;

  int chosen_keyframe() const { return keyframe_; }

 private:
  EpisodeGroundTruth gt_;
  FrameSize source_size_;
  FrameSize round2_size_;
  std::string description_;
  int keyframe_ = -1;
};

/// Stand-in for a real tracker: hands back the stored ground-truth masks
/// when the seed box overlaps the true box at the keyframe (IoU > 0.5),
/// all-empty masks otherwise.
class OracleTracker : public TrackerInterface {
 public:
  explicit OracleTracker(MaskSequence gt_masks);
  MaskSequence propagate(const TrackerFrames& frames, int keyframe_original_index,
                         const BBox& box_original) override;

 private:
  MaskSequence gt_masks_;
};

}  // namespace revseg
