// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "revseg/geometry.hpp"
#include "revseg/parser.hpp"

namespace revseg {

enum class TemporalRewardMode { NoReward, Binary01, SoftArea };

std::optional<TemporalRewardMode> temporal_mode_from_string(std::string_view name);
const char* to_string(TemporalRewardMode mode);

/// Ground-truth bbox pixel area per sampled frame; 0 where the target is absent.
struct GtFrameAreas {
  std::vector<std::int64_t> areas;
};

struct RewardBreakdown {
  double r_f = 0.0;   // [0,1]
  double r_t = 0.0;   // [0,1], forced to 0 when s1 == fail
  double r_s = 0.0;   // {0,1}, forced to 0 unless both rounds succeed
  Status s1 = Status::Fail;
  Status s2 = Status::Fail;
  double total = 0.0;  // r_f + 1[s1]*r_t + 1[s1 & s2]*r_s, in [0,3]
};

/// Fraction of passing rubric flags over the executed rounds (4 or 8 rules).
/// round2 is absent exactly when the rollout terminated after round one.
double format_reward(const FormatChecklist& round1, const std::optional<FormatChecklist>& round2);

/// Keyframe visibility reward. SoftArea normalizes the chosen frame's area
/// between the episode min and max; when every frame has the same positive
/// area the reward is 1 (all choices equally good).
double temporal_reward(TemporalRewardMode mode, int k, const GtFrameAreas& areas);

/// 1 iff IoU(pred, gt) > 0.5, strictly.
double spatial_reward(const BBox& pred, const BBox& gt);

/// Gated total: failed rounds zero out the downstream components.
RewardBreakdown total_reward(double r_f, double r_t, double r_s, Status s1, Status s2);

std::string reward_to_json(const RewardBreakdown& b);

}  // namespace revseg
