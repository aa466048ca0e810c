// SPDX-License-Identifier: Apache-2.0
#include "revseg/reward.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace revseg {

std::optional<TemporalRewardMode> temporal_mode_from_string(std::string_view name) {
  if (name == "none") return TemporalRewardMode::NoReward;
  if (name == "binary") return TemporalRewardMode::Binary01;
  if (name == "soft") return TemporalRewardMode::SoftArea;
  return std::nullopt;
}

const char* to_string(TemporalRewardMode mode) {
  switch (mode) {
    case TemporalRewardMode::NoReward: return "none";
    case TemporalRewardMode::Binary01: return "binary";
    case TemporalRewardMode::SoftArea: return "soft";
  }
  return "?";
}

double format_reward(const FormatChecklist& round1,
                     const std::optional<FormatChecklist>& round2) {
  int pass = round1.passed();
  int total = FormatChecklist::kRuleCount;
  if (round2) {
    pass += round2->passed();
    total += FormatChecklist::kRuleCount;
  }
  return static_cast<double>(pass) / total;
}

double temporal_reward(TemporalRewardMode mode, int k, const GtFrameAreas& areas) {
  if (k < 0 || k >= static_cast<int>(areas.areas.size())) {
    throw std::invalid_argument("temporal_reward: keyframe index out of range");
  }
  switch (mode) {
    case TemporalRewardMode::NoReward:
      return 0.0;
    case TemporalRewardMode::Binary01:
      return areas.areas[k] > 0 ? 1.0 : 0.0;
    case TemporalRewardMode::SoftArea: {
      if (areas.areas[k] <= 0) return 0.0;
      const auto [mn, mx] = std::minmax_element(areas.areas.begin(), areas.areas.end());
      if (*mx == *mn) return 1.0;  // degenerate normalization, target present
      return static_cast<double>(areas.areas[k] - *mn) / static_cast<double>(*mx - *mn);
    }
  }
  return 0.0;
}

double spatial_reward(const BBox& pred, const BBox& gt) {
  return bbox_iou(pred, gt) > 0.5 ? 1.0 : 0.0;
}

RewardBreakdown total_reward(double r_f, double r_t, double r_s, Status s1, Status s2) {
  if (r_f < 0.0 || r_f > 1.0 || r_t < 0.0 || r_t > 1.0 || (r_s != 0.0 && r_s != 1.0)) {
    throw std::invalid_argument("total_reward: component out of range");
  }
  RewardBreakdown b;
  b.s1 = s1;
  b.s2 = s2;
  b.r_f = r_f;
  b.r_t = s1 == Status::Succ ? r_t : 0.0;
  b.r_s = (s1 == Status::Succ && s2 == Status::Succ) ? r_s : 0.0;
  b.total = b.r_f + b.r_t + b.r_s;
  return b;
}

std::string reward_to_json(const RewardBreakdown& b) {
  nlohmann::json j;
  j["r_f"] = b.r_f;
  j["r_t"] = b.r_t;
  j["r_s"] = b.r_s;
  j["s1"] = to_string(b.s1);
  j["s2"] = to_string(b.s2);
  j["total"] = b.total;
  return j.dump();
}

}  // namespace revseg
