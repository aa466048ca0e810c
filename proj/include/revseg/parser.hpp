// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "revseg/geometry.hpp"

namespace revseg {

enum class Status { Succ, Fail };

inline const char* to_string(Status s) { return s == Status::Succ ? "succ" : "fail"; }

/// Per-round format rubric. One flag per rule, four rules per round.
struct FormatChecklist {
  bool think_block_present = false;
  bool answer_block_present = false;
  bool payload_parses = false;
  bool required_fields_valid = false;

  static constexpr int kRuleCount = 4;

  int passed() const {
    return static_cast<int>(think_block_present) + static_cast<int>(answer_block_present) +
           static_cast<int>(payload_parses) + static_cast<int>(required_fields_valid);
  }
  bool all_passed() const { return passed() == kRuleCount; }
};

struct Round1Parse {
  Status status = Status::Fail;
  int keyframe_index = -1;      // valid iff status == Succ
  std::string description;      // valid iff status == Succ
  FormatChecklist checklist;
};

struct Round2Parse {
  Status status = Status::Fail;
  BBox bbox;                    // valid iff status == Succ; policy-image coordinates
  FormatChecklist checklist;
};

/// Inner text of the first well-nested <tag>...</tag> pair, or nullopt when
/// the pair is missing or malformed. Absence is a value, never an error.
std::optional<std::string> extract_tagged(std::string_view text, std::string_view tag_name);

/// Round-1 payload grammar: {"keyframe": <int>, "object": <string>}, keyframe
/// in [0, num_frames-1], object nonempty. Extra fields are ignored. The first
/// parseable JSON object inside the answer block wins.
Round1Parse parse_round1(std::string_view text, int num_frames);

/// Round-2 payload grammar: {"bbox": [x1,y1,x2,y2]} with x1<x2, y1<y2.
/// Coordinates are rounded to pixels and clamped to the image; the parse
/// fails if the box degenerates after clamping.
Round2Parse parse_round2(std::string_view text, FrameSize image_size);

}  // namespace revseg
