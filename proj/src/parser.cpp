// SPDX-License-Identifier: Apache-2.0
#include "revseg/parser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace revseg {
namespace {

using nlohmann::json;

// One-past-the-end index of a balanced {...} starting at `open`, honoring
// string literals and escapes. nullopt when the braces never balance.
std::optional<std::size_t> balanced_object_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return i + 1;
      if (depth < 0) return std::nullopt;
    }
  }
  return std::nullopt;
}

// First substring that parses as a JSON object; later candidates ignored.
std::optional<json> first_json_object(std::string_view s) {
  for (std::size_t i = s.find('{'); i != std::string_view::npos; i = s.find('{', i + 1)) {
    const auto end = balanced_object_end(s, i);
    if (!end) continue;
    json j = json::parse(s.substr(i, *end - i), nullptr, /*allow_exceptions=*/false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

int round_to_pixel(double v) { return static_cast<int>(std::llround(v)); }

}  // namespace

std::optional<std::string> extract_tagged(std::string_view text, std::string_view tag_name) {
  const std::string open = "<" + std::string(tag_name) + ">";
  const std::string close = "</" + std::string(tag_name) + ">";
  const std::size_t p = text.find(open);
  if (p == std::string_view::npos) return std::nullopt;
  const std::size_t body = p + open.size();
  const std::size_t q = text.find(close, body);
  if (q == std::string_view::npos) return std::nullopt;  // unclosed
  return std::string(text.substr(body, q - body));
}

Round1Parse parse_round1(std::string_view text, int num_frames) {
  if (num_frames < 1) throw std::invalid_argument("parse_round1: num_frames must be >= 1");
  Round1Parse out;
  const auto think = extract_tagged(text, "think");
  const auto answer = extract_tagged(text, "answer");
  out.checklist.think_block_present = think.has_value();
  out.checklist.answer_block_present = answer.has_value();

  std::optional<json> payload;
  if (answer) payload = first_json_object(*answer);
  out.checklist.payload_parses = payload.has_value();

  if (payload) {
    const json& j = *payload;
    const bool keyframe_ok = j.contains("keyframe") && j["keyframe"].is_number_integer() &&
                             j["keyframe"].get<std::int64_t>() >= 0 &&
                             j["keyframe"].get<std::int64_t>() < num_frames;
    const bool object_ok =
        j.contains("object") && j["object"].is_string() && !j["object"].get<std::string>().empty();
    out.checklist.required_fields_valid = keyframe_ok && object_ok;
    if (out.checklist.all_passed()) {
      out.status = Status::Succ;
      out.keyframe_index = static_cast<int>(j["keyframe"].get<std::int64_t>());
      out.description = j["object"].get<std::string>();
    }
  }
  return out;
}

Round2Parse parse_round2(std::string_view text, FrameSize image_size) {
  if (!image_size.valid()) throw std::invalid_argument("parse_round2: invalid image size");
  Round2Parse out;
  const auto think = extract_tagged(text, "think");
  const auto answer = extract_tagged(text, "answer");
  out.checklist.think_block_present = think.has_value();
  out.checklist.answer_block_present = answer.has_value();

  std::optional<json> payload;
  if (answer) payload = first_json_object(*answer);
  out.checklist.payload_parses = payload.has_value();

  if (payload) {
    const json& j = *payload;
    bool ok = j.contains("bbox") && j["bbox"].is_array() && j["bbox"].size() == 4;
    if (ok) {
      for (const auto& v : j["bbox"]) ok = ok && v.is_number();
    }
    if (ok) {
      const double x1 = j["bbox"][0].get<double>();
      const double y1 = j["bbox"][1].get<double>();
      const double x2 = j["bbox"][2].get<double>();
      const double y2 = j["bbox"][3].get<double>();
      ok = x1 < x2 && y1 < y2;
      if (ok) {
        BBox b{round_to_pixel(x1), round_to_pixel(y1), round_to_pixel(x2), round_to_pixel(y2)};
        b.x1 = std::clamp(b.x1, 0, image_size.width);
        b.x2 = std::clamp(b.x2, 0, image_size.width);
        b.y1 = std::clamp(b.y1, 0, image_size.height);
        b.y2 = std::clamp(b.y2, 0, image_size.height);
        ok = b.x1 < b.x2 && b.y1 < b.y2;  // degenerate after clamping -> fail
        if (ok) out.bbox = b;
      }
    }
    out.checklist.required_fields_valid = ok;
  }
  if (out.checklist.all_passed()) out.status = Status::Succ;
  return out;
}

}  // namespace revseg
