// SPDX-License-Identifier: Apache-2.0
#include "revseg/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace revseg {

BinaryMask BinaryMask::empty(FrameSize s) {
  if (!s.valid()) {
    throw std::invalid_argument("BinaryMask: frame size must be positive");
  }
  BinaryMask m;
  m.size = s;
  m.bits.assign(static_cast<std::size_t>(s.width) * s.height, 0);
  return m;
}

std::int64_t BinaryMask::foreground_count() const {
  return std::count(bits.begin(), bits.end(), std::uint8_t{1});
}

bool MaskSequence::valid() const {
  if (frames.empty()) return false;
  const FrameSize s = frames.front().size;
  for (const auto& f : frames) {
    if (!(f.size == s)) return false;
  }
  return true;
}

std::int64_t bbox_area(const BBox& b) {
  if (!b.valid()) throw std::invalid_argument("bbox_area: invalid box");
  return static_cast<std::int64_t>(b.x2 - b.x1) * (b.y2 - b.y1);
}

double bbox_iou(const BBox& a, const BBox& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("bbox_iou: invalid box");
  const int ix1 = std::max(a.x1, b.x1);
  const int iy1 = std::max(a.y1, b.y1);
  const int ix2 = std::min(a.x2, b.x2);
  const int iy2 = std::min(a.y2, b.y2);
  const std::int64_t inter =
      (ix1 < ix2 && iy1 < iy2) ? static_cast<std::int64_t>(ix2 - ix1) * (iy2 - iy1) : 0;
  const std::int64_t uni = bbox_area(a) + bbox_area(b) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (!(a.size == b.size)) throw std::invalid_argument("mask_iou: size mismatch");
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool fa = a.bits[i] != 0;
    const bool fb = b.bits[i] != 0;
    inter += (fa && fb) ? 1 : 0;
    uni += (fa || fb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<BBox> mask_to_bbox(const BinaryMask& m) {
  int min_x = m.size.width;
  int min_y = m.size.height;
  int max_x = -1;
  int max_y = -1;
  for (int y = 0; y < m.size.height; ++y) {
    for (int x = 0; x < m.size.width; ++x) {
      if (!m.at(x, y)) continue;
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) return std::nullopt;
  return BBox{min_x, min_y, max_x + 1, max_y + 1};
}

RleRecord rle_encode(const BinaryMask& m) {
  RleRecord r;
  r.width = m.size.width;
  r.height = m.size.height;
  std::uint8_t current = 0;  // runs start with background
  std::int64_t run = 0;
  for (const std::uint8_t bit : m.bits) {
    const std::uint8_t v = bit != 0 ? 1 : 0;
    if (v == current) {
      ++run;
    } else {
      r.runs.push_back(run);
      current = v;
      run = 1;
    }
  }
  r.runs.push_back(run);
  return r;
}

BinaryMask rle_decode(const RleRecord& r) {
  if (r.width < 1 || r.height < 1) {
    throw std::invalid_argument("rle_decode: frame size must be positive");
  }
  const std::int64_t expected = static_cast<std::int64_t>(r.width) * r.height;
  std::int64_t total = 0;
  for (const std::int64_t run : r.runs) {
    if (run < 0) throw std::invalid_argument("rle_decode: negative run length");
    total += run;
  }
  if (total != expected) {
    throw std::invalid_argument("rle_decode: run lengths sum to " + std::to_string(total) +
                                ", expected " + std::to_string(expected));
  }
  BinaryMask m = BinaryMask::empty({r.width, r.height});
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (const std::int64_t run : r.runs) {
    for (std::int64_t i = 0; i < run; ++i) m.bits[pos++] = value;
    value = value ? 0 : 1;
  }
  return m;
}

std::string rle_to_json(const RleRecord& r) {
  nlohmann::json j;
  j["w"] = r.width;
  j["h"] = r.height;
  j["runs"] = r.runs;
  return j.dump();
}

RleRecord rle_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RleRecord r;
  r.width = j.at("w").get<int>();
  r.height = j.at("h").get<int>();
  r.runs = j.at("runs").get<std::vector<std::int64_t>>();
  return r;
}

BinaryMask filled_box_mask(FrameSize size, const BBox& box) {
  if (!box.valid() || box.x2 > size.width || box.y2 > size.height) {
    throw std::invalid_argument("filled_box_mask: box outside frame");
  }
  BinaryMask m = BinaryMask::empty(size);
  for (int y = box.y1; y < box.y2; ++y) {
    for (int x = box.x1; x < box.x2; ++x) m.set(x, y, true);
  }
  return m;
}

}  // namespace revseg
