// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace revseg {

struct FrameSize {
  int width = 0;
  int height = 0;

  bool valid() const { return width >= 1 && height >= 1; }
  bool operator==(const FrameSize&) const = default;
};

/// Axis-aligned pixel box with half-open extents [x1,x2) x [y1,y2).
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  bool valid() const { return x1 >= 0 && y1 >= 0 && x1 < x2 && y1 < y2; }
  bool operator==(const BBox&) const = default;
};

/// Row-major foreground bitmap. bits.size() == width*height, values 0/1.
struct BinaryMask {
  FrameSize size;
  std::vector<std::uint8_t> bits;

  static BinaryMask empty(FrameSize s);
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * size.width + x] != 0; }
  void set(int x, int y, bool v) {
    bits[static_cast<std::size_t>(y) * size.width + x] = v ? 1 : 0;
  }
  std::int64_t foreground_count() const;
  bool operator==(const BinaryMask&) const = default;
};

struct MaskSequence {
  std::vector<BinaryMask> frames;

  bool valid() const;
};

/// Run-length encoding of a BinaryMask. Runs alternate background/foreground
/// starting with background (the first run may be 0).
struct RleRecord {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> runs;

  bool operator==(const RleRecord&) const = default;
};

std::int64_t bbox_area(const BBox& b);
double bbox_iou(const BBox& a, const BBox& b);

/// IoU of two equal-sized masks; 1.0 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Tight half-open box over all foreground pixels; nullopt for an empty mask.
std::optional<BBox> mask_to_bbox(const BinaryMask& m);

RleRecord rle_encode(const BinaryMask& m);
BinaryMask rle_decode(const RleRecord& r);

// Bit-exact JSON text form: {"w":W,"h":H,"runs":[...]}.
std::string rle_to_json(const RleRecord& r);
RleRecord rle_from_json(const std::string& text);

BinaryMask filled_box_mask(FrameSize size, const BBox& box);

}  // namespace revseg
