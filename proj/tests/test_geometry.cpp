// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "revseg/geometry.hpp"
#include "revseg/rng.hpp"

using namespace revseg;

namespace {

// Independent pixel-count route: rasterize both boxes in a grid.
double bbox_iou_pixel_oracle(const BBox& a, const BBox& b) {
  const int w = std::max(a.x2, b.x2) + 1;
  const int h = std::max(a.y2, b.y2) + 1;
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in_a = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
      const bool in_b = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
      inter += (in_a && in_b) ? 1 : 0;
      uni += (in_a || in_b) ? 1 : 0;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou_pixel_oracle(const BinaryMask& a, const BinaryMask& b) {
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (int y = 0; y < a.size.height; ++y) {
    for (int x = 0; x < a.size.width; ++x) {
      inter += (a.at(x, y) && b.at(x, y)) ? 1 : 0;
      uni += (a.at(x, y) || b.at(x, y)) ? 1 : 0;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask random_mask(RngStream& rng, int max_side = 16) {
  const int w = rng.uniform_int(1, max_side);
  const int h = rng.uniform_int(1, max_side);
  BinaryMask m = BinaryMask::empty({w, h});
  for (auto& bit : m.bits) bit = rng.bernoulli(0.4) ? 1 : 0;
  return m;
}

BBox random_valid_box(RngStream& rng, int extent = 50) {
  const int x1 = rng.uniform_int(0, extent - 2);
  const int y1 = rng.uniform_int(0, extent - 2);
  return BBox{x1, y1, rng.uniform_int(x1 + 1, extent), rng.uniform_int(y1 + 1, extent)};
}

}  // namespace

TEST_CASE("bbox_area") {
  CHECK(bbox_area({0, 0, 10, 10}) == 100);
  CHECK(bbox_area({2, 3, 6, 8}) == 20);
  CHECK(bbox_area({0, 0, 1, 1}) == 1);
}

TEST_CASE("bbox_iou basics") {
  CHECK(bbox_iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
  CHECK(bbox_iou({0, 0, 10, 10}, {20, 20, 30, 30}) == doctest::Approx(0.0));
  // intersection 50, union 150
  const BBox a{0, 0, 10, 10};
  const BBox b{5, 0, 15, 10};
  CHECK(bbox_iou(a, b) == doctest::Approx(bbox_iou_pixel_oracle(a, b)));
  CHECK(bbox_iou(a, b) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("bbox_iou identity and symmetry over random boxes") {
  RngStream rng(11);
  for (int i = 0; i < 1000; ++i) {
    const BBox a = random_valid_box(rng);
    const BBox b = random_valid_box(rng);
    CHECK(bbox_iou(a, a) == doctest::Approx(1.0));
    CHECK(bbox_iou(a, b) == doctest::Approx(bbox_iou(b, a)));
  }
}

TEST_CASE("bbox_iou matches the pixel-count oracle") {
  RngStream rng(12);
  for (int i = 0; i < 200; ++i) {
    const BBox a = random_valid_box(rng, 24);
    const BBox b = random_valid_box(rng, 24);
    CHECK(bbox_iou(a, b) == doctest::Approx(bbox_iou_pixel_oracle(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("mask_iou") {
  BinaryMask sq = BinaryMask::empty({100, 100});
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) sq.set(x, y, true);
  }
  BinaryMask shifted = BinaryMask::empty({100, 100});
  for (int y = 0; y < 10; ++y) {
    for (int x = 2; x < 12; ++x) shifted.set(x, y, true);
  }
  CHECK(mask_iou(sq, sq) == doctest::Approx(1.0));
  CHECK(mask_iou(sq, shifted) == doctest::Approx(80.0 / 120.0));
  CHECK(mask_iou(BinaryMask::empty({4, 4}), BinaryMask::empty({4, 4})) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mask_iou(sq, BinaryMask::empty({4, 4})), std::invalid_argument);
}

TEST_CASE("mask_iou equals brute force on small random masks") {
  RngStream rng(13);
  for (int i = 0; i < 500; ++i) {
    const int w = rng.uniform_int(1, 16);
    const int h = rng.uniform_int(1, 16);
    BinaryMask a = BinaryMask::empty({w, h});
    BinaryMask b = BinaryMask::empty({w, h});
    for (auto& bit : a.bits) bit = rng.bernoulli(0.4) ? 1 : 0;
    for (auto& bit : b.bits) bit = rng.bernoulli(0.4) ? 1 : 0;
    CHECK(mask_iou(a, b) == doctest::Approx(mask_iou_pixel_oracle(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("mask_to_bbox") {
  BinaryMask m = BinaryMask::empty({10, 10});
  m.set(2, 3, true);
  m.set(5, 7, true);
  CHECK(mask_to_bbox(m) == BBox{2, 3, 6, 8});
  CHECK(!mask_to_bbox(BinaryMask::empty({10, 10})).has_value());

  BinaryMask full = BinaryMask::empty({4, 4});
  for (auto& bit : full.bits) bit = 1;
  CHECK(mask_to_bbox(full) == BBox{0, 0, 4, 4});
}

TEST_CASE("mask_to_bbox is tight and covering") {
  RngStream rng(14);
  for (int i = 0; i < 300; ++i) {
    const BinaryMask m = random_mask(rng);
    const auto box = mask_to_bbox(m);
    if (!box) {
      CHECK(m.foreground_count() == 0);
      continue;
    }
    bool edge_left = false, edge_right = false, edge_top = false, edge_bottom = false;
    for (int y = 0; y < m.size.height; ++y) {
      for (int x = 0; x < m.size.width; ++x) {
        if (!m.at(x, y)) continue;
        CHECK(x >= box->x1);
        CHECK(x < box->x2);
        CHECK(y >= box->y1);
        CHECK(y < box->y2);
        edge_left = edge_left || x == box->x1;
        edge_right = edge_right || x == box->x2 - 1;
        edge_top = edge_top || y == box->y1;
        edge_bottom = edge_bottom || y == box->y2 - 1;
      }
    }
    // no tighter box exists: every side touches a foreground pixel
    CHECK(edge_left);
    CHECK(edge_right);
    CHECK(edge_top);
    CHECK(edge_bottom);
  }
}

TEST_CASE("rle encode/decode fixed cases") {
  const BinaryMask empty2 = BinaryMask::empty({2, 2});
  CHECK(rle_encode(empty2).runs == std::vector<std::int64_t>{4});

  BinaryMask full2 = BinaryMask::empty({2, 2});
  for (auto& bit : full2.bits) bit = 1;
  CHECK(rle_encode(full2).runs == std::vector<std::int64_t>{0, 4});
}

TEST_CASE("rle round trip and canonical encoding") {
  RngStream rng(15);
  for (int i = 0; i < 1000; ++i) {
    const BinaryMask m = random_mask(rng, 24);
    const RleRecord r = rle_encode(m);
    CHECK(rle_decode(r) == m);
    // unique encoding: only the leading background run may be zero
    for (std::size_t k = 1; k < r.runs.size(); ++k) CHECK(r.runs[k] > 0);
    // json text form round-trips bit-exactly
    CHECK(rle_from_json(rle_to_json(r)) == r);
  }
}

TEST_CASE("rle_decode rejects bad input") {
  CHECK_THROWS_AS(rle_decode({2, 2, {3}}), std::invalid_argument);
  CHECK_THROWS_AS(rle_decode({2, 2, {5}}), std::invalid_argument);
  CHECK_THROWS_AS(rle_decode({2, 2, {-1, 5}}), std::invalid_argument);
  CHECK_NOTHROW(rle_decode({2, 2, {0, 4}}));
}
