// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "revseg/curation.hpp"
#include "revseg/rng.hpp"

using namespace revseg;

namespace {

RleRecord rle_of(const BinaryMask& m) { return rle_encode(m); }

VideoRecord make_video(const std::string& id, int frames, FrameSize size) {
  VideoRecord v;
  v.id = id;
  v.fps = 24.0;
  v.num_frames = frames;
  v.size = size;
  return v;
}

// Row of `len` foreground pixels starting at the top-left.
BinaryMask row_mask(FrameSize size, int len) {
  BinaryMask m = BinaryMask::empty(size);
  for (int x = 0; x < len; ++x) m.set(x, 0, true);
  return m;
}

// Tracker that returns a fixed fraction of each query's annotated pixels,
// in row-major order, so the per-frame IoU is exactly that fraction.
class FractionTracker : public TrackerInterface {
 public:
  FractionTracker(const VideoManifest& manifest, std::map<std::string, int> kept_pixels)
      : manifest_(&manifest), kept_(std::move(kept_pixels)) {}

  MaskSequence propagate(const TrackerFrames& frames, int, const BBox&) override {
    const auto hash = frames.manifest_ref.find('#');
    const std::string id = frames.manifest_ref.substr(0, hash);
    const int qi = std::stoi(frames.manifest_ref.substr(hash + 1));
    for (const VideoRecord& v : manifest_->videos) {
      if (v.id != id) continue;
      MaskSequence seq;
      for (const auto& rle : v.queries[qi].masks) {
        BinaryMask m = rle ? rle_decode(*rle) : BinaryMask::empty(v.size);
        int budget = kept_.at(id);
        for (auto& bit : m.bits) {
          if (bit && budget > 0) {
            --budget;
          } else {
            bit = 0;
          }
        }
        seq.frames.push_back(std::move(m));
      }
      return seq;
    }
    throw TransportError("unknown video");
  }

 private:
  const VideoManifest* manifest_;
  std::map<std::string, int> kept_;
};

class ThrowingTracker : public TrackerInterface {
 public:
  MaskSequence propagate(const TrackerFrames&, int, const BBox&) override {
    throw TransportError("tracker down");
  }
};

VideoManifest designed_corpus() {
  // one video per target mean IoU, one query, one annotated frame of 100 px
  VideoManifest m;
  const FrameSize size{128, 4};
  for (const std::string id : {"iou20", "iou59", "iou60", "iou61", "iou100"}) {
    VideoRecord v = make_video(id, 1, size);
    QueryRecord q;
    q.text = "the marked strip";
    q.masks.push_back(rle_of(row_mask(size, 100)));
    v.queries.push_back(q);
    m.videos.push_back(v);
  }
  return m;
}

}  // namespace

TEST_CASE("manifest round trip") {
  VideoManifest m;
  VideoRecord v = make_video("clip-1", 3, {16, 8});
  QueryRecord q;
  q.text = "the red thing";
  q.masks = {rle_of(row_mask({16, 8}, 5)), std::nullopt, rle_of(BinaryMask::empty({16, 8}))};
  v.queries.push_back(q);
  m.videos.push_back(v);

  const std::string text = manifest_to_json_text(m);
  const VideoManifest back = manifest_from_json_text(text);
  REQUIRE(back.videos.size() == 1);
  CHECK(back.videos[0].id == "clip-1");
  CHECK(back.videos[0].queries[0].masks[0] == m.videos[0].queries[0].masks[0]);
  CHECK(!back.videos[0].queries[0].masks[1].has_value());

  const auto path = std::filesystem::temp_directory_path() / "revseg_manifest_test.json";
  write_manifest(m, path.string());
  const VideoManifest loaded = load_manifest(path.string());
  CHECK(manifest_to_json_text(loaded) == text);
  std::filesystem::remove(path);
}

TEST_CASE("manifest schema violations carry field paths") {
  SUBCASE("missing fps") {
    const std::string text =
        R"({"videos":[{"id":"a","num_frames":1,"width":4,"height":4,"queries":[]}]})";
    try {
      manifest_from_json_text(text);
      FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
      CHECK(std::string(e.what()).find("videos[0].fps") != std::string::npos);
    }
  }
  SUBCASE("bad rle runs") {
    const std::string text =
        R"({"videos":[{"id":"a","fps":1,"num_frames":1,"width":4,"height":1,
            "queries":[{"text":"t","masks":[{"w":4,"h":1,"runs":[9]}]}]}]})";
    CHECK_THROWS_AS(manifest_from_json_text(text), ManifestError);
  }
  SUBCASE("mask length mismatch") {
    const std::string text =
        R"({"videos":[{"id":"a","fps":1,"num_frames":2,"width":4,"height":1,
            "queries":[{"text":"t","masks":[null]}]}]})";
    try {
      manifest_from_json_text(text);
      FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
      CHECK(std::string(e.what()).find("queries[0].masks") != std::string::npos);
    }
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_manifest("/nonexistent/m.json"), ManifestError); }
}

TEST_CASE("masks_to_boxes") {
  VideoManifest m;
  VideoRecord v = make_video("clip", 3, {32, 16});
  QueryRecord empty_query;
  empty_query.text = "never visible";
  empty_query.masks = {rle_of(BinaryMask::empty({32, 16})), std::nullopt,
                       rle_of(BinaryMask::empty({32, 16}))};
  QueryRecord blob_query;
  blob_query.text = "a 4x5 blob";
  BinaryMask blob = BinaryMask::empty({32, 16});
  for (int y = 3; y < 8; ++y) {
    for (int x = 10; x < 14; ++x) blob.set(x, y, true);
  }
  blob_query.masks = {std::nullopt, rle_of(blob), std::nullopt};
  v.queries = {empty_query, blob_query};
  m.videos.push_back(v);

  const auto out = masks_to_boxes(m);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].size() == 2);
  CHECK(out[0][0].areas.areas == std::vector<std::int64_t>{0, 0, 0});
  CHECK(!out[0][0].boxes[0].has_value());
  CHECK(out[0][1].areas.areas == std::vector<std::int64_t>{0, 20, 0});
  CHECK(out[0][1].boxes[1] == BBox{10, 3, 14, 8});
}

TEST_CASE("tracker_filter keep/discard basics") {
  VideoManifest m = designed_corpus();

  SUBCASE("oracle tracker keeps everything at mean 1.0") {
    ManifestOracleTracker oracle(m);
    const CurationResult r = tracker_filter(m, oracle, 0.6);
    CHECK(r.curated.videos.size() == m.videos.size());
    for (const auto& d : r.decisions) {
      CHECK(d.keep);
      CHECK(d.query_mean_ious[0] == doctest::Approx(1.0));
    }
  }
  SUBCASE("empty tracker masks discard everything") {
    FractionTracker none(m, {{"iou20", 0}, {"iou59", 0}, {"iou60", 0}, {"iou61", 0}, {"iou100", 0}});
    const CurationResult r = tracker_filter(m, none, 0.6);
    CHECK(r.curated.videos.empty());
    for (const auto& d : r.decisions) CHECK(d.query_mean_ious[0] == doctest::Approx(0.0));
  }
  SUBCASE("tracker failures score zero and discard") {
    ThrowingTracker down;
    const CurationResult r = tracker_filter(m, down, 0.6);
    CHECK(r.curated.videos.empty());
  }
  SUBCASE("half-overlap masks give IoU 1/3 and discard") {
    // prediction shifted by half its length: intersection 50, union 150
    class ShiftTracker : public TrackerInterface {
     public:
      MaskSequence propagate(const TrackerFrames& f, int, const BBox&) override {
        MaskSequence seq;
        BinaryMask mask = BinaryMask::empty(f.size);
        for (int x = 50; x < 150 && x < f.size.width; ++x) mask.set(x % f.size.width, 0, true);
        seq.frames.push_back(std::move(mask));
        return seq;
      }
    } shift;
    VideoManifest wide;
    VideoRecord v = make_video("w", 1, {256, 4});
    QueryRecord q;
    q.text = "strip";
    q.masks.push_back(rle_of(row_mask({256, 4}, 100)));
    v.queries.push_back(q);
    wide.videos.push_back(v);
    const CurationResult r = tracker_filter(wide, shift, 0.6);
    CHECK(r.decisions[0].query_mean_ious[0] == doctest::Approx(1.0 / 3.0));
    CHECK(r.curated.videos.empty());
  }
}

TEST_CASE("threshold boundary is strict: exactly 0.6 is kept") {
  VideoManifest m = designed_corpus();
  FractionTracker designed(
      m, {{"iou20", 20}, {"iou59", 59}, {"iou60", 60}, {"iou61", 61}, {"iou100", 100}});
  const CurationResult r = tracker_filter(m, designed, 0.6);

  REQUIRE(r.decisions.size() == 5);
  CHECK(r.decisions[0].query_mean_ious[0] == doctest::Approx(0.20));
  CHECK(r.decisions[1].query_mean_ious[0] == doctest::Approx(0.59));
  CHECK(r.decisions[2].query_mean_ious[0] == doctest::Approx(0.60));
  CHECK(r.decisions[3].query_mean_ious[0] == doctest::Approx(0.61));
  CHECK(r.decisions[4].query_mean_ious[0] == doctest::Approx(1.00));

  CHECK(!r.decisions[0].keep);
  CHECK(!r.decisions[1].keep);
  CHECK(r.decisions[2].keep);
  CHECK(r.decisions[3].keep);
  CHECK(r.decisions[4].keep);
  REQUIRE(r.curated.videos.size() == 3);
  CHECK(r.curated.videos[0].id == "iou60");
}

TEST_CASE("discard is video-granular: one bad query removes all queries") {
  const FrameSize size{128, 4};
  VideoManifest m;
  VideoRecord v = make_video("two-queries", 1, size);
  QueryRecord good;
  good.text = "good";
  good.masks.push_back(rle_of(row_mask(size, 100)));
  QueryRecord also_good = good;
  also_good.text = "also good";
  v.queries = {good, also_good};
  m.videos.push_back(v);

  // tracker nails query 0 but misses query 1
  class SplitTracker : public TrackerInterface {
   public:
    explicit SplitTracker(const VideoManifest& m) : oracle_(m) {}
    MaskSequence propagate(const TrackerFrames& f, int k, const BBox& b) override {
      if (f.manifest_ref.ends_with("#0")) return oracle_.propagate(f, k, b);
      MaskSequence seq;
      seq.frames.push_back(BinaryMask::empty(f.size));
      return seq;
    }
   private:
    ManifestOracleTracker oracle_;
  } tracker(m);

  const CurationResult r = tracker_filter(m, tracker, 0.6);
  CHECK(r.decisions[0].query_mean_ious[0] == doctest::Approx(1.0));
  CHECK(r.decisions[0].query_mean_ious[1] == doctest::Approx(0.0));
  CHECK(!r.decisions[0].keep);
  CHECK(r.curated.videos.empty());
}

TEST_CASE("curated manifest is a verbatim subset of the input") {
  VideoManifest m = designed_corpus();
  FractionTracker designed(
      m, {{"iou20", 20}, {"iou59", 100}, {"iou60", 60}, {"iou61", 61}, {"iou100", 100}});
  const CurationResult r = tracker_filter(m, designed, 0.6);
  for (const VideoRecord& v : r.curated.videos) {
    bool found = false;
    for (const VideoRecord& orig : m.videos) {
      if (orig.id != v.id) continue;
      found = true;
      CHECK(manifest_to_json_text({{v}}) == manifest_to_json_text({{orig}}));
    }
    CHECK(found);
  }
}

TEST_CASE("queries with no visible frames carry no evidence and are kept") {
  const FrameSize size{16, 4};
  VideoManifest m;
  VideoRecord v = make_video("ghost", 2, size);
  QueryRecord q;
  q.text = "never there";
  q.masks = {std::nullopt, rle_of(BinaryMask::empty(size))};
  v.queries.push_back(q);
  m.videos.push_back(v);

  ThrowingTracker down;  // must never be consulted
  const CurationResult r = tracker_filter(m, down, 0.6);
  CHECK(r.decisions[0].keep);
  CHECK(r.curated.videos.size() == 1);
}
