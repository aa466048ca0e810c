// SPDX-License-Identifier: Apache-2.0
#include "revseg/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace revseg {
namespace {

constexpr char kB64Table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

nlohmann::json history_json(const std::vector<ChatTurn>& history) {
  auto arr = nlohmann::json::array();
  for (const ChatTurn& t : history) arr.push_back({{"role", t.role}, {"text", t.text}});
  return arr;
}

// POSTs JSON with retries; returns the response body on HTTP < 400.
std::string post_json(const std::string& base_url, const std::string& path,
                      const std::string& body, const HttpOptions& options) {
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    httplib::Client client(base_url);
    client.set_connection_timeout(std::chrono::duration<double>(options.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(options.timeout_seconds));
    client.set_write_timeout(std::chrono::duration<double>(options.timeout_seconds));
    auto res = client.Post(path, body, "application/json");
    if (res && res->status < 400) return res->body;
    if (res) {
      last_error = "HTTP " + std::to_string(res->status) + " from " + base_url + path;
    } else {
      last_error = "transport error (" + httplib::to_string(res.error()) + ") for " + base_url +
                   path;
    }
  }
  throw TransportError(last_error + " after " + std::to_string(options.max_retries + 1) +
                       " attempts");
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                            (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                            static_cast<unsigned char>(bytes[i + 2]);
    out += kB64Table[(v >> 18) & 63];
    out += kB64Table[(v >> 12) & 63];
    out += kB64Table[(v >> 6) & 63];
    out += kB64Table[v & 63];
    i += 3;
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    out += kB64Table[(v >> 18) & 63];
    out += kB64Table[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                            (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kB64Table[(v >> 18) & 63];
    out += kB64Table[(v >> 12) & 63];
    out += kB64Table[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  int buffer = 0;
  int bits = 0;
  for (const char c : text) {
    if (c == '=') break;
    const int v = value_of(c);
    if (v < 0) throw std::invalid_argument("base64_decode: invalid character");
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((buffer >> bits) & 0xff);
    }
  }
  return out;
}

HttpPolicyClient::HttpPolicyClient(std::string base_url, HttpOptions options)
    : base_url_(std::move(base_url)), options_(options) {}

std::string HttpPolicyClient::generate(const PolicyContext& ctx) {
  nlohmann::json body;
  body["round"] = ctx.round;
  body["prompt"] = ctx.prompt;
  auto images = nlohmann::json::array();
  for (const std::string& img : ctx.images) images.push_back(base64_encode(img));
  body["images"] = images;
  body["history"] = history_json(ctx.history);

  const std::string resp = post_json(base_url_, "/generate", body.dump(), options_);
  const auto j = nlohmann::json::parse(resp, nullptr, false);
  if (j.is_discarded() || !j.contains("text") || !j["text"].is_string()) {
    throw TransportError("policy endpoint returned malformed body");
  }
  return j["text"].get<std::string>();
}

HttpTrackerClient::HttpTrackerClient(std::string base_url, HttpOptions options)
    : base_url_(std::move(base_url)), options_(options) {}

MaskSequence HttpTrackerClient::propagate(const TrackerFrames& frames,
                                          int keyframe_original_index, const BBox& box_original) {
  nlohmann::json body;
  if (!frames.images.empty()) {
    auto arr = nlohmann::json::array();
    for (const std::string& img : frames.images) arr.push_back(base64_encode(img));
    body["frames"] = arr;
  } else {
    body["frames"] = {{"manifest_ref", frames.manifest_ref}};
  }
  body["keyframe"] = keyframe_original_index;
  body["bbox"] = {box_original.x1, box_original.y1, box_original.x2, box_original.y2};

  const std::string resp = post_json(base_url_, "/propagate", body.dump(), options_);
  const auto j = nlohmann::json::parse(resp, nullptr, false);
  if (j.is_discarded() || !j.contains("masks") || !j["masks"].is_array()) {
    throw TransportError("tracker endpoint returned malformed body");
  }
  MaskSequence seq;
  try {
    for (const auto& m : j["masks"]) {
      RleRecord r;
      r.width = m.at("w").get<int>();
      r.height = m.at("h").get<int>();
      r.runs = m.at("runs").get<std::vector<std::int64_t>>();
      seq.frames.push_back(rle_decode(r));
    }
  } catch (const std::exception& e) {
    throw TransportError(std::string("tracker endpoint returned bad mask: ") + e.what());
  }
  if (seq.frames.empty()) throw TransportError("tracker endpoint returned no masks");
  return seq;
}

ScriptedPolicy::ScriptedPolicy(std::vector<Rule> rules, std::uint64_t seed,
                               std::string default_response)
    : rules_(std::move(rules)), rng_(seed), default_response_(std::move(default_response)) {}

std::string ScriptedPolicy::generate(const PolicyContext& ctx) {
  for (const Rule& rule : rules_) {
    if (rule.round != 0 && rule.round != ctx.round) continue;
    if (!rule.prompt_contains.empty() &&
        ctx.prompt.find(rule.prompt_contains) == std::string::npos) {
      continue;
    }
    if (rule.responses.empty()) break;
    if (rule.responses.size() == 1) return rule.responses[0];
    return rule.responses[rng_.uniform_int(0, static_cast<int>(rule.responses.size()) - 1)];
  }
  return default_response_;
}

OraclePolicy::OraclePolicy(EpisodeGroundTruth gt, FrameSize source_size,
                           FrameSize round2_image_size, std::string description)
    : gt_(std::move(gt)),
      source_size_(source_size),
      round2_size_(round2_image_size),
      description_(std::move(description)) {
  std::int64_t best_area = -1;
  for (std::size_t t = 0; t < gt_.boxes.size(); ++t) {
    if (!gt_.boxes[t]) continue;
    const std::int64_t area = bbox_area(*gt_.boxes[t]);
    if (area > best_area) {
      best_area = area;
      keyframe_ = static_cast<int>(t);
    }
  }
  if (keyframe_ < 0) throw std::invalid_argument("OraclePolicy: target never visible");
}

std::string OraclePolicy::generate(const PolicyContext& ctx) {
  if (ctx.round == 1) {
    return "<think>The target is largest and unoccluded at frame " + std::to_string(keyframe_) +
           ".</think><answer>{\"keyframe\": " + std::to_string(keyframe_) + ", \"object\": \"" +
           description_ + "\"}</answer>";
  }
  const BBox box = rescale_box(*gt_.boxes[keyframe_], source_size_, round2_size_);
  return "<think>The " + description_ + " sits exactly there.</think><answer>{\"bbox\": [" +
         std::to_string(box.x1) + ", " + std::to_string(box.y1) + ", " + std::to_string(box.x2) +
         ", " + std::to_string(box.y2) + "]}</answer>";
}

OracleTracker::OracleTracker(MaskSequence gt_masks) : gt_masks_(std::move(gt_masks)) {
  if (!gt_masks_.valid()) throw std::invalid_argument("OracleTracker: invalid ground truth");
}

MaskSequence OracleTracker::propagate(const TrackerFrames& frames, int keyframe_original_index,
                                      const BBox& box_original) {
  (void)frames;
  if (keyframe_original_index < 0 ||
      keyframe_original_index >= static_cast<int>(gt_masks_.frames.size())) {
    throw TransportError("OracleTracker: keyframe outside stored video");
  }
  const auto gt_box = mask_to_bbox(gt_masks_.frames[keyframe_original_index]);
  const bool good_seed = gt_box && bbox_iou(box_original, *gt_box) > 0.5;
  if (good_seed) return gt_masks_;
  MaskSequence empty;
  for (const BinaryMask& m : gt_masks_.frames) empty.frames.push_back(BinaryMask::empty(m.size));
  return empty;
}

}  // namespace revseg
