// SPDX-License-Identifier: Apache-2.0
#include "revseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace revseg {
namespace {

constexpr int kMinTargetSide = 40;
constexpr int kMaxTargetSide = 400;
// Box-head feature units. Small offsets keep the box softmax soft for many
// steps, so spatial success stays an unreliable visibility proxy while the
// temporal reward variants are compared.
constexpr double kBoxFeatureScale = 0.3;
// Post-noise score margin between the correct candidate and every distractor.
constexpr double kSeparationMargin = 0.08;
constexpr double kCleanSeparation = 0.09;

double feature_sum(const std::vector<double>& f) { return f[0] + f[1]; }

BBox random_box(RngStream& rng, FrameSize size) {
  const int w = rng.uniform_int(kMinTargetSide, std::min(kMaxTargetSide, size.width - 1));
  const int h = rng.uniform_int(kMinTargetSide, std::min(kMaxTargetSide, size.height - 1));
  const int x1 = rng.uniform_int(0, size.width - w);
  const int y1 = rng.uniform_int(0, size.height - h);
  return BBox{x1, y1, x1 + w, y1 + h};
}

// Clean [center offset, size offset] of a box against an anchor box. The
// center offset is normalized by the frame diagonal so distractor separation
// does not depend on the target's size.
std::vector<double> offset_features(const BBox& box, const BBox& anchor, FrameSize frame) {
  const double acx = 0.5 * (anchor.x1 + anchor.x2);
  const double acy = 0.5 * (anchor.y1 + anchor.y2);
  const double bcx = 0.5 * (box.x1 + box.x2);
  const double bcy = 0.5 * (box.y1 + box.y2);
  const double diag =
      std::sqrt(static_cast<double>(frame.width) * frame.width +
                static_cast<double>(frame.height) * frame.height);
  const double center = 3.0 * std::hypot(bcx - acx, bcy - acy) / diag;
  const double size =
      std::fabs(std::log(static_cast<double>(bbox_area(box)) / bbox_area(anchor))) / std::log(16.0);
  return {kBoxFeatureScale * std::min(center, 2.0), kBoxFeatureScale * std::min(size, 2.0)};
}

BBox jittered_box(RngStream& rng, const BBox& gt, FrameSize size) {
  const int w = gt.x2 - gt.x1;
  const int h = gt.y2 - gt.y1;
  for (int tries = 0; tries < 64; ++tries) {
    const int dx = rng.uniform_int(-w / 12 - 1, w / 12 + 1);
    const int dy = rng.uniform_int(-h / 12 - 1, h / 12 + 1);
    const int dw = rng.uniform_int(-w / 16 - 1, w / 16 + 1);
    const int dh = rng.uniform_int(-h / 16 - 1, h / 16 + 1);
    BBox b{gt.x1 + dx, gt.y1 + dy, gt.x2 + dx + dw, gt.y2 + dy + dh};
    b.x1 = std::clamp(b.x1, 0, size.width - 1);
    b.y1 = std::clamp(b.y1, 0, size.height - 1);
    b.x2 = std::clamp(b.x2, b.x1 + 1, size.width);
    b.y2 = std::clamp(b.y2, b.y1 + 1, size.height);
    if (b.valid() && bbox_iou(b, gt) > 0.55) return b;
  }
  return gt;
}

std::vector<double> noisy(RngStream& rng, std::vector<double> f, double sigma) {
  for (double& v : f) v += rng.normal(0.0, sigma);
  return f;
}

}  // namespace

SyntheticEpisode generate_episode(std::uint64_t seed, const SyntheticLabConfig& cfg) {
  if (cfg.num_frames < 1 || cfg.num_candidates < 2 || !cfg.frame_size.valid()) {
    throw std::invalid_argument("generate_episode: bad lab config");
  }
  RngStream rng(derive_seed(seed, "synthetic-episode"));
  SyntheticEpisode ep;
  ep.seed = seed;
  ep.frame_size = cfg.frame_size;

  // Visibility pattern, rejection-resampled until some frame is visible.
  std::vector<bool> visible(cfg.num_frames);
  while (true) {
    bool any = false;
    for (int t = 0; t < cfg.num_frames; ++t) {
      visible[t] = !rng.bernoulli(cfg.occlusion_rate);
      any = any || visible[t];
    }
    if (any) break;
  }

  std::vector<std::optional<BBox>> gt_boxes(cfg.num_frames);
  std::vector<std::int64_t> areas(cfg.num_frames, 0);
  for (int t = 0; t < cfg.num_frames; ++t) {
    if (!visible[t]) continue;
    gt_boxes[t] = random_box(rng, cfg.frame_size);
    areas[t] = bbox_area(*gt_boxes[t]);
  }
  const std::int64_t max_area = *std::max_element(areas.begin(), areas.end());

  for (int t = 0; t < cfg.num_frames; ++t) {
    SyntheticFrame frame;
    frame.gt_box = gt_boxes[t];
    // The size reading on an occluded frame is clutter, not zero; its mean
    // matches the visible distribution so size does not leak visibility.
    const double size_reading =
        visible[t] ? static_cast<double>(areas[t]) / static_cast<double>(max_area)
                   : rng.uniform(0.0, 0.7);
    frame.features = noisy(rng, {size_reading, visible[t] ? 1.0 : 0.0}, cfg.feature_noise);

    // The anchor is what the policy "sees": the true box on visible frames,
    // an uninformative random box on occluded ones.
    const BBox anchor = visible[t] ? *gt_boxes[t] : random_box(rng, cfg.frame_size);

    if (visible[t]) {
      CandidateBox correct;
      correct.box = jittered_box(rng, *gt_boxes[t], cfg.frame_size);
      correct.features = noisy(rng, offset_features(correct.box, anchor, cfg.frame_size), cfg.feature_noise);
      const double correct_sum = feature_sum(correct.features);

      frame.candidates.push_back(correct);
      for (int c = 1; c < cfg.num_candidates; ++c) {
        CandidateBox d;
        for (int tries = 0;; ++tries) {
          d.box = random_box(rng, cfg.frame_size);
          if (bbox_iou(d.box, *gt_boxes[t]) > 0.5) continue;
          const auto clean = offset_features(d.box, anchor, cfg.frame_size);
          if (feature_sum(clean) < correct_sum + kCleanSeparation && tries < 64) continue;
          d.features = noisy(rng, clean, cfg.feature_noise);
          const double deficit = correct_sum + kSeparationMargin - feature_sum(d.features);
          if (deficit > 0.0) d.features[0] += deficit;  // keep the ordering guarantee
          break;
        }
        frame.candidates.push_back(d);
      }
      // Shuffle so the correct candidate's position is uniform.
      frame.correct_candidate = 0;
      for (int c = cfg.num_candidates - 1; c > 0; --c) {
        const int swap_with = rng.uniform_int(0, c);
        std::swap(frame.candidates[c], frame.candidates[swap_with]);
        if (frame.correct_candidate == swap_with) {
          frame.correct_candidate = c;
        } else if (frame.correct_candidate == c) {
          frame.correct_candidate = swap_with;
        }
      }
    } else {
      for (int c = 0; c < cfg.num_candidates; ++c) {
        CandidateBox d;
        d.box = random_box(rng, cfg.frame_size);
        d.features = noisy(rng, offset_features(d.box, anchor, cfg.frame_size), cfg.feature_noise);
        frame.candidates.push_back(d);
      }
    }
    ep.frames.push_back(std::move(frame));
  }
  return ep;
}

ToyPolicy ToyPolicy::zeros() {
  ToyPolicy p;
  p.frame_weights.assign(kFrameFeatureDim, 0.0);
  p.box_weights.assign(kBoxFeatureDim, 0.0);
  return p;
}

PolicyParams ToyPolicy::params() const {
  PolicyParams p;
  p.theta = frame_weights;
  p.theta.insert(p.theta.end(), box_weights.begin(), box_weights.end());
  return p;
}

ToyPolicy ToyPolicy::from_params(const PolicyParams& p) {
  if (p.theta.size() != kFrameFeatureDim + kBoxFeatureDim) {
    throw std::invalid_argument("ToyPolicy::from_params: wrong parameter count");
  }
  ToyPolicy t;
  t.frame_weights.assign(p.theta.begin(), p.theta.begin() + kFrameFeatureDim);
  t.box_weights.assign(p.theta.begin() + kFrameFeatureDim, p.theta.end());
  return t;
}

EpisodeFeatures episode_features(const SyntheticEpisode& ep) {
  EpisodeFeatures f;
  for (const SyntheticFrame& frame : ep.frames) {
    f.frame_features.push_back(frame.features);
    std::vector<std::vector<double>> cands;
    for (const CandidateBox& c : frame.candidates) cands.push_back(c.features);
    f.box_features.push_back(std::move(cands));
  }
  return f;
}

EpisodeInput episode_input(const SyntheticEpisode& ep) {
  EpisodeInput in;
  in.num_frames = ep.num_frames();
  in.original_frame_indices.resize(in.num_frames);
  std::iota(in.original_frame_indices.begin(), in.original_frame_indices.end(), 0);
  in.query = "the synthetic target";
  in.fps = 8.0;
  in.total_source_frames = in.num_frames;
  in.source_size = ep.frame_size;
  in.video_id = "synthetic-" + std::to_string(ep.seed);
  return in;
}

EpisodeGroundTruth episode_ground_truth(const SyntheticEpisode& ep) {
  std::vector<std::optional<BBox>> boxes;
  for (const SyntheticFrame& f : ep.frames) boxes.push_back(f.gt_box);
  return EpisodeGroundTruth::from_boxes(std::move(boxes));
}

MaskSequence synthetic_gt_masks(const SyntheticEpisode& ep) {
  MaskSequence seq;
  for (const SyntheticFrame& f : ep.frames) {
    seq.frames.push_back(f.gt_box ? filled_box_mask(ep.frame_size, *f.gt_box)
                                  : BinaryMask::empty(ep.frame_size));
  }
  return seq;
}

ToyDecision policy_act(const PolicyParams& params, const SyntheticEpisode& ep, RngStream& rng,
                       bool greedy) {
  const EpisodeFeatures feat = episode_features(ep);
  ToyDecision d;
  d.frame_dist = frame_distribution(params, feat);
  d.frame = greedy ? static_cast<int>(std::distance(
                         d.frame_dist.begin(),
                         std::max_element(d.frame_dist.begin(), d.frame_dist.end())))
                   : rng.categorical(d.frame_dist);
  d.box_dist = box_distribution(params, feat, d.frame);
  d.box = greedy ? static_cast<int>(std::distance(
                       d.box_dist.begin(), std::max_element(d.box_dist.begin(), d.box_dist.end())))
                 : rng.categorical(d.box_dist);
  return d;
}

ToyPolicyAdapter::ToyPolicyAdapter(PolicyParams params, const SyntheticEpisode& ep,
                                   std::uint64_t seed, bool greedy, FrameSize round2_image_size)
    : params_(std::move(params)),
      episode_(&ep),
      rng_(seed),
      greedy_(greedy),
      round2_size_(round2_image_size) {}

std::string ToyPolicyAdapter::generate(const PolicyContext& ctx) {
  if (ctx.round == 1) {
    ToyDecision d = policy_act(params_, *episode_, rng_, greedy_);
    const int k = d.frame;
    decisions_.push_back(std::move(d));
    return "<think>frame scores favor frame " + std::to_string(k) +
           "</think><answer>{\"keyframe\": " + std::to_string(k) +
           ", \"object\": \"the synthetic target\"}</answer>";
  }
  if (decisions_.empty()) throw TransportError("round 2 requested before round 1");
  const ToyDecision& d = decisions_.back();
  const BBox source_box = episode_->frames[d.frame].candidates[d.box].box;
  const BBox b = rescale_box(source_box, episode_->frame_size, round2_size_);
  return "<think>candidate " + std::to_string(d.box) + " matches the description</think>" +
         "<answer>{\"bbox\": [" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
         std::to_string(b.x2) + ", " + std::to_string(b.y2) + "]}</answer>";
}

namespace {

// Maps a parsed trace back onto candidate indices. Boxes are matched by IoU;
// with the default 840x840 lab the text round-trip is exact.
GroupAction action_from_trace(const RolloutTrace& trace, const SyntheticEpisode& ep) {
  GroupAction a;
  a.frame = trace.round1.keyframe_index;
  if (!trace.predicted_box_original) {
    throw std::runtime_error("toy rollout lost its box through the text path");
  }
  const auto& cands = ep.frames[a.frame].candidates;
  double best = -1.0;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const double iou = bbox_iou(*trace.predicted_box_original, cands[c].box);
    if (iou > best) {
      best = iou;
      a.box = static_cast<int>(c);
    }
  }
  return a;
}

double soft_frame_quality(const SyntheticEpisode& ep, int k) {
  const GtFrameAreas areas = episode_ground_truth(ep).areas();
  return temporal_reward(TemporalRewardMode::SoftArea, k, areas);
}

}  // namespace

TrainReport train_toy(const GrpoConfig& config, TemporalRewardMode mode,
                      const SyntheticLabConfig& lab, int heldout_episodes) {
  if (config.n < 2) throw std::invalid_argument("train_toy: group size must be >= 2");
  if (config.beta < 0.0) throw std::invalid_argument("train_toy: beta must be >= 0");
  if (config.learning_rate <= 0.0) throw std::invalid_argument("train_toy: learning rate must be > 0");
  if (config.steps < 0) throw std::invalid_argument("train_toy: negative step budget");

  PolicyParams theta = ToyPolicy::zeros().params();
  const PolicyParams ref = theta;

  RolloutOptions opt;
  opt.temporal_mode = mode;

  TrainReport report;
  for (int step = 0; step < config.steps; ++step) {
    const SyntheticEpisode ep = generate_episode(derive_seed(config.seed, "episode", step), lab);
    const EpisodeInput in = episode_input(ep);
    const EpisodeGroundTruth gt = episode_ground_truth(ep);
    const EpisodeFeatures feat = episode_features(ep);

    ToyPolicyAdapter adapter(theta, ep, derive_seed(config.seed, "rollout", step));
    const GroupResult res = run_group(in, adapter, config.n, gt, opt);

    RolloutGroup group;
    group.rewards = res.rewards;
    StepLogRow row;
    row.step = step;
    for (int i = 0; i < config.n; ++i) {
      const RolloutTrace& t = res.traces[i];
      const GroupAction a = action_from_trace(t, ep);
      if (a.frame != adapter.decisions()[i].frame || a.box != adapter.decisions()[i].box) {
        throw std::runtime_error("train_toy: text round-trip disagrees with sampled decision");
      }
      group.actions.push_back(a);
      row.mean_reward += t.reward.total;
      row.mean_r_f += t.reward.r_f;
      row.mean_r_t += t.reward.r_t;
      row.mean_r_s += t.reward.r_s;
      row.frame_acc += ep.frames[a.frame].gt_box ? 1.0 : 0.0;
      row.box_acc += t.reward.r_s;
    }
    row.mean_reward /= config.n;
    row.mean_r_f /= config.n;
    row.mean_r_t /= config.n;
    row.mean_r_s /= config.n;
    row.frame_acc /= config.n;
    row.box_acc /= config.n;
    row.kl = mean_decision_kl(group, theta, ref, feat);
    report.rows.push_back(row);

    const PolicyParams grad = surrogate_gradient(group, theta, ref, config.beta, feat);
    theta = ascent_step(theta, grad, config.learning_rate);
  }

  std::vector<SyntheticEpisode> heldout;
  heldout.reserve(heldout_episodes);
  for (int i = 0; i < heldout_episodes; ++i) {
    heldout.push_back(generate_episode(derive_seed(config.seed, "episode", 1000000 + i), lab));
  }
  report.final_metrics = evaluate_policy(theta, heldout);
  report.final_params = theta;
  return report;
}

EvalMetrics evaluate_policy(const PolicyParams& params,
                            const std::vector<SyntheticEpisode>& episodes) {
  if (episodes.empty()) throw std::invalid_argument("evaluate_policy: no episodes");
  EvalMetrics m;
  RolloutOptions opt;
  opt.temporal_mode = TemporalRewardMode::SoftArea;  // fixed scoring across training modes
  for (const SyntheticEpisode& ep : episodes) {
    ToyPolicyAdapter adapter(params, ep, derive_seed(ep.seed, "eval"), /*greedy=*/true);
    const RolloutTrace trace =
        run_rollout(episode_input(ep), adapter, episode_ground_truth(ep), opt);
    m.frame_quality += soft_frame_quality(ep, trace.round1.keyframe_index);
    m.box_accuracy += trace.reward.r_s;
    m.mean_total_reward += trace.reward.total;
  }
  m.frame_quality /= episodes.size();
  m.box_accuracy /= episodes.size();
  m.mean_total_reward /= episodes.size();
  return m;
}

std::string TrainReport::csv() const {
  std::string out = "step,mean_reward,mean_r_f,mean_r_t,mean_r_s,kl,frame_acc,box_acc\n";
  char buf[256];
  for (const StepLogRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step,
                  r.mean_reward, r.mean_r_f, r.mean_r_t, r.mean_r_s, r.kl, r.frame_acc, r.box_acc);
    out += buf;
  }
  return out;
}

std::string TrainReport::metrics_json() const {
  nlohmann::json j;
  j["frame_quality"] = final_metrics.frame_quality;
  j["box_accuracy"] = final_metrics.box_accuracy;
  j["mean_total_reward"] = final_metrics.mean_total_reward;
  j["steps"] = rows.size();
  return j.dump(2);
}

std::string TrainReport::reward_curve_svg() const {
  const int width = 800;
  const int height = 300;
  const int margin = 40;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                    "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", margin,
                height - margin, width - margin, height - margin);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", margin,
                margin, margin, height - margin);
  svg += buf;
  if (!rows.empty()) {
    svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    const double x_span = static_cast<double>(width - 2 * margin);
    const double y_span = static_cast<double>(height - 2 * margin);
    const double denom = rows.size() > 1 ? static_cast<double>(rows.size() - 1) : 1.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double x = margin + x_span * static_cast<double>(i) / denom;
      const double y = height - margin - y_span * std::clamp(rows[i].mean_reward / 3.0, 0.0, 1.0);
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, y);
      svg += buf;
    }
    svg += "\"/>\n";
  }
  svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"" + std::to_string(height - 10) +
         "\" font-size=\"12\" text-anchor=\"middle\">step</text>\n";
  svg += "<text x=\"15\" y=\"" + std::to_string(height / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
         std::to_string(height / 2) + ")\">mean reward (0..3)</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace revseg
