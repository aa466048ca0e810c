// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "revseg/geometry.hpp"
#include "revseg/grpo.hpp"
#include "revseg/reward.hpp"
#include "revseg/rng.hpp"
#include "revseg/rollout.hpp"

namespace revseg {

// Feature layout of the toy policy heads.
inline constexpr int kFrameFeatureDim = 2;  // [normalized area, visibility] + noise
inline constexpr int kBoxFeatureDim = 2;    // [center offset, size offset] + noise

struct SyntheticLabConfig {
  int num_frames = 16;
  int num_candidates = 12;     // 1 correct + 11 distractors on visible frames
  double occlusion_rate = 0.2;
  double feature_noise = 0.05;
  FrameSize frame_size{840, 840};
};

struct CandidateBox {
  BBox box;
  std::vector<double> features;  // kBoxFeatureDim
};

struct SyntheticFrame {
  std::optional<BBox> gt_box;              // absent = occluded
  std::vector<double> features;            // kFrameFeatureDim
  std::vector<CandidateBox> candidates;
  int correct_candidate = -1;              // -1 on occluded frames
};

struct SyntheticEpisode {
  std::uint64_t seed = 0;
  FrameSize frame_size;
  std::vector<SyntheticFrame> frames;

  int num_frames() const { return static_cast<int>(frames.size()); }
};

/// Deterministic in seed. Guarantees at least one visible frame (visibility
/// patterns are rejection-resampled) and, on visible frames, exactly one
/// candidate with IoU > 0.5 against the ground truth; distractor features
/// stay separated from the correct candidate's even after noise.
SyntheticEpisode generate_episode(std::uint64_t seed, const SyntheticLabConfig& cfg = {});

struct ToyPolicy {
  std::vector<double> frame_weights;  // kFrameFeatureDim
  std::vector<double> box_weights;    // kBoxFeatureDim

  static ToyPolicy zeros();
  PolicyParams params() const;
  static ToyPolicy from_params(const PolicyParams& p);
};

EpisodeFeatures episode_features(const SyntheticEpisode& ep);
EpisodeInput episode_input(const SyntheticEpisode& ep);
EpisodeGroundTruth episode_ground_truth(const SyntheticEpisode& ep);

/// Ground-truth masks for the synthetic target (filled boxes), one per frame.
MaskSequence synthetic_gt_masks(const SyntheticEpisode& ep);

struct ToyDecision {
  int frame = -1;
  int box = -1;
  std::vector<double> frame_dist;
  std::vector<double> box_dist;
};

/// One structured act: frame from the frame-head softmax, then a candidate
/// from the box-head softmax at that frame. Greedy mode takes argmax twice.
ToyDecision policy_act(const PolicyParams& params, const SyntheticEpisode& ep, RngStream& rng,
                       bool greedy = false);

/// PolicyInterface shim that renders the toy policy's structured choices
/// into the two-round text format, so training and evaluation always go
/// through the real parser and reward path.
class ToyPolicyAdapter : public PolicyInterface {
 public:
  ToyPolicyAdapter(PolicyParams params, const SyntheticEpisode& ep, std::uint64_t seed,
                   bool greedy = false, FrameSize round2_image_size = {840, 840});
  std::string generate(const PolicyContext& ctx) override;

  const std::vector<ToyDecision>& decisions() const { return decisions_; }

 private:
  PolicyParams params_;
  const SyntheticEpisode* episode_;
  RngStream rng_;
  bool greedy_;
  FrameSize round2_size_;
  std::vector<ToyDecision> decisions_;
};

struct StepLogRow {
  int step = 0;
  double mean_reward = 0.0;
  double mean_r_f = 0.0;
  double mean_r_t = 0.0;
  double mean_r_s = 0.0;
  double kl = 0.0;
  double frame_acc = 0.0;
  double box_acc = 0.0;
};

struct EvalMetrics {
  double frame_quality = 0.0;      // mean soft-normalized area of chosen frames
  double box_accuracy = 0.0;       // fraction of greedy picks with IoU > 0.5
  double mean_total_reward = 0.0;  // scored with the soft temporal reward
};

struct TrainReport {
  std::vector<StepLogRow> rows;
  EvalMetrics final_metrics;
  PolicyParams final_params;

  std::string csv() const;
  std::string metrics_json() const;
  std::string reward_curve_svg() const;
};

/// GRPO training loop over synthetic episodes. Fully deterministic given
/// (config, mode, lab): episodes, rollouts and evaluation all draw from
/// named sub-streams of config.seed. Held-out evaluation episodes use seed
/// indices offset by 10^6 from the training range.
TrainReport train_toy(const GrpoConfig& config, TemporalRewardMode mode,
                      const SyntheticLabConfig& lab = {}, int heldout_episodes = 200);

/// Greedy evaluation over explicit episodes.
EvalMetrics evaluate_policy(const PolicyParams& params,
                            const std::vector<SyntheticEpisode>& episodes);

}  // namespace revseg
