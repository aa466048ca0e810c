// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace revseg {

/// One sampled decision pair: keyframe index, then candidate-box index at
/// that frame.
struct GroupAction {
  int frame = -1;
  int box = -1;
};

struct RolloutGroup {
  std::vector<double> rewards;
  std::vector<GroupAction> actions;

  int n() const { return static_cast<int>(rewards.size()); }
};

struct AdvantageVector {
  std::vector<double> a;
};

/// Flat parameter vector: frame-head weights followed by box-head weights.
struct PolicyParams {
  std::vector<double> theta;
};

struct GrpoConfig {
  int n = 8;
  double beta = 1e-3;
  double learning_rate = 0.15;
  int steps = 800;
  std::uint64_t seed = 0;
};

/// Per-episode observation tensors for the two-stage softmax policy.
/// frame_features: T x frame_dim. box_features: T x C x box_dim.
struct EpisodeFeatures {
  std::vector<std::vector<double>> frame_features;
  std::vector<std::vector<std::vector<double>>> box_features;

  int num_frames() const { return static_cast<int>(frame_features.size()); }
  int frame_dim() const { return frame_features.empty() ? 0 : static_cast<int>(frame_features[0].size()); }
  int box_dim() const {
    return (box_features.empty() || box_features[0].empty())
               ? 0
               : static_cast<int>(box_features[0][0].size());
  }
};

/// Within-group normalized advantages: (r - mean) / population-std.
/// A zero-variance group yields all zeros (skip-update semantics).
AdvantageVector group_advantages(const std::vector<double>& rewards);

/// Exact KL(p || q) for categorical distributions on a shared support.
/// Rejects q == 0 where p > 0.
double exact_kl(const std::vector<double>& p, const std::vector<double>& q);

double frame_log_prob(const PolicyParams& params, const EpisodeFeatures& feat,
                      std::vector<double>* probs_out = nullptr);

std::vector<double> frame_distribution(const PolicyParams& params, const EpisodeFeatures& feat);
std::vector<double> box_distribution(const PolicyParams& params, const EpisodeFeatures& feat,
                                     int frame);

/// Mean exact KL(policy || ref) over the group's decision points: one frame
/// decision and one box decision per member.
double mean_decision_kl(const RolloutGroup& group, const PolicyParams& policy,
                        const PolicyParams& ref, const EpisodeFeatures& feat);

/// On-policy surrogate: (1/n) sum_i A_i * log pi(actions_i) minus beta times
/// the mean decision-point KL to the reference policy. Maximization target.
double grpo_surrogate(const RolloutGroup& group, const PolicyParams& policy,
                      const PolicyParams& ref, double beta, const EpisodeFeatures& feat);

/// Exact analytic gradient of grpo_surrogate with respect to the policy.
PolicyParams surrogate_gradient(const RolloutGroup& group, const PolicyParams& policy,
                                const PolicyParams& ref, double beta,
                                const EpisodeFeatures& feat);

PolicyParams ascent_step(const PolicyParams& params, const PolicyParams& gradient,
                         double learning_rate);

std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace revseg
