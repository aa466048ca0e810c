// SPDX-License-Identifier: Apache-2.0
#include "revseg/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace revseg {
namespace {

double dot(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

struct HeadViews {
  std::vector<double> frame_w;
  std::vector<double> box_w;
};

HeadViews split_params(const PolicyParams& p, const EpisodeFeatures& feat) {
  const int df = feat.frame_dim();
  const int db = feat.box_dim();
  if (static_cast<int>(p.theta.size()) != df + db) {
    throw std::invalid_argument("policy params do not match feature dimensions");
  }
  HeadViews v;
  v.frame_w.assign(p.theta.begin(), p.theta.begin() + df);
  v.box_w.assign(p.theta.begin() + df, p.theta.end());
  return v;
}

std::vector<double> head_distribution(const std::vector<double>& w,
                                      const std::vector<std::vector<double>>& features) {
  std::vector<double> logits(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) logits[i] = dot(w, features[i]);
  return softmax(logits);
}

void check_action(const GroupAction& a, const EpisodeFeatures& feat) {
  if (a.frame < 0 || a.frame >= feat.num_frames()) {
    throw std::invalid_argument("group action: frame index out of range");
  }
  if (a.box < 0 || a.box >= static_cast<int>(feat.box_features[a.frame].size())) {
    throw std::invalid_argument("group action: box index out of range");
  }
}

// d/dw of KL(softmax(Xw) || q) = sum_t p_t * ((log p_t - log q_t) - KL) * x_t
void accumulate_kl_gradient(const std::vector<double>& p, const std::vector<double>& q,
                            const std::vector<std::vector<double>>& features, double scale,
                            std::vector<double>& grad) {
  const double kl = exact_kl(p, q);
  for (std::size_t t = 0; t < p.size(); ++t) {
    const double coeff = scale * p[t] * (std::log(p[t]) - std::log(q[t]) - kl);
    for (std::size_t d = 0; d < grad.size(); ++d) grad[d] += coeff * features[t][d];
  }
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

AdvantageVector group_advantages(const std::vector<double>& rewards) {
  const int n = static_cast<int>(rewards.size());
  if (n < 2) throw std::invalid_argument("group_advantages: group size must be >= 2");
  for (const double r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("group_advantages: non-finite reward");
  }
  AdvantageVector out;
  out.a.assign(n, 0.0);
  const auto [mn, mx] = std::minmax_element(rewards.begin(), rewards.end());
  if (*mn == *mx) return out;  // zero variance -> skip update

  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = rewards[i] - mean;
  // second centering pass removes the rounding residue of the first
  const double resid = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    d[i] -= resid;
    var += d[i] * d[i];
  }
  const double std_pop = std::sqrt(var / n);
  for (int i = 0; i < n; ++i) out.a[i] = d[i] / std_pop;
  return out;
}

double exact_kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size() || p.empty()) {
    throw std::invalid_argument("exact_kl: support size mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) throw std::invalid_argument("exact_kl: q must be positive where p > 0");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

std::vector<double> frame_distribution(const PolicyParams& params, const EpisodeFeatures& feat) {
  const HeadViews v = split_params(params, feat);
  return head_distribution(v.frame_w, feat.frame_features);
}

std::vector<double> box_distribution(const PolicyParams& params, const EpisodeFeatures& feat,
                                     int frame) {
  if (frame < 0 || frame >= feat.num_frames()) {
    throw std::invalid_argument("box_distribution: frame out of range");
  }
  const HeadViews v = split_params(params, feat);
  return head_distribution(v.box_w, feat.box_features[frame]);
}

double mean_decision_kl(const RolloutGroup& group, const PolicyParams& policy,
                        const PolicyParams& ref, const EpisodeFeatures& feat) {
  if (group.n() < 1) throw std::invalid_argument("mean_decision_kl: empty group");
  const auto pf = frame_distribution(policy, feat);
  const auto qf = frame_distribution(ref, feat);
  double acc = 0.0;
  for (const GroupAction& a : group.actions) {
    check_action(a, feat);
    acc += exact_kl(pf, qf);
    acc += exact_kl(box_distribution(policy, feat, a.frame), box_distribution(ref, feat, a.frame));
  }
  return acc / (2.0 * group.n());
}

double grpo_surrogate(const RolloutGroup& group, const PolicyParams& policy,
                      const PolicyParams& ref, double beta, const EpisodeFeatures& feat) {
  const int n = group.n();
  if (n < 2) throw std::invalid_argument("grpo_surrogate: group size must be >= 2");
  if (static_cast<int>(group.actions.size()) != n) {
    throw std::invalid_argument("grpo_surrogate: rewards/actions size mismatch");
  }
  const AdvantageVector adv = group_advantages(group.rewards);
  const auto pf = frame_distribution(policy, feat);

  double policy_term = 0.0;
  for (int i = 0; i < n; ++i) {
    const GroupAction& a = group.actions[i];
    check_action(a, feat);
    const auto pb = box_distribution(policy, feat, a.frame);
    const double logp = std::log(pf[a.frame]) + std::log(pb[a.box]);
    if (!std::isfinite(logp)) {
      throw std::invalid_argument("grpo_surrogate: sampled action has zero probability");
    }
    policy_term += adv.a[i] * logp;
  }
  policy_term /= n;
  return policy_term - beta * mean_decision_kl(group, policy, ref, feat);
}

PolicyParams surrogate_gradient(const RolloutGroup& group, const PolicyParams& policy,
                                const PolicyParams& ref, double beta,
                                const EpisodeFeatures& feat) {
  const int n = group.n();
  if (n < 2) throw std::invalid_argument("surrogate_gradient: group size must be >= 2");
  const int df = feat.frame_dim();
  const int db = feat.box_dim();
  const AdvantageVector adv = group_advantages(group.rewards);

  const auto pf = frame_distribution(policy, feat);
  const auto qf = frame_distribution(ref, feat);

  // Expected frame feature under the current policy.
  std::vector<double> exp_frame_feat(df, 0.0);
  for (int t = 0; t < feat.num_frames(); ++t) {
    for (int d = 0; d < df; ++d) exp_frame_feat[d] += pf[t] * feat.frame_features[t][d];
  }

  std::vector<double> grad_frame(df, 0.0);
  std::vector<double> grad_box(db, 0.0);

  for (int i = 0; i < n; ++i) {
    const GroupAction& a = group.actions[i];
    check_action(a, feat);
    const double w = adv.a[i] / n;

    for (int d = 0; d < df; ++d) {
      grad_frame[d] += w * (feat.frame_features[a.frame][d] - exp_frame_feat[d]);
    }

    const auto pb = box_distribution(policy, feat, a.frame);
    if (pb[a.box] <= 0.0) {
      throw std::invalid_argument("surrogate_gradient: sampled action has zero probability");
    }
    const auto& cands = feat.box_features[a.frame];
    std::vector<double> exp_box_feat(db, 0.0);
    for (std::size_t c = 0; c < cands.size(); ++c) {
      for (int d = 0; d < db; ++d) exp_box_feat[d] += pb[c] * cands[c][d];
    }
    for (int d = 0; d < db; ++d) grad_box[d] += w * (cands[a.box][d] - exp_box_feat[d]);

    // KL penalty, averaged over the 2n decision points.
    const double kl_scale = -beta / (2.0 * n);
    accumulate_kl_gradient(pf, qf, feat.frame_features, kl_scale, grad_frame);
    accumulate_kl_gradient(pb, box_distribution(ref, feat, a.frame), cands, kl_scale, grad_box);
  }

  PolicyParams g;
  g.theta.reserve(df + db);
  g.theta.insert(g.theta.end(), grad_frame.begin(), grad_frame.end());
  g.theta.insert(g.theta.end(), grad_box.begin(), grad_box.end());
  return g;
}

PolicyParams ascent_step(const PolicyParams& params, const PolicyParams& gradient,
                         double learning_rate) {
  if (params.theta.size() != gradient.theta.size()) {
    throw std::invalid_argument("ascent_step: size mismatch");
  }
  PolicyParams out = params;
  for (std::size_t i = 0; i < out.theta.size(); ++i) {
    out.theta[i] += learning_rate * gradient.theta[i];
    if (!std::isfinite(out.theta[i])) throw std::runtime_error("ascent_step: non-finite parameter");
  }
  return out;
}

}  // namespace revseg
