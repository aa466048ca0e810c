// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "revseg/synthetic.hpp"

using namespace revseg;

TEST_CASE("generate_episode is deterministic and well formed") {
  const SyntheticEpisode a = generate_episode(42);
  const SyntheticEpisode b = generate_episode(42);
  REQUIRE(a.num_frames() == 16);
  for (int t = 0; t < a.num_frames(); ++t) {
    CHECK(a.frames[t].gt_box == b.frames[t].gt_box);
    CHECK(a.frames[t].features == b.frames[t].features);
    REQUIRE(a.frames[t].candidates.size() == 12);
    for (int c = 0; c < 12; ++c) {
      CHECK(a.frames[t].candidates[c].box == b.frames[t].candidates[c].box);
      CHECK(a.frames[t].candidates[c].features == b.frames[t].candidates[c].features);
    }
  }
  CHECK(generate_episode(43).frames[0].features != a.frames[0].features);
}

TEST_CASE("every episode has a visible frame; occluded frames have no box") {
  int occluded_total = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    const SyntheticEpisode ep = generate_episode(seed);
    int visible = 0;
    for (const SyntheticFrame& f : ep.frames) {
      if (f.gt_box) {
        ++visible;
        CHECK(bbox_area(*f.gt_box) > 0);
      } else {
        ++occluded_total;
        CHECK(f.correct_candidate == -1);
      }
    }
    CHECK(visible >= 1);
  }
  // occlusion rate ~0.2 of 16 frames over 1000 episodes
  CHECK(occluded_total > 2000);
  CHECK(occluded_total < 4500);
}

TEST_CASE("exactly one correct candidate per visible frame") {
  for (int seed = 0; seed < 200; ++seed) {
    const SyntheticEpisode ep = generate_episode(seed);
    for (const SyntheticFrame& f : ep.frames) {
      if (!f.gt_box) continue;
      int over_half = 0;
      for (std::size_t c = 0; c < f.candidates.size(); ++c) {
        const double iou = bbox_iou(f.candidates[c].box, *f.gt_box);
        if (iou > 0.5) {
          ++over_half;
          CHECK(static_cast<int>(c) == f.correct_candidate);
        }
      }
      CHECK(over_half == 1);
      // separation guarantee: the correct candidate scores strictly lowest
      const auto& correct = f.candidates[f.correct_candidate].features;
      for (std::size_t c = 0; c < f.candidates.size(); ++c) {
        if (static_cast<int>(c) == f.correct_candidate) continue;
        const auto& d = f.candidates[c].features;
        CHECK(d[0] + d[1] > correct[0] + correct[1]);
      }
    }
  }
}

TEST_CASE("policy_act") {
  const SyntheticEpisode ep = generate_episode(7);
  const PolicyParams zeros = ToyPolicy::zeros().params();

  SUBCASE("zero weights give uniform distributions") {
    RngStream rng(1);
    const ToyDecision d = policy_act(zeros, ep, rng);
    for (double p : d.frame_dist) CHECK(p == doctest::Approx(1.0 / 16));
    for (double p : d.box_dist) CHECK(p == doctest::Approx(1.0 / 12));
  }
  SUBCASE("a dominant logit wins almost surely") {
    // softmax([10, 0, ..., 0]) puts > 0.999 on the first entry
    std::vector<double> logits(16, 0.0);
    logits[0] = 10.0;
    const auto p = softmax(logits);
    CHECK(p[0] > 0.999);
  }
  SUBCASE("greedy mode is deterministic argmax") {
    ToyPolicy tp = ToyPolicy::zeros();
    tp.frame_weights = {5.0, 1.0};
    tp.box_weights = {-8.0, -8.0};
    RngStream rng(2);
    const ToyDecision d1 = policy_act(tp.params(), ep, rng, /*greedy=*/true);
    const ToyDecision d2 = policy_act(tp.params(), ep, rng, /*greedy=*/true);
    CHECK(d1.frame == d2.frame);
    CHECK(d1.box == d2.box);
    // greedy box pick under oracle weights is the correct candidate
    if (ep.frames[d1.frame].gt_box) {
      CHECK(d1.box == ep.frames[d1.frame].correct_candidate);
    }
  }
}

TEST_CASE("text round trip recovers the sampled decisions exactly") {
  for (int seed = 0; seed < 50; ++seed) {
    const SyntheticEpisode ep = generate_episode(seed);
    ToyPolicyAdapter adapter(ToyPolicy::zeros().params(), ep, derive_seed(seed, "t"));
    const GroupResult res = run_group(episode_input(ep), adapter, 4, episode_ground_truth(ep));
    for (int i = 0; i < 4; ++i) {
      const RolloutTrace& t = res.traces[i];
      REQUIRE(t.round1.status == Status::Succ);
      REQUIRE(t.round2->status == Status::Succ);
      CHECK(t.round1.keyframe_index == adapter.decisions()[i].frame);
      const auto& cand =
          ep.frames[t.round1.keyframe_index].candidates[adapter.decisions()[i].box];
      CHECK(*t.predicted_box_original == cand.box);
      CHECK(t.reward.r_f == doctest::Approx(1.0));  // adapter text is always well-formed
    }
  }
}

TEST_CASE("evaluate_policy") {
  SUBCASE("rejects empty input") {
    CHECK_THROWS_AS(evaluate_policy(ToyPolicy::zeros().params(), {}), std::invalid_argument);
  }
  SUBCASE("uniform policy box accuracy matches the combinatorial expectation") {
    SyntheticLabConfig lab;
    lab.occlusion_rate = 0.0;  // symmetric episodes: target visible everywhere
    std::vector<SyntheticEpisode> episodes;
    for (int i = 0; i < 1000; ++i) episodes.push_back(generate_episode(5000 + i, lab));
    const EvalMetrics m = evaluate_policy(ToyPolicy::zeros().params(), episodes);
    CHECK(m.box_accuracy == doctest::Approx(1.0 / 12).epsilon(0.6));
    CHECK(std::fabs(m.box_accuracy - 1.0 / 12) < 0.05);
  }
  SUBCASE("oracle-weighted policy grounds every episode") {
    ToyPolicy tp;
    tp.frame_weights = {2.0, 8.0};    // any visible frame
    tp.box_weights = {-40.0, -40.0};  // strictly smallest offsets win
    std::vector<SyntheticEpisode> episodes;
    for (int i = 0; i < 200; ++i) episodes.push_back(generate_episode(9000 + i));
    const EvalMetrics m = evaluate_policy(tp.params(), episodes);
    CHECK(m.box_accuracy == doctest::Approx(1.0));
  }
}

TEST_CASE("train_toy step budget zero equals the untrained baseline") {
  GrpoConfig cfg;
  cfg.steps = 0;
  const TrainReport r = train_toy(cfg, TemporalRewardMode::SoftArea);
  CHECK(r.rows.empty());

  std::vector<SyntheticEpisode> heldout;
  for (int i = 0; i < 200; ++i) {
    heldout.push_back(generate_episode(derive_seed(cfg.seed, "episode", 1000000 + i)));
  }
  const EvalMetrics base = evaluate_policy(ToyPolicy::zeros().params(), heldout);
  CHECK(r.final_metrics.frame_quality == doctest::Approx(base.frame_quality));
  CHECK(r.final_metrics.box_accuracy == doctest::Approx(base.box_accuracy));
  CHECK(r.final_metrics.mean_total_reward == doctest::Approx(base.mean_total_reward));
}

TEST_CASE("train_toy validates its config") {
  GrpoConfig cfg;
  cfg.n = 1;
  CHECK_THROWS_AS(train_toy(cfg, TemporalRewardMode::SoftArea), std::invalid_argument);
  cfg = {};
  cfg.beta = -1.0;
  CHECK_THROWS_AS(train_toy(cfg, TemporalRewardMode::SoftArea), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train_toy(cfg, TemporalRewardMode::SoftArea), std::invalid_argument);
}

TEST_CASE("train_toy is deterministic byte for byte") {
  GrpoConfig cfg;
  cfg.steps = 60;
  const TrainReport a = train_toy(cfg, TemporalRewardMode::SoftArea, {}, 20);
  const TrainReport b = train_toy(cfg, TemporalRewardMode::SoftArea, {}, 20);
  CHECK(a.csv() == b.csv());
  CHECK(a.metrics_json() == b.metrics_json());
  CHECK(a.final_params.theta == b.final_params.theta);
}

TEST_CASE("training improves the reward over the default run") {
  GrpoConfig cfg;  // defaults
  const TrainReport r = train_toy(cfg, TemporalRewardMode::SoftArea);
  REQUIRE(static_cast<int>(r.rows.size()) == cfg.steps);
  const int w = 200;
  double first = 0.0;
  double last = 0.0;
  for (int i = 0; i < w; ++i) {
    first += r.rows[i].mean_reward;
    last += r.rows[r.rows.size() - 1 - i].mean_reward;
  }
  CHECK(last / w >= first / w);  // trailing-window smoke property
  CHECK(r.final_metrics.frame_quality >= 0.9);
  CHECK(r.final_metrics.box_accuracy >= 0.9);
}

TEST_CASE("a large KL coefficient anchors the policy to the reference") {
  GrpoConfig cfg;
  cfg.beta = 10.0;
  cfg.steps = 300;
  const TrainReport r = train_toy(cfg, TemporalRewardMode::SoftArea);
  // per-head exact KL to the uniform init stays tiny on fresh episodes
  const PolicyParams ref = ToyPolicy::zeros().params();
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const SyntheticEpisode ep = generate_episode(derive_seed(77, "kl-check", i));
    const EpisodeFeatures feat = episode_features(ep);
    worst = std::max(worst, exact_kl(frame_distribution(r.final_params, feat),
                                     frame_distribution(ref, feat)));
    for (int t = 0; t < ep.num_frames(); ++t) {
      worst = std::max(worst, exact_kl(box_distribution(r.final_params, feat, t),
                                       box_distribution(ref, feat, t)));
    }
  }
  CHECK(worst <= 0.05);
}

TEST_CASE("csv log has the pinned header and one row per step") {
  GrpoConfig cfg;
  cfg.steps = 5;
  const TrainReport r = train_toy(cfg, TemporalRewardMode::Binary01, {}, 10);
  const std::string csv = r.csv();
  CHECK(csv.rfind("step,mean_reward,mean_r_f,mean_r_t,mean_r_s,kl,frame_acc,box_acc\n", 0) == 0);
  int newlines = 0;
  for (char c : csv) newlines += c == '\n';
  CHECK(newlines == 6);
  CHECK(r.reward_curve_svg().find("<svg") != std::string::npos);
}

TEST_CASE("synthetic gt masks cover exactly the target boxes") {
  const SyntheticEpisode ep = generate_episode(3);
  const MaskSequence masks = synthetic_gt_masks(ep);
  REQUIRE(masks.frames.size() == ep.frames.size());
  for (int t = 0; t < ep.num_frames(); ++t) {
    const auto box = mask_to_bbox(masks.frames[t]);
    CHECK(box == ep.frames[t].gt_box);
  }
}
