// SPDX-License-Identifier: Apache-2.0
#include "revseg/vos_metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace revseg {
namespace {

// True when any boundary pixel of `other` lies within `tol` of (x, y).
// Integer squared distances keep the comparison exact.
bool near_boundary(const BinaryMask& other, int x, int y, double tol) {
  const int r = static_cast<int>(std::floor(tol));
  const double tol2 = tol * tol;
  for (int dy = -r; dy <= r; ++dy) {
    const int yy = y + dy;
    if (yy < 0 || yy >= other.size.height) continue;
    for (int dx = -r; dx <= r; ++dx) {
      const int xx = x + dx;
      if (xx < 0 || xx >= other.size.width) continue;
      if (static_cast<double>(dx) * dx + static_cast<double>(dy) * dy > tol2) continue;
      if (other.at(xx, yy)) return true;
    }
  }
  return false;
}

double matched_fraction(const BinaryMask& from, const BinaryMask& to, double tol) {
  std::int64_t total = 0;
  std::int64_t matched = 0;
  for (int y = 0; y < from.size.height; ++y) {
    for (int x = 0; x < from.size.width; ++x) {
      if (!from.at(x, y)) continue;
      ++total;
      if (near_boundary(to, x, y, tol)) ++matched;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(matched) / static_cast<double>(total);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / v.size();
}

}  // namespace

BinaryMask boundary_map(const BinaryMask& m) {
  BinaryMask b = BinaryMask::empty(m.size);
  const int w = m.size.width;
  const int h = m.size.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y)) continue;
      const bool on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      const bool bg_neighbor = (x > 0 && !m.at(x - 1, y)) || (x < w - 1 && !m.at(x + 1, y)) ||
                               (y > 0 && !m.at(x, y - 1)) || (y < h - 1 && !m.at(x, y + 1));
      if (on_border || bg_neighbor) b.set(x, y, true);
    }
  }
  return b;
}

double region_similarity(const BinaryMask& pred, const BinaryMask& gt) {
  return mask_iou(pred, gt);
}

double contour_accuracy(const BinaryMask& pred, const BinaryMask& gt, double tolerance) {
  if (!(pred.size == gt.size)) throw std::invalid_argument("contour_accuracy: size mismatch");
  if (tolerance < 0.0) throw std::invalid_argument("contour_accuracy: negative tolerance");
  const bool pred_empty = pred.foreground_count() == 0;
  const bool gt_empty = gt.foreground_count() == 0;
  if (pred_empty && gt_empty) return 1.0;

  const BinaryMask bp = boundary_map(pred);
  const BinaryMask bg = boundary_map(gt);
  const double precision = matched_fraction(bp, bg, tolerance);
  const double recall = matched_fraction(bg, bp, tolerance);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

int default_tolerance(FrameSize size) {
  if (!size.valid()) throw std::invalid_argument("default_tolerance: invalid size");
  const double diag = std::sqrt(static_cast<double>(size.width) * size.width +
                                static_cast<double>(size.height) * size.height);
  return static_cast<int>(std::ceil(0.008 * diag));
}

SequenceEval evaluate_sequence(const MaskSequence& pred, const MaskSequence& gt) {
  if (!pred.valid() || !gt.valid()) throw std::invalid_argument("evaluate_sequence: empty sequence");
  if (pred.frames.size() != gt.frames.size()) {
    throw std::invalid_argument("evaluate_sequence: frame count mismatch");
  }
  if (!(pred.frames[0].size == gt.frames[0].size)) {
    throw std::invalid_argument("evaluate_sequence: frame size mismatch");
  }
  const double tol = default_tolerance(gt.frames[0].size);
  SequenceEval e;
  e.frame_count = static_cast<int>(gt.frames.size());
  for (std::size_t i = 0; i < gt.frames.size(); ++i) {
    e.j_per_frame.push_back(region_similarity(pred.frames[i], gt.frames[i]));
    e.f_per_frame.push_back(contour_accuracy(pred.frames[i], gt.frames[i], tol));
  }
  e.mean_j = mean(e.j_per_frame);
  e.mean_f = mean(e.f_per_frame);
  return e;
}

BenchmarkReport evaluate_dataset(
    const std::vector<std::tuple<std::string, MaskSequence, MaskSequence>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_dataset: no sequences");
  BenchmarkReport report;
  double sum_j = 0.0;
  double sum_f = 0.0;
  for (const auto& [id, pred, gt] : pairs) {
    BenchmarkReport::Entry entry;
    entry.id = id;
    entry.eval = evaluate_sequence(pred, gt);
    sum_j += entry.eval.mean_j;
    sum_f += entry.eval.mean_f;
    report.sequences.push_back(std::move(entry));
  }
  report.dataset_j = sum_j / pairs.size();
  report.dataset_f = sum_f / pairs.size();
  report.dataset_jf = (report.dataset_j + report.dataset_f) / 2.0;
  return report;
}

std::string report_to_json(const BenchmarkReport& report) {
  nlohmann::json j;
  j["dataset"] = {{"J", report.dataset_j * 100.0},
                  {"F", report.dataset_f * 100.0},
                  {"J&F", report.dataset_jf * 100.0}};
  auto& seqs = j["sequences"] = nlohmann::json::array();
  for (const auto& entry : report.sequences) {
    seqs.push_back({{"id", entry.id},
                    {"J", entry.eval.mean_j * 100.0},
                    {"F", entry.eval.mean_f * 100.0},
                    {"J&F", (entry.eval.mean_j + entry.eval.mean_f) * 50.0},
                    {"frames", entry.eval.frame_count}});
  }
  return j.dump(2);
}

std::string report_to_markdown(const BenchmarkReport& report) {
  char buf[160];
  std::string out = "| sequence | J | F | J&F |\n|---|---|---|---|\n";
  for (const auto& e : report.sequences) {
    std::snprintf(buf, sizeof(buf), "| %s | %.1f | %.1f | %.1f |\n", e.id.c_str(),
                  e.eval.mean_j * 100.0, e.eval.mean_f * 100.0,
                  (e.eval.mean_j + e.eval.mean_f) * 50.0);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "| **all** | %.1f | %.1f | %.1f |\n", report.dataset_j * 100.0,
                report.dataset_f * 100.0, report.dataset_jf * 100.0);
  out += buf;
  return out;
}

}  // namespace revseg
