// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "revseg/geometry.hpp"

namespace revseg {

struct SequenceEval {
  std::vector<double> j_per_frame;
  std::vector<double> f_per_frame;
  double mean_j = 0.0;
  double mean_f = 0.0;
  int frame_count = 0;
};

struct BenchmarkReport {
  struct Entry {
    std::string id;
    SequenceEval eval;
  };
  std::vector<Entry> sequences;
  double dataset_j = 0.0;   // stored in [0,1]; reported x100, one decimal
  double dataset_f = 0.0;
  double dataset_jf = 0.0;  // (J + F) / 2
};

/// Region similarity J: mask IoU with the both-empty = 1 convention.
double region_similarity(const BinaryMask& pred, const BinaryMask& gt);

/// Boundary F-measure. A boundary pixel is a foreground pixel with a
/// 4-neighbor background pixel or lying on the image border. Precision and
/// recall match boundary pixels within Euclidean distance <= tolerance.
double contour_accuracy(const BinaryMask& pred, const BinaryMask& gt, double tolerance);

/// DAVIS-style default: ceil(0.008 * image diagonal).
int default_tolerance(FrameSize size);

SequenceEval evaluate_sequence(const MaskSequence& pred, const MaskSequence& gt);

BenchmarkReport evaluate_dataset(
    const std::vector<std::tuple<std::string, MaskSequence, MaskSequence>>& pairs);

std::string report_to_json(const BenchmarkReport& report);
std::string report_to_markdown(const BenchmarkReport& report);

/// Boundary bitmap used by both F and its tests.
BinaryMask boundary_map(const BinaryMask& m);

}  // namespace revseg
