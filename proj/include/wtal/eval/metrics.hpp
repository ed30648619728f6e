#pragma once

#include <map>
#include <string>
#include <vector>

namespace wtal::eval {

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

// |a ∩ b| / |a ∪ b|, 0 for disjoint intervals.
double iou_1d(Interval a, Interval b);

struct Proposal {
  int cls = 0;
  double q = 0.0;
  double t_s = 0.0;
  double t_e = 0.0;

  Interval interval() const { return {t_s, t_e}; }
  bool operator==(const Proposal&) const = default;
};

// Greedy per-class suppression in order of descending q (ties: earlier t_s
// first). A proposal is dropped when its IoU with an already kept proposal
// of the same class reaches the threshold. Survivors keep that order.
std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_threshold);

struct Detection {
  std::string video_id;
  double q = 0.0;
  Interval interval;
};

struct GroundTruth {
  std::string video_id;
  int cls = 0;
  Interval interval;
};

// Single-class average precision with greedy one-to-one matching in score
// order and interpolated precision over the recall curve. Zero when there is
// no ground truth.
double average_precision(std::vector<Detection> detections, const std::vector<GroundTruth>& ground_truth,
                         double iou_threshold);

std::vector<double> default_thresholds();  // 0.1, 0.2, ..., 0.7

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<std::string> class_names;
  // ap[c][i]: class c at thresholds[i]. Classes without ground truth hold 0
  // and are left out of the means.
  std::vector<std::vector<double>> ap;
  std::vector<bool> class_has_gt;
  std::vector<double> map;  // per threshold
  double avg_01_05 = 0.0;
  double avg_03_07 = 0.0;
  double avg_01_07 = 0.0;

  std::string to_json() const;
  std::string to_text() const;
};

// Mean over the thresholds in [lo, hi] (inclusive, with 1e-9 slack).
double range_average(const EvalReport& report, double lo, double hi);

EvalReport map_table(const std::map<std::string, std::vector<Proposal>>& per_video,
                     const std::vector<GroundTruth>& ground_truth, std::vector<std::string> class_names,
                     std::vector<double> thresholds = default_thresholds());

}  // namespace wtal::eval
