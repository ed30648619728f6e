#include "wtal/eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <json.hpp>
#include <sstream>

#include "wtal/errors.hpp"

namespace wtal::eval {

double iou_1d(Interval a, Interval b) {
  if (!(a.end > a.start) || !(b.end > b.start)) throw ArgumentError("iou_1d: intervals must have positive length");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  return inter / uni;
}

std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_threshold) {
  std::stable_sort(proposals.begin(), proposals.end(), [](const Proposal& a, const Proposal& b) {
    if (a.q != b.q) return a.q > b.q;
    return a.t_s < b.t_s;
  });
  std::vector<Proposal> kept;
  for (const auto& p : proposals) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Proposal& k) {
      return k.cls == p.cls && iou_1d(k.interval(), p.interval()) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(p);
  }
  return kept;
}

double average_precision(std::vector<Detection> detections, const std::vector<GroundTruth>& ground_truth,
                         double iou_threshold) {
  if (ground_truth.empty() || detections.empty()) return 0.0;
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.q > b.q; });

  std::map<std::string, std::vector<std::size_t>> gt_by_video;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) gt_by_video[ground_truth[i].video_id].push_back(i);
  std::vector<bool> matched(ground_truth.size(), false);

  std::vector<double> tp(detections.size(), 0.0), fp(detections.size(), 0.0);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    auto it = gt_by_video.find(detections[d].video_id);
    if (it == gt_by_video.end()) {
      fp[d] = 1.0;
      continue;
    }
    std::vector<std::pair<double, std::size_t>> cands;
    for (std::size_t g : it->second) cands.emplace_back(iou_1d(detections[d].interval, ground_truth[g].interval), g);
    std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    bool hit = false;
    for (const auto& [iou, g] : cands) {
      if (iou < iou_threshold) break;
      if (matched[g]) continue;
      matched[g] = true;
      hit = true;
      break;
    }
    (hit ? tp : fp)[d] = 1.0;
  }

  const double npos = static_cast<double>(ground_truth.size());
  std::vector<double> mrec{0.0}, mprec{0.0};
  double tp_sum = 0.0, fp_sum = 0.0;
  for (std::size_t d = 0; d < detections.size(); ++d) {
    tp_sum += tp[d];
    fp_sum += fp[d];
    mrec.push_back(tp_sum / npos);
    mprec.push_back(tp_sum / (tp_sum + fp_sum));
  }
  mrec.push_back(1.0);
  mprec.push_back(0.0);
  for (std::size_t i = mprec.size() - 1; i-- > 0;) mprec[i] = std::max(mprec[i], mprec[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) {
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mprec[i];
  }
  return ap;
}

std::vector<double> default_thresholds() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}; }

double range_average(const EvalReport& report, double lo, double hi) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    if (report.thresholds[i] >= lo - 1e-9 && report.thresholds[i] <= hi + 1e-9) {
      total += report.map[i];
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

EvalReport map_table(const std::map<std::string, std::vector<Proposal>>& per_video,
                     const std::vector<GroundTruth>& ground_truth, std::vector<std::string> class_names,
                     std::vector<double> thresholds) {
  const std::size_t num_classes = class_names.size();
  EvalReport report;
  report.thresholds = std::move(thresholds);
  report.class_names = std::move(class_names);
  report.ap.assign(num_classes, std::vector<double>(report.thresholds.size(), 0.0));
  report.class_has_gt.assign(num_classes, false);

  std::vector<std::vector<Detection>> dets(num_classes);
  for (const auto& [video, proposals] : per_video) {
    for (const auto& p : proposals) {
      if (p.cls < 0 || static_cast<std::size_t>(p.cls) >= num_classes) {
        throw ArgumentError("map_table: proposal class " + std::to_string(p.cls) + " out of range");
      }
      dets[static_cast<std::size_t>(p.cls)].push_back({video, p.q, p.interval()});
    }
  }
  std::vector<std::vector<GroundTruth>> gts(num_classes);
  for (const auto& g : ground_truth) {
    if (g.cls < 0 || static_cast<std::size_t>(g.cls) >= num_classes) {
      throw ArgumentError("map_table: ground-truth class " + std::to_string(g.cls) + " out of range");
    }
    gts[static_cast<std::size_t>(g.cls)].push_back(g);
  }

  report.map.assign(report.thresholds.size(), 0.0);
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (gts[c].empty()) continue;
    report.class_has_gt[c] = true;
    ++counted;
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
      report.ap[c][i] = average_precision(dets[c], gts[c], report.thresholds[i]);
      report.map[i] += report.ap[c][i];
    }
  }
  if (counted) {
    for (auto& m : report.map) m /= static_cast<double>(counted);
  }
  report.avg_01_05 = range_average(report, 0.1, 0.5);
  report.avg_03_07 = range_average(report, 0.3, 0.7);
  report.avg_01_07 = range_average(report, 0.1, 0.7);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["thresholds"] = thresholds;
  j["map"] = map;
  j["average"] = {{"0.1:0.5", avg_01_05}, {"0.3:0.7", avg_03_07}, {"0.1:0.7", avg_01_07}};
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    classes.push_back({{"name", class_names[c]}, {"has_ground_truth", static_cast<bool>(class_has_gt[c])},
                       {"ap", ap[c]}});
  }
  j["classes"] = classes;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char buf[64];
  out << "mAP@IoU ";
  for (double t : thresholds) {
    std::snprintf(buf, sizeof(buf), "%7.1f", t);
    out << buf;
  }
  out << "  AVG(0.1:0.5)  AVG(0.3:0.7)  AVG(0.1:0.7)\n";
  out << "        ";
  for (double m : map) {
    std::snprintf(buf, sizeof(buf), "%7.2f", 100.0 * m);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "  %12.2f  %12.2f  %12.2f\n", 100.0 * avg_01_05, 100.0 * avg_03_07,
                100.0 * avg_01_07);
  out << buf;
  return out.str();
}

}  // namespace wtal::eval
