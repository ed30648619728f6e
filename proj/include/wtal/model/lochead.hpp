#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wtal/model/config.hpp"
#include "wtal/model/layers.hpp"

namespace wtal::model {

struct PseudoProposal {
  int cls = 0;
  std::size_t start_seg = 0;
  std::size_t end_seg = 0;  // exclusive
  double confidence = 0.0;

  bool operator==(const PseudoProposal&) const = default;
};

// Per-segment classification stack (C+1 logits) and regression stack
// (distances to start and end, kept non-negative with softplus).
struct LocHeadParams {
  Conv1d cls_hidden, cls_out;
  Conv1d reg_hidden, reg_out;

  static LocHeadParams init(const ModelConfig& config, Rng& rng);
  ParamList parameters() const;
};

struct LocHeadOutput {
  Tensor logits;   // [T x (C+1)]
  Tensor offsets;  // [T x 2]
};

LocHeadOutput loc_head_forward(const Tensor& features, const LocHeadParams& params);

std::vector<double> default_mining_thresholds();  // 0.3, 0.4, 0.5, 0.6

// For every positive class c and threshold θ, maximal runs where
// attention[t] * minmax(scores[:, c])[t] > θ become proposals with the mean
// activation inside as confidence; duplicates are merged by NMS.
std::vector<PseudoProposal> mine_pseudo_proposals(std::span<const double> attention, const Tensor& scores,
                                                  std::span<const std::uint8_t> label,
                                                  std::span<const double> thresholds, double nms_iou = 0.7);

// Class of the most confident proposal covering each segment; background
// (= label size) elsewhere.
std::vector<std::size_t> pseudo_segment_labels(const std::vector<PseudoProposal>& proposals, std::size_t t_len,
                                               std::size_t num_classes);

// Mean over segments of -w (1 - p_t)^γ log p_t. With alpha set, foreground
// segments are weighted alpha and background segments 1 - alpha; without it
// every weight is 1.
Tensor focal_loss(const Tensor& logits, std::span<const std::size_t> labels, double gamma = 2.0,
                  std::optional<double> alpha = 0.25);

// Rows are (start, end). Mean of 1 - IoU + (centre distance)^2 / (enclosing
// length)^2. Undefined inputs (no regression targets) give 0.
Tensor diou_loss(const Tensor& pred, const Tensor& target);

// Decoded intervals [t + 0.5 - d_s, t + 0.5 + d_e] at segments inside the
// proposals, paired with the proposal extents. Both undefined when no
// segment is covered.
struct RegressionPairs {
  Tensor pred;
  Tensor target;
};
RegressionPairs regression_pairs(const Tensor& offsets, const std::vector<PseudoProposal>& proposals);

Tensor mil_loss(const Tensor& logits, std::span<const std::uint8_t> label, std::size_t k);

struct LocLossTerms {
  Tensor focal, diou, mil, total;
};
LocLossTerms loc_loss(const LocHeadOutput& out, const std::vector<PseudoProposal>& proposals,
                      std::span<const std::uint8_t> label, std::size_t k);

}  // namespace wtal::model
