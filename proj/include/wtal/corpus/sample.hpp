#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wtal/nn/tensor.hpp"

namespace wtal::corpus {

// Ground-truth action instance in segment units, half-open [start, end).
struct GtInterval {
  int cls = 0;
  double start_seg = 0.0;
  double end_seg = 0.0;

  bool operator==(const GtInterval&) const = default;
};

// One untrimmed video: per-segment RGB and flow features, the video-level
// multi-hot label and (for evaluation only) the planted intervals.
struct VideoSample {
  std::string id;
  nn::Tensor rgb;   // [T x D_rgb]
  nn::Tensor flow;  // [T x D_flow]
  std::vector<std::uint8_t> label;
  std::vector<GtInterval> gt_intervals;
  double seconds_per_segment = 1.0;

  std::size_t length() const { return rgb.dim(0); }
  std::size_t num_classes() const { return label.size(); }
  std::vector<int> positive_classes() const;
  // Throws ArgumentError when a documented invariant does not hold.
  void validate() const;
};

}  // namespace wtal::corpus
