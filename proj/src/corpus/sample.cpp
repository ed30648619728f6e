#include "wtal/corpus/sample.hpp"

#include "wtal/errors.hpp"

namespace wtal::corpus {

std::vector<int> VideoSample::positive_classes() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < label.size(); ++c)
    if (label[c]) out.push_back(static_cast<int>(c));
  return out;
}

void VideoSample::validate() const {
  if (!rgb.defined() || !flow.defined()) throw ArgumentError(id + ": missing features");
  if (rgb.ndim() != 2 || flow.ndim() != 2 || rgb.dim(0) != flow.dim(0)) {
    throw DimensionError(id + ": rgb and flow must be [T x D] with equal T");
  }
  if (positive_classes().empty()) throw ArgumentError(id + ": label has no positive class");
  const double t_len = static_cast<double>(length());
  for (const auto& g : gt_intervals) {
    if (g.cls < 0 || static_cast<std::size_t>(g.cls) >= label.size() || !label[g.cls]) {
      throw ArgumentError(id + ": interval class " + std::to_string(g.cls) + " is not positive in the label");
    }
    if (!(0.0 <= g.start_seg && g.start_seg < g.end_seg && g.end_seg <= t_len)) {
      throw ArgumentError(id + ": interval outside [0, T]");
    }
  }
  if (!(seconds_per_segment > 0.0)) throw ArgumentError(id + ": seconds_per_segment must be positive");
}

}  // namespace wtal::corpus
