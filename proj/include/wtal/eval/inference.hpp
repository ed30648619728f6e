#pragma once

#include <map>
#include <string>
#include <vector>

#include "wtal/corpus/sample.hpp"
#include "wtal/eval/metrics.hpp"
#include "wtal/model/model.hpp"

namespace wtal::eval {

struct InferenceConfig {
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double class_threshold = 0.1;  // on the video-level MIL probability
  double nms_iou = 0.5;
  double flank = 0.25;           // flank length as a fraction of the interval
  std::size_t topk_divisor = 8;
};

// Per-segment tracks of one video, all in evaluation mode.
struct ScoreTracks {
  std::size_t t_len = 0;
  std::size_t num_classes = 0;          // foreground classes C
  std::vector<double> attention;        // A_KSM [T]
  std::vector<double> csr_attention;    // A_CSR [T]
  std::vector<double> probs;            // head softmax, [T x (C+1)] row-major
  std::vector<double> offsets;          // [T x 2] distances to start and end
  std::vector<double> video_probs;      // [C+1]

  double prob(std::size_t t, std::size_t c) const { return probs[t * (num_classes + 1) + c]; }
  double fused(std::size_t t, std::size_t c) const { return prob(t, c) * attention[t]; }
};

ScoreTracks compute_tracks(const model::Model& model, const nn::Tensor& fused_features, std::size_t topk_divisor = 8);

// Classes whose video probability reaches the threshold; the most probable
// foreground class when none does.
std::vector<std::size_t> predicted_classes(const ScoreTracks& tracks, double class_threshold);

// Mean of `score` over [start, end) minus its mean over the two flanks of
// `flank` times the interval length (at least one segment each side).
double outer_inner_contrast(std::span<const double> score, std::size_t start, std::size_t end, double flank);

std::vector<Proposal> proposals_from_tracks(const ScoreTracks& tracks, double seconds_per_segment,
                                            const InferenceConfig& config);

// Video embedding and localisation head only.
std::vector<Proposal> infer(const corpus::VideoSample& video, const model::Model& model,
                            const InferenceConfig& config = {});

std::vector<GroundTruth> ground_truth_of(const std::vector<corpus::VideoSample>& videos);

struct SplitResult {
  std::map<std::string, std::vector<Proposal>> proposals;
  EvalReport report;
};
SplitResult evaluate_split(const std::vector<corpus::VideoSample>& videos, const model::Model& model,
                           std::vector<std::string> class_names, const InferenceConfig& config = {});

}  // namespace wtal::eval
