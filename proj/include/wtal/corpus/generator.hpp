#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "wtal/corpus/sample.hpp"

namespace wtal::corpus {

// Synthetic untrimmed-video corpus. Segments inside a planted instance of
// class c are a class prototype (scaled by an amplitude profile that fades
// towards the instance edges) plus Gaussian noise; other segments come from
// a shared background prototype. Some background runs next to instances are
// "confusers": background plus a weakened copy of the neighbouring class
// prototype.
struct CorpusConfig {
  int num_classes = 5;
  int num_train = 60;
  int num_test = 20;
  int t_min = 64;
  int t_max = 128;
  int feature_dim = 1024;  // per stream
  // Per-dimension prototype-to-noise ratio; infinity disables noise.
  double snr = 0.25;
  int max_instances = 4;
  double multi_class_prob = 0.3;
  double min_instance_frac = 1.0 / 16.0;
  double max_instance_frac = 1.0 / 5.0;
  // Amplitude at the instance edges; 1 at the centre.
  double edge_amplitude = 0.5;
  // Probability that an instance gets an adjacent confuser run.
  double confuser_prob = 0.7;
  // Strength of the class prototype inside a confuser segment.
  double confuser_strength = 0.5;
  double seconds_per_segment = 0.64;
  std::uint64_t seed = 7;

  void validate() const;
};

struct Corpus {
  CorpusConfig config;
  std::vector<VideoSample> train;
  std::vector<VideoSample> test;
  // Row c < C is the prototype of class c, row C is the background, each of
  // width 2 * feature_dim (rgb followed by flow).
  nn::Tensor prototypes;
};

Corpus generate_corpus(const CorpusConfig& config);

}  // namespace wtal::corpus
