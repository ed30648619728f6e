#include "wtal/corpus/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "wtal/errors.hpp"

namespace wtal::corpus {

void CorpusConfig::validate() const {
  if (num_classes < 2) throw ConfigError("corpus: need at least 2 classes");
  if (num_train < 0 || num_test < 0 || num_train + num_test == 0) throw ConfigError("corpus: need at least one video");
  if (t_min < 16 || t_max > 512 || t_min > t_max) throw ConfigError("corpus: T range must lie within [16, 512]");
  if (feature_dim < 1) throw ConfigError("corpus: feature_dim must be positive");
  if (!(snr > 0.0)) throw ConfigError("corpus: snr must be positive");
  if (max_instances < 1) throw ConfigError("corpus: max_instances must be >= 1");
  if (!(0.0 < min_instance_frac && min_instance_frac <= max_instance_frac && max_instance_frac < 1.0)) {
    throw ConfigError("corpus: instance length fractions must satisfy 0 < min <= max < 1");
  }
  if (!(0.0 <= edge_amplitude && edge_amplitude <= 1.0)) throw ConfigError("corpus: edge_amplitude outside [0, 1]");
  if (!(0.0 <= confuser_prob && confuser_prob <= 1.0)) throw ConfigError("corpus: confuser_prob outside [0, 1]");
  if (!(0.0 <= confuser_strength && confuser_strength < 1.0)) {
    throw ConfigError("corpus: confuser_strength outside [0, 1)");
  }
  if (!(seconds_per_segment > 0.0)) throw ConfigError("corpus: seconds_per_segment must be positive");
}

namespace {

using Rng = std::mt19937_64;

struct Planted {
  int cls;
  int start;
  int end;
};

// Segment roles while composing a video.
enum class Kind : std::uint8_t { kBackground, kAction, kConfuser };

std::vector<Planted> place_instances(Rng& rng, const CorpusConfig& cfg, int t_len, const std::vector<int>& classes) {
  std::uniform_int_distribution<int> count_dist(static_cast<int>(classes.size()),
                                                std::max<int>(cfg.max_instances, static_cast<int>(classes.size())));
  const int wanted = count_dist(rng);
  const int min_len = std::max(4, static_cast<int>(std::lround(cfg.min_instance_frac * t_len)));
  const int max_len = std::max(min_len, static_cast<int>(std::lround(cfg.max_instance_frac * t_len)));
  std::uniform_int_distribution<int> len_dist(min_len, max_len);

  std::vector<Planted> out;
  // Every labelled class gets at least one instance; extra instances cycle
  // through the label.
  for (int i = 0, attempts = 0; i < wanted && attempts < 200; ++attempts) {
    const int cls = classes[static_cast<std::size_t>(i) % classes.size()];
    const int len = len_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, t_len - len);
    const int start = start_dist(rng);
    // Keep a 4-segment gap so confusers and boundaries stay unambiguous.
    const bool clash = std::any_of(out.begin(), out.end(), [&](const Planted& p) {
      return start < p.end + 4 && p.start < start + len + 4;
    });
    if (clash) continue;
    out.push_back({cls, start, start + len});
    ++i;
  }
  // A label class that could not be placed is dropped from the label later;
  // guarantee at least one instance.
  if (out.empty()) {
    const int len = std::min(min_len, t_len);
    out.push_back({classes.front(), 0, len});
  }
  std::sort(out.begin(), out.end(), [](const Planted& a, const Planted& b) { return a.start < b.start; });
  return out;
}

VideoSample make_video(Rng& rng, const CorpusConfig& cfg, const std::vector<std::vector<double>>& protos,
                       const std::string& id) {
  const int C = cfg.num_classes;
  const std::size_t D = static_cast<std::size_t>(cfg.feature_dim);
  std::uniform_int_distribution<int> t_dist(cfg.t_min, cfg.t_max);
  const int t_len = t_dist(rng);

  std::uniform_int_distribution<int> cls_dist(0, C - 1);
  std::vector<int> classes{cls_dist(rng)};
  if (std::bernoulli_distribution(cfg.multi_class_prob)(rng)) {
    int second = cls_dist(rng);
    while (second == classes.front()) second = cls_dist(rng);
    classes.push_back(second);
    std::sort(classes.begin(), classes.end());
  }
  const auto planted = place_instances(rng, cfg, t_len, classes);

  std::vector<Kind> kind(static_cast<std::size_t>(t_len), Kind::kBackground);
  std::vector<int> seg_class(static_cast<std::size_t>(t_len), C);
  std::vector<double> amplitude(static_cast<std::size_t>(t_len), 0.0);
  for (const auto& p : planted) {
    const int len = p.end - p.start;
    for (int t = p.start; t < p.end; ++t) {
      const double phase = std::sin(std::numbers::pi * (t - p.start + 0.5) / len);
      kind[t] = Kind::kAction;
      seg_class[t] = p.cls;
      amplitude[t] = cfg.edge_amplitude + (1.0 - cfg.edge_amplitude) * phase;
    }
  }
  std::bernoulli_distribution confuser_coin(cfg.confuser_prob);
  std::bernoulli_distribution side_coin(0.5);
  for (const auto& p : planted) {
    if (!confuser_coin(rng)) continue;
    const int len = p.end - p.start;
    std::uniform_int_distribution<int> run_dist(2, std::max(2, len / 2));
    const int run = run_dist(rng);
    const bool before = side_coin(rng);
    const int from = before ? p.start - run : p.end;
    for (int t = from; t < from + run; ++t) {
      if (t < 0 || t >= t_len || kind[t] != Kind::kBackground) continue;
      // Leave one clean segment before any other instance.
      if ((t + 1 < t_len && kind[t + 1] == Kind::kAction && seg_class[t + 1] != p.cls) ||
          (t > 0 && kind[t - 1] == Kind::kAction && seg_class[t - 1] != p.cls)) {
        continue;
      }
      kind[t] = Kind::kConfuser;
      seg_class[t] = p.cls;
    }
  }

  const double sigma = std::isinf(cfg.snr) ? 0.0 : 1.0 / cfg.snr;
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> rgb(static_cast<std::size_t>(t_len) * D), flow(static_cast<std::size_t>(t_len) * D);
  const auto& background = protos[static_cast<std::size_t>(C)];
  for (int t = 0; t < t_len; ++t) {
    for (std::size_t d = 0; d < 2 * D; ++d) {
      double v = 0.0;
      switch (kind[t]) {
        case Kind::kBackground:
          v = background[d];
          break;
        case Kind::kAction:
          v = amplitude[t] * protos[seg_class[t]][d];
          break;
        case Kind::kConfuser:
          v = background[d] + cfg.confuser_strength * protos[seg_class[t]][d];
          break;
      }
      if (sigma > 0.0) v += sigma * noise(rng);
      // Stored as float on disk, so keep values float-representable.
      const double stored = static_cast<double>(static_cast<float>(v));
      if (d < D) {
        rgb[static_cast<std::size_t>(t) * D + d] = stored;
      } else {
        flow[static_cast<std::size_t>(t) * D + d - D] = stored;
      }
    }
  }

  VideoSample video;
  video.id = id;
  video.rgb = nn::Tensor::from({static_cast<std::size_t>(t_len), D}, std::move(rgb));
  video.flow = nn::Tensor::from({static_cast<std::size_t>(t_len), D}, std::move(flow));
  video.label.assign(static_cast<std::size_t>(C), 0);
  for (const auto& p : planted) {
    video.label[p.cls] = 1;
    video.gt_intervals.push_back({p.cls, static_cast<double>(p.start), static_cast<double>(p.end)});
  }
  video.seconds_per_segment = cfg.seconds_per_segment;
  return video;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t width = 2 * static_cast<std::size_t>(config.feature_dim);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> protos(static_cast<std::size_t>(config.num_classes) + 1,
                                          std::vector<double>(width));
  for (auto& p : protos)
    for (auto& v : p) v = unit(rng);

  Corpus corpus;
  corpus.config = config;
  std::vector<double> flat;
  for (const auto& p : protos) flat.insert(flat.end(), p.begin(), p.end());
  corpus.prototypes = nn::Tensor::from({protos.size(), width}, std::move(flat));

  const int total = config.num_train + config.num_test;
  for (int i = 0; i < total; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "video_%04d", i);
    auto video = make_video(rng, config, protos, id);
    (i < config.num_train ? corpus.train : corpus.test).push_back(std::move(video));
  }
  return corpus;
}

}  // namespace wtal::corpus
