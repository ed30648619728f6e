#include "wtal/eval/inference.hpp"

#include <algorithm>
#include <cmath>

#include "wtal/errors.hpp"

namespace wtal::eval {

ScoreTracks compute_tracks(const model::Model& model, const nn::Tensor& fused_features, std::size_t topk_divisor) {
  ScoreTracks tr;
  tr.num_classes = model.config.num_classes;
  tr.t_len = fused_features.numel() == 0 ? 0 : fused_features.rows();
  if (tr.t_len == 0) return tr;
  nn::Rng unused(0);
  const auto emb = model::embed_video(fused_features, model.ksm, model.config.dropout, unused, false);
  const auto head = model::loc_head_forward(emb.features, model.head);
  const auto a_csr = model::csr_attention(emb.features, model.csr);
  const auto probs = nn::softmax(head.logits, 1);
  const auto video = model::video_scores(head.logits, model::default_topk(tr.t_len, topk_divisor));
  tr.attention.assign(emb.attention.data().begin(), emb.attention.data().end());
  tr.csr_attention.assign(a_csr.data().begin(), a_csr.data().end());
  tr.probs.assign(probs.data().begin(), probs.data().end());
  tr.offsets.assign(head.offsets.data().begin(), head.offsets.data().end());
  tr.video_probs.assign(video.p.data().begin(), video.p.data().end());
  return tr;
}

std::vector<std::size_t> predicted_classes(const ScoreTracks& tracks, double class_threshold) {
  std::vector<std::size_t> out;
  if (tracks.video_probs.empty()) return out;
  std::size_t best = 0;
  for (std::size_t c = 0; c < tracks.num_classes; ++c) {
    if (tracks.video_probs[c] >= class_threshold) out.push_back(c);
    if (tracks.video_probs[c] > tracks.video_probs[best]) best = c;
  }
  if (out.empty()) out.push_back(best);
  return out;
}

double outer_inner_contrast(std::span<const double> score, std::size_t start, std::size_t end, double flank) {
  const std::size_t t_len = score.size();
  end = std::min(end, t_len);
  if (start >= end) return 0.0;
  double inner = 0.0;
  for (std::size_t t = start; t < end; ++t) inner += score[t];
  inner /= static_cast<double>(end - start);
  const auto width = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(flank * static_cast<double>(end - start))));
  double outer = 0.0;
  std::size_t n = 0;
  for (std::size_t t = start >= width ? start - width : 0; t < start; ++t, ++n) outer += score[t];
  for (std::size_t t = end; t < std::min(t_len, end + width); ++t, ++n) outer += score[t];
  return inner - (n ? outer / static_cast<double>(n) : 0.0);
}

std::vector<Proposal> proposals_from_tracks(const ScoreTracks& tracks, double seconds_per_segment,
                                            const InferenceConfig& config) {
  std::vector<Proposal> candidates;
  const std::size_t t_len = tracks.t_len;
  if (t_len == 0) return {};
  std::vector<double> score(t_len);
  for (std::size_t c : predicted_classes(tracks, config.class_threshold)) {
    for (std::size_t t = 0; t < t_len; ++t) score[t] = tracks.fused(t, c);
    for (double theta : config.thresholds) {
      std::size_t t = 0;
      while (t < t_len) {
        if (!(score[t] > theta)) {
          ++t;
          continue;
        }
        const std::size_t s = t;
        while (t < t_len && score[t] > theta) ++t;
        const std::size_t e = t;
        candidates.push_back({static_cast<int>(c), outer_inner_contrast(score, s, e, config.flank),
                              static_cast<double>(s), static_cast<double>(e)});
        // Interval regressed from the averaged per-segment offsets.
        double rs = 0.0, re = 0.0;
        for (std::size_t u = s; u < e; ++u) {
          rs += static_cast<double>(u) + 0.5 - tracks.offsets[2 * u];
          re += static_cast<double>(u) + 0.5 + tracks.offsets[2 * u + 1];
        }
        rs = std::clamp(rs / static_cast<double>(e - s), 0.0, static_cast<double>(t_len));
        re = std::clamp(re / static_cast<double>(e - s), 0.0, static_cast<double>(t_len));
        if (re - rs >= 1.0) {
          const auto si = static_cast<std::size_t>(std::floor(rs));
          const auto ei = static_cast<std::size_t>(std::ceil(re));
          candidates.push_back({static_cast<int>(c), outer_inner_contrast(score, si, ei, config.flank), rs, re});
        }
      }
    }
  }
  auto kept = nms(std::move(candidates), config.nms_iou);
  for (auto& p : kept) {
    p.t_s *= seconds_per_segment;
    p.t_e *= seconds_per_segment;
  }
  return kept;
}

std::vector<Proposal> infer(const corpus::VideoSample& video, const model::Model& model,
                            const InferenceConfig& config) {
  if (video.num_classes() != model.config.num_classes) {
    throw ArgumentError("infer: video has " + std::to_string(video.num_classes()) + " classes, model has " +
                        std::to_string(model.config.num_classes));
  }
  const auto tracks = compute_tracks(model, model::fuse_features(video.rgb, video.flow), config.topk_divisor);
  return proposals_from_tracks(tracks, video.seconds_per_segment, config);
}

std::vector<GroundTruth> ground_truth_of(const std::vector<corpus::VideoSample>& videos) {
  std::vector<GroundTruth> out;
  for (const auto& v : videos) {
    for (const auto& g : v.gt_intervals) {
      out.push_back({v.id, g.cls, {g.start_seg * v.seconds_per_segment, g.end_seg * v.seconds_per_segment}});
    }
  }
  return out;
}

SplitResult evaluate_split(const std::vector<corpus::VideoSample>& videos, const model::Model& model,
                           std::vector<std::string> class_names, const InferenceConfig& config) {
  SplitResult r;
  for (const auto& v : videos) r.proposals[v.id] = infer(v, model, config);
  r.report = map_table(r.proposals, ground_truth_of(videos), std::move(class_names));
  return r;
}

}  // namespace wtal::eval
