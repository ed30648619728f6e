#include "wtal/model/lochead.hpp"

#include <algorithm>

#include "wtal/errors.hpp"
#include "wtal/eval/metrics.hpp"
#include "wtal/model/ksm.hpp"

namespace wtal::model {

LocHeadParams LocHeadParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t e = config.embed_dim, h = config.head_hidden;
  LocHeadParams p;
  p.cls_hidden = Conv1d::init(e, h, 3, rng);
  p.cls_out = Conv1d::init(h, config.num_classes + 1, 3, rng);
  p.reg_hidden = Conv1d::init(e, h, 3, rng);
  p.reg_out = Conv1d::init(h, 2, 3, rng);
  return p;
}

ParamList LocHeadParams::parameters() const {
  ParamList out;
  cls_hidden.collect("head.cls_hidden", out);
  cls_out.collect("head.cls_out", out);
  reg_hidden.collect("head.reg_hidden", out);
  reg_out.collect("head.reg_out", out);
  return out;
}

LocHeadOutput loc_head_forward(const Tensor& features, const LocHeadParams& params) {
  return {params.cls_out(nn::relu(params.cls_hidden(features))),
          nn::softplus(params.reg_out(nn::relu(params.reg_hidden(features))))};
}

std::vector<double> default_mining_thresholds() { return {0.3, 0.4, 0.5, 0.6}; }

std::vector<PseudoProposal> mine_pseudo_proposals(std::span<const double> attention, const Tensor& scores,
                                                  std::span<const std::uint8_t> label,
                                                  std::span<const double> thresholds, double nms_iou) {
  const std::size_t t_len = attention.size();
  if (scores.rows() != t_len) throw DimensionError("mine_pseudo_proposals: score rows differ from attention length");
  if (scores.cols() < label.size()) throw DimensionError("mine_pseudo_proposals: fewer score columns than classes");

  std::vector<eval::Proposal> found;
  std::vector<double> act(t_len);
  for (std::size_t c = 0; c < label.size(); ++c) {
    if (!label[c]) continue;
    double lo = scores.at(0, c), hi = lo;
    for (std::size_t t = 1; t < t_len; ++t) {
      lo = std::min(lo, scores.at(t, c));
      hi = std::max(hi, scores.at(t, c));
    }
    const double range = hi - lo;
    for (std::size_t t = 0; t < t_len; ++t) {
      act[t] = range > 0.0 ? attention[t] * (scores.at(t, c) - lo) / range : 0.0;
    }
    for (double theta : thresholds) {
      std::size_t t = 0;
      while (t < t_len) {
        if (!(act[t] > theta)) {
          ++t;
          continue;
        }
        const std::size_t start = t;
        double total = 0.0;
        while (t < t_len && act[t] > theta) total += act[t++];
        found.push_back({static_cast<int>(c), total / static_cast<double>(t - start), static_cast<double>(start),
                         static_cast<double>(t)});
      }
    }
  }
  std::vector<PseudoProposal> out;
  for (const auto& p : eval::nms(std::move(found), nms_iou)) {
    out.push_back({p.cls, static_cast<std::size_t>(p.t_s), static_cast<std::size_t>(p.t_e), p.q});
  }
  return out;
}

std::vector<std::size_t> pseudo_segment_labels(const std::vector<PseudoProposal>& proposals, std::size_t t_len,
                                               std::size_t num_classes) {
  std::vector<std::size_t> labels(t_len, num_classes);
  std::vector<double> best(t_len, -1.0);
  for (const auto& p : proposals) {
    for (std::size_t t = p.start_seg; t < std::min(p.end_seg, t_len); ++t) {
      if (p.confidence > best[t]) {
        best[t] = p.confidence;
        labels[t] = static_cast<std::size_t>(p.cls);
      }
    }
  }
  return labels;
}

Tensor focal_loss(const Tensor& logits, std::span<const std::size_t> labels, double gamma,
                  std::optional<double> alpha) {
  const std::size_t t_len = logits.rows(), classes = logits.cols();
  if (labels.size() != t_len) throw DimensionError("focal_loss: one label per segment expected");
  std::vector<std::size_t> rows(t_len);
  std::vector<double> weights(t_len, 1.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    rows[t] = t;
    if (labels[t] >= classes) throw ArgumentError("focal_loss: label out of range");
    if (alpha) weights[t] = labels[t] + 1 == classes ? 1.0 - *alpha : *alpha;
  }
  Tensor pt = nn::pick(nn::softmax(logits, 1), rows, labels);
  Tensor modulator = nn::pow_scalar(nn::add_scalar(nn::scale(pt, -1.0), 1.0), gamma);
  Tensor per_segment = nn::mul(Tensor::vector(weights), nn::mul(modulator, nn::log_clamped(pt)));
  return nn::scale(nn::mean(per_segment), -1.0);
}

Tensor diou_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.defined() || !target.defined()) return Tensor::scalar(0.0);
  if (pred.cols() != 2 || target.cols() != 2 || pred.rows() != target.rows()) {
    throw DimensionError("diou_loss: expected matching [n x 2] intervals");
  }
  Tensor ps = nn::slice_cols(pred, 0, 1), pe = nn::slice_cols(pred, 1, 2);
  Tensor ts = nn::slice_cols(target, 0, 1), te = nn::slice_cols(target, 1, 2);
  Tensor inter = nn::relu(nn::sub(nn::minimum(pe, te), nn::maximum(ps, ts)));
  Tensor uni = nn::sub(nn::add(nn::sub(pe, ps), nn::sub(te, ts)), inter);
  Tensor iou = nn::div(inter, uni);
  Tensor enclosing = nn::sub(nn::maximum(pe, te), nn::minimum(ps, ts));
  Tensor centre_gap = nn::scale(nn::sub(nn::add(ps, pe), nn::add(ts, te)), 0.5);
  Tensor penalty = nn::div(nn::mul(centre_gap, centre_gap), nn::mul(enclosing, enclosing));
  Tensor per_row = nn::add(nn::add_scalar(nn::scale(iou, -1.0), 1.0), penalty);
  return nn::mean(per_row);
}

RegressionPairs regression_pairs(const Tensor& offsets, const std::vector<PseudoProposal>& proposals) {
  std::vector<std::size_t> rows, col0, col1;
  std::vector<double> centres, targets;
  for (const auto& p : proposals) {
    for (std::size_t t = p.start_seg; t < std::min(p.end_seg, offsets.rows()); ++t) {
      rows.push_back(t);
      col0.push_back(0);
      col1.push_back(1);
      centres.push_back(static_cast<double>(t) + 0.5);
      targets.push_back(static_cast<double>(p.start_seg));
      targets.push_back(static_cast<double>(p.end_seg));
    }
  }
  const std::size_t n = rows.size();
  if (n == 0) return {};
  Tensor centre = Tensor::vector(centres);
  Tensor start = nn::sub(centre, nn::pick(offsets, rows, col0));
  Tensor end = nn::add(centre, nn::pick(offsets, rows, col1));
  Tensor pred = nn::concat({start.reshape({n, 1}), end.reshape({n, 1})}, 1);
  return {pred, Tensor::from({n, 2}, std::move(targets))};
}

Tensor mil_loss(const Tensor& logits, std::span<const std::uint8_t> label, std::size_t k) {
  if (logits.cols() != label.size() + 1) throw DimensionError("mil_loss: expected C+1 logit columns");
  const auto scores = video_scores(logits, k);
  const Tensor y = Tensor::vector(ksm_target(label, true));
  return nn::scale(nn::sum(nn::mul(y, nn::log_clamped(scores.p))), -1.0);
}

LocLossTerms loc_loss(const LocHeadOutput& out, const std::vector<PseudoProposal>& proposals,
                      std::span<const std::uint8_t> label, std::size_t k) {
  LocLossTerms terms;
  const auto labels = pseudo_segment_labels(proposals, out.logits.rows(), label.size());
  terms.focal = focal_loss(out.logits, labels);
  const auto pairs = regression_pairs(out.offsets, proposals);
  terms.diou = diou_loss(pairs.pred, pairs.target);
  terms.mil = mil_loss(out.logits, label, k);
  terms.total = nn::add(nn::add(terms.focal, terms.diou), terms.mil);
  return terms;
}

}  // namespace wtal::model
