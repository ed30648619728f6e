#include "wtal/model/ksm.hpp"

#include <cmath>

#include "wtal/errors.hpp"

namespace wtal::model {

void TextEncoderLayer::collect(const std::string& prefix, ParamList& out) const {
  norm1.collect(prefix + ".norm1", out);
  out.emplace_back(prefix + ".wq", wq);
  out.emplace_back(prefix + ".wk", wk);
  out.emplace_back(prefix + ".wv", wv);
  this->out.collect(prefix + ".out", out);
  norm2.collect(prefix + ".norm2", out);
  ff1.collect(prefix + ".ff1", out);
  ff2.collect(prefix + ".ff2", out);
}

KsmParams KsmParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t e = config.embed_dim;
  KsmParams p;
  p.embed1 = Conv1d::init(config.feature_dim, e, 3, rng);
  p.embed2 = Conv1d::init(e, e, 3, rng);
  p.attention = AttentionStack::init(e, config.attention_hidden, rng);
  p.start_token = normal_param({1, e}, 0.02, rng);
  p.context = normal_param({config.context_tokens, e}, 0.02, rng);
  p.background_key = Tensor::zeros({config.max_key_length, e}, true);
  p.key_projection = uniform_param({config.word_dim, e}, config.word_dim, rng);
  p.text.norm1 = LayerNorm::init(e);
  p.text.wq = uniform_param({e, e}, e, rng);
  p.text.wk = uniform_param({e, e}, e, rng);
  p.text.wv = uniform_param({e, e}, e, rng);
  p.text.out = Linear::init(e, e, rng);
  p.text.norm2 = LayerNorm::init(e);
  p.text.ff1 = Linear::init(e, config.text_ff, rng);
  p.text.ff2 = Linear::init(config.text_ff, e, rng);
  return p;
}

void KsmParams::collect_video(ParamList& out) const {
  embed1.collect("ksm.embed1", out);
  embed2.collect("ksm.embed2", out);
  attention.collect("ksm.attention", out);
}

void KsmParams::collect_text(ParamList& out) const {
  out.emplace_back("ksm.start_token", start_token);
  out.emplace_back("ksm.context", context);
  out.emplace_back("ksm.background_key", background_key);
  out.emplace_back("ksm.key_projection", key_projection);
  text.collect("ksm.text", out);
}

ParamList KsmParams::parameters() const {
  ParamList out;
  collect_video(out);
  collect_text(out);
  return out;
}

std::size_t default_topk(std::size_t t_len, std::size_t divisor) {
  return std::max<std::size_t>(1, t_len / std::max<std::size_t>(1, divisor));
}

Tensor fuse_features(const Tensor& rgb, const Tensor& flow) {
  if (rgb.ndim() != 2 || flow.ndim() != 2) throw DimensionError("fuse_features: expected [T x D] streams");
  if (rgb.rows() != flow.rows()) {
    throw DimensionError("fuse_features: rgb has " + std::to_string(rgb.rows()) + " segments, flow has " +
                         std::to_string(flow.rows()));
  }
  return nn::concat({rgb, flow}, 1);
}

VideoEmbedding embed_video(const Tensor& fused, const KsmParams& params, double dropout_p, Rng& rng, bool training) {
  Tensor h = nn::relu(params.embed1(fused));
  h = nn::dropout(h, dropout_p, rng, training);
  Tensor features = nn::relu(params.embed2(h));
  return {features, params.attention(features)};
}

QueryTokens build_query_tokens(const std::vector<Tensor>& key_texts, const KsmParams& params,
                               const ModelConfig& config) {
  if (key_texts.size() != config.num_classes) {
    throw ArgumentError("build_query_tokens: expected " + std::to_string(config.num_classes) + " key texts, got " +
                        std::to_string(key_texts.size()));
  }
  const std::size_t e = config.embed_dim;
  const std::size_t prefix = 1 + config.context_tokens;
  const std::size_t len = config.query_length();
  QueryTokens out;
  for (std::size_t c = 0; c <= config.num_classes; ++c) {
    std::vector<Tensor> parts{params.start_token, params.context};
    std::vector<bool> valid(len, false);
    std::fill(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(prefix), true);
    if (c < config.num_classes) {
      const Tensor& words = key_texts[c];
      const std::size_t n = words.rows();
      if (n == 0 || n > config.max_key_length) {
        throw ArgumentError("build_query_tokens: key text of class " + std::to_string(c) + " has " +
                            std::to_string(n) + " tokens, allowed 1.." + std::to_string(config.max_key_length));
      }
      if (words.cols() != config.word_dim) throw DimensionError("build_query_tokens: word vector width mismatch");
      parts.push_back(nn::matmul(words, params.key_projection));
      if (n < config.max_key_length) parts.push_back(Tensor::zeros({config.max_key_length - n, e}));
      std::fill(valid.begin() + static_cast<std::ptrdiff_t>(prefix),
                valid.begin() + static_cast<std::ptrdiff_t>(prefix + n), true);
    } else {
      parts.push_back(params.background_key);
      std::fill(valid.begin(), valid.end(), true);
    }
    out.sequences.push_back(nn::concat(parts, 0));
    out.valid.push_back(std::move(valid));
  }
  return out;
}

Tensor encode_text_query(const QueryTokens& tokens, const KsmParams& params, const ModelConfig& config) {
  const auto& layer = params.text;
  const std::size_t e = config.embed_dim;
  const std::size_t heads = config.text_heads;
  const std::size_t dh = e / heads;
  std::vector<Tensor> rows;
  rows.reserve(tokens.sequences.size());
  for (std::size_t c = 0; c < tokens.sequences.size(); ++c) {
    const Tensor& x = tokens.sequences[c];
    Tensor h = layer.norm1(x);
    // Only the [START] row of the output is used, and in a single layer it
    // depends on the other rows only through keys and values.
    Tensor h0 = nn::slice_rows(h, 0, 1);
    Tensor q = nn::matmul(h0, layer.wq);
    Tensor k = nn::matmul(h, layer.wk);
    Tensor v = nn::matmul(h, layer.wv);
    std::vector<Tensor> head_out;
    for (std::size_t i = 0; i < heads; ++i) {
      head_out.push_back(nn::scaled_attention(nn::slice_cols(q, i * dh, (i + 1) * dh),
                                              nn::slice_cols(k, i * dh, (i + 1) * dh),
                                              nn::slice_cols(v, i * dh, (i + 1) * dh), tokens.valid[c]));
    }
    Tensor y = nn::add(nn::slice_rows(x, 0, 1), layer.out(heads == 1 ? head_out.front() : nn::concat(head_out, 1)));
    Tensor z = nn::add(y, layer.ff2(nn::relu(layer.ff1(layer.norm2(y)))));
    rows.push_back(z);
  }
  return nn::concat(rows, 0);
}

Similarity match(const Tensor& features, const Tensor& attention, const Tensor& queries, double temperature) {
  if (features.cols() != queries.cols()) throw DimensionError("match: feature and query widths differ");
  if (attention.numel() != features.rows()) throw DimensionError("match: attention length differs from T");
  Tensor m = nn::scale(nn::matmul(nn::normalize_rows(features), nn::transpose(nn::normalize_rows(queries))),
                       temperature);
  return {m, nn::scale_rows(m, attention)};
}

VideoScores video_scores(const Tensor& similarity, std::size_t k) {
  if (k < 1 || k > similarity.rows()) {
    throw ArgumentError("video_scores: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(similarity.rows()) + "]");
  }
  Tensor s = nn::topk_mean_columns(similarity, k);
  return {s, nn::softmax(s, 0)};
}

std::vector<double> ksm_target(std::span<const std::uint8_t> label, bool with_background) {
  std::vector<double> y(label.size() + 1, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < label.size(); ++c) {
    y[c] = label[c] ? 1.0 : 0.0;
    total += y[c];
  }
  if (total == 0.0) throw ArgumentError("video label has no positive class");
  if (with_background) {
    y.back() = 1.0;
    total += 1.0;
  }
  for (auto& v : y) v /= total;
  return y;
}

Tensor ksm_loss(const Tensor& p, const Tensor& p_hat, std::span<const std::uint8_t> label) {
  if (p.numel() != label.size() + 1 || p_hat.numel() != label.size() + 1) {
    throw DimensionError("ksm_loss: expected C+1 = " + std::to_string(label.size() + 1) + " probabilities");
  }
  const Tensor y = Tensor::vector(ksm_target(label, true));
  const Tensor y_hat = Tensor::vector(ksm_target(label, false));
  Tensor ce = nn::add(nn::sum(nn::mul(y, nn::log_clamped(p.reshape({p.numel()})))),
                      nn::sum(nn::mul(y_hat, nn::log_clamped(p_hat.reshape({p_hat.numel()})))));
  return nn::scale(ce, -1.0);
}

KsmForward ksm_forward(const Tensor& fused, const Tensor& queries, const KsmParams& params, const ModelConfig& config,
                       std::size_t k, Rng& dropout_rng, bool training) {
  auto video = embed_video(fused, params, config.dropout, dropout_rng, training);
  auto sim = match(video.features, video.attention, queries, config.temperature);
  auto plain = video_scores(sim.m, k);
  auto suppressed = video_scores(sim.m_hat, k);
  return {video.features, video.attention, sim.m, sim.m_hat, plain.p, suppressed.p};
}

}  // namespace wtal::model
