#include "wtal/model/csr.hpp"

#include <cmath>

#include "wtal/errors.hpp"

namespace wtal::model {

CsrParams CsrParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.recon_dim;
  CsrParams p;
  p.video_fc = Linear::init(config.feature_dim, d, rng);
  p.attention = AttentionStack::init(config.embed_dim, config.attention_hidden, rng);
  p.text_fc = Linear::init(config.word_dim, d, rng);
  p.wq = uniform_param({d, d}, d, rng);
  p.wk = uniform_param({d, d}, d, rng);
  p.wv = uniform_param({d, d}, d, rng);
  p.wqd = uniform_param({d, d}, d, rng);
  p.wkd = uniform_param({d, d}, d, rng);
  p.wvd = uniform_param({d, d}, d, rng);
  p.output = Linear::init(d, config.vocab_size, rng);
  return p;
}

ParamList CsrParams::parameters() const {
  ParamList out;
  video_fc.collect("csr.video_fc", out);
  attention.collect("csr.attention", out);
  text_fc.collect("csr.text_fc", out);
  out.emplace_back("csr.wq", wq);
  out.emplace_back("csr.wk", wk);
  out.emplace_back("csr.wv", wv);
  out.emplace_back("csr.wqd", wqd);
  out.emplace_back("csr.wkd", wkd);
  out.emplace_back("csr.wvd", wvd);
  output.collect("csr.output", out);
  return out;
}

Tensor embed_video_fc(const Tensor& fused, const CsrParams& params) { return params.video_fc(fused); }

Tensor csr_attention(const Tensor& features, const CsrParams& params) { return params.attention(features); }

Tensor positional_encoding(std::size_t length, std::size_t width) {
  std::vector<double> v(length * width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * freq;
      v[pos * width + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, width}, std::move(v));
}

Tensor embed_text(const Tensor& word_vectors, const CsrParams& params) {
  Tensor projected = params.text_fc(word_vectors);
  return nn::add(projected, positional_encoding(projected.rows(), projected.cols()));
}

Tensor reconstruct_encode(const Tensor& complete, const Tensor& attention, const CsrParams& params) {
  if (attention.numel() != complete.rows()) throw DimensionError("reconstruct_encode: attention length differs from T");
  return nn::masked_scaled_attention(nn::matmul(complete, params.wq), nn::matmul(complete, params.wk),
                                     nn::matmul(complete, params.wv), attention);
}

Tensor reconstruct_decode(const Tensor& text, const Tensor& foreground, const Tensor& attention,
                          const CsrParams& params) {
  if (text.cols() != params.wqd.rows() || foreground.cols() != params.wkd.rows()) {
    throw DimensionError("reconstruct_decode: width mismatch, text " + nn::shape_str(text.shape()) + ", video " +
                         nn::shape_str(foreground.shape()));
  }
  if (attention.numel() != foreground.rows()) {
    throw DimensionError("reconstruct_decode: attention length differs from T");
  }
  return nn::masked_scaled_attention(nn::matmul(text, params.wqd), nn::matmul(foreground, params.wkd),
                                     nn::matmul(foreground, params.wvd), attention);
}

Tensor word_distributions(const Tensor& hidden, const CsrParams& params) {
  return nn::softmax(params.output(hidden), 1);
}

Tensor csr_loss(const Tensor& word_dists, std::span<const std::size_t> targets,
                std::span<const std::size_t> positions) {
  if (positions.empty()) throw ArgumentError("csr_loss: no masked positions");
  if (targets.size() != positions.size()) throw ArgumentError("csr_loss: targets and positions differ in length");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] >= word_dists.rows() || targets[i] >= word_dists.cols()) {
      throw ArgumentError("csr_loss: position or target out of range");
    }
  }
  return nn::scale(nn::sum(nn::log_clamped(nn::pick(word_dists, positions, targets))), -1.0);
}

CsrForward csr_forward(const Tensor& fused, const Tensor& features, const Tensor& word_vectors,
                       const CsrParams& params) {
  CsrForward f;
  f.complete = embed_video_fc(fused, params);
  f.attention = csr_attention(features, params);
  f.text = embed_text(word_vectors, params);
  f.foreground = reconstruct_encode(f.complete, f.attention, params);
  f.hidden = reconstruct_decode(f.text, f.foreground, f.attention, params);
  f.word_dists = word_distributions(f.hidden, params);
  return f;
}

}  // namespace wtal::model
