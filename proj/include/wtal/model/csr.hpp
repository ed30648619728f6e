#pragma once

#include <vector>

#include "wtal/model/config.hpp"
#include "wtal/model/layers.hpp"

namespace wtal::model {

struct CsrParams {
  Linear video_fc;  // feature_dim -> d_h
  AttentionStack attention;
  Linear text_fc;   // word_dim -> d_h
  Tensor wq, wk, wv;     // encoder, [d_h x d_h]
  Tensor wqd, wkd, wvd;  // decoder, [d_h x d_h]
  Linear output;    // d_h -> vocabulary

  static CsrParams init(const ModelConfig& config, Rng& rng);
  ParamList parameters() const;
};

struct CsrForward {
  Tensor complete;    // F_complete [T x d_h]
  Tensor attention;   // A_CSR [T x 1]
  Tensor text;        // F_c [m x d_h]
  Tensor foreground;  // F_fg [T x d_h]
  Tensor hidden;      // H [m x d_h]
  Tensor word_dists;  // [m x V]
};

Tensor embed_video_fc(const Tensor& fused, const CsrParams& params);
Tensor csr_attention(const Tensor& features, const CsrParams& params);

// Projected word vectors plus a sinusoidal position code.
Tensor embed_text(const Tensor& word_vectors, const CsrParams& params);
Tensor positional_encoding(std::size_t length, std::size_t width);

// softmax((F Wq)(F Wk)^T / sqrt(d) * A column-wise) (F Wv)
Tensor reconstruct_encode(const Tensor& complete, const Tensor& attention, const CsrParams& params);
// Cross attention: queries from the sentence, keys and values from F_fg.
Tensor reconstruct_decode(const Tensor& text, const Tensor& foreground, const Tensor& attention,
                          const CsrParams& params);
Tensor word_distributions(const Tensor& hidden, const CsrParams& params);

// Summed negative log-likelihood of targets[i] at row positions[i].
Tensor csr_loss(const Tensor& word_dists, std::span<const std::size_t> targets,
                std::span<const std::size_t> positions);

// features is the shared video embedding F_e; word_vectors embeds the masked
// sentence.
CsrForward csr_forward(const Tensor& fused, const Tensor& features, const Tensor& word_vectors,
                       const CsrParams& params);

}  // namespace wtal::model
