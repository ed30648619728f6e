#pragma once

#include <cstdint>
#include <vector>

#include "wtal/model/config.hpp"
#include "wtal/model/layers.hpp"

namespace wtal::model {

// One pre-norm transformer encoder layer over the class query sequences.
struct TextEncoderLayer {
  LayerNorm norm1;
  Tensor wq, wk, wv;  // [E x E], heads are column blocks
  Linear out;
  LayerNorm norm2;
  Linear ff1, ff2;

  void collect(const std::string& prefix, ParamList& out) const;
};

struct KsmParams {
  Conv1d embed1, embed2;
  AttentionStack attention;
  Tensor start_token;     // [1 x E]
  Tensor context;         // [N_context x E]
  Tensor background_key;  // [max_key_length x E], zero at initialisation
  Tensor key_projection;  // [word_dim x E]
  TextEncoderLayer text;

  static KsmParams init(const ModelConfig& config, Rng& rng);
  // Video embedding + attention only (what inference needs).
  void collect_video(ParamList& out) const;
  void collect_text(ParamList& out) const;
  ParamList parameters() const;
};

struct VideoEmbedding {
  Tensor features;   // F_e [T x E]
  Tensor attention;  // A [T x 1]
};

struct QueryTokens {
  std::vector<Tensor> sequences;         // C+1 entries of [L x E]
  std::vector<std::vector<bool>> valid;  // false on padding rows
};

struct KsmForward {
  Tensor features;   // F_e
  Tensor attention;  // A_KSM
  Tensor similarity;             // M
  Tensor suppressed_similarity;  // M_hat
  Tensor p, p_hat;
};

// max(1, floor(T / divisor))
std::size_t default_topk(std::size_t t_len, std::size_t divisor = 8);

Tensor fuse_features(const Tensor& rgb, const Tensor& flow);

// F_e = ReLU(conv(dropout(ReLU(conv(F))))), A = sigmoid(attention stack(F_e)).
VideoEmbedding embed_video(const Tensor& fused, const KsmParams& params, double dropout_p, Rng& rng, bool training);

// key_texts[c] holds the word vectors [len_c x word_dim] of class c's key
// description, for the C foreground classes.
QueryTokens build_query_tokens(const std::vector<Tensor>& key_texts, const KsmParams& params,
                               const ModelConfig& config);

// Output of the text encoder at the [START] position of each class sequence.
Tensor encode_text_query(const QueryTokens& tokens, const KsmParams& params, const ModelConfig& config);

struct Similarity {
  Tensor m;
  Tensor m_hat;
};
// Temperature-scaled cosine similarity between segments and class queries,
// plus the attention-suppressed copy.
Similarity match(const Tensor& features, const Tensor& attention, const Tensor& queries, double temperature);

struct VideoScores {
  Tensor s;
  Tensor p;
};
VideoScores video_scores(const Tensor& similarity, std::size_t k);

// Target for the unsuppressed scores: label with background = 1, normalised.
std::vector<double> ksm_target(std::span<const std::uint8_t> label, bool with_background);

Tensor ksm_loss(const Tensor& p, const Tensor& p_hat, std::span<const std::uint8_t> label);

KsmForward ksm_forward(const Tensor& fused, const Tensor& queries, const KsmParams& params, const ModelConfig& config,
                       std::size_t k, Rng& dropout_rng, bool training);

}  // namespace wtal::model
