#include "wtal/model/config.hpp"

#include "wtal/errors.hpp"

namespace wtal::model {

ModelConfig ModelConfig::full(std::size_t num_classes, std::size_t feature_dim, std::size_t vocab_size,
                               std::size_t max_key_length) {
  ModelConfig c;
  c.num_classes = num_classes;
  c.feature_dim = feature_dim;
  c.vocab_size = vocab_size;
  c.max_key_length = max_key_length;
  return c;
}

ModelConfig ModelConfig::desk(std::size_t num_classes, std::size_t feature_dim, std::size_t vocab_size,
                              std::size_t max_key_length) {
  ModelConfig c = full(num_classes, feature_dim, vocab_size, max_key_length);
  c.embed_dim = 64;
  c.attention_hidden = 32;
  c.text_ff = 128;
  c.recon_dim = 64;
  c.head_hidden = 64;
  return c;
}

void ModelConfig::validate() const {
  if (num_classes < 1) throw ConfigError("model: num_classes must be >= 1");
  if (feature_dim == 0 || embed_dim == 0 || attention_hidden == 0 || text_ff == 0 || word_dim == 0 ||
      recon_dim == 0 || head_hidden == 0) {
    throw ConfigError("model: all widths must be positive");
  }
  if (text_heads == 0 || embed_dim % text_heads != 0) {
    throw ConfigError("model: embed_dim must be divisible by text_heads");
  }
  if (vocab_size < 4) throw ConfigError("model: vocabulary too small");
  if (max_key_length == 0) throw ConfigError("model: max_key_length must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("model: temperature must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
}

}  // namespace wtal::model
