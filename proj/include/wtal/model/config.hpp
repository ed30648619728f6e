#pragma once

#include <cstddef>
#include <string>

namespace wtal::model {

// Widths of every learnable block. `full()` keeps the default widths;
// `desk()` shrinks them so a full training run fits a single CPU core.
struct ModelConfig {
  std::size_t num_classes = 5;
  std::size_t feature_dim = 2048;      // fused rgb+flow input width
  std::size_t embed_dim = 2048;        // F_e and text-query width
  std::size_t attention_hidden = 512;  // hidden width of both attention stacks
  std::size_t text_heads = 4;
  std::size_t text_ff = 2048;          // feed-forward width of the text encoder
  std::size_t context_tokens = 10;
  std::size_t word_dim = 300;
  std::size_t recon_dim = 512;         // d_h of the reconstruction branch
  std::size_t head_hidden = 512;       // localisation head hidden width
  std::size_t vocab_size = 0;
  std::size_t max_key_length = 1;      // longest key text, in tokens
  double temperature = 10.0;
  double dropout = 0.5;

  static ModelConfig full(std::size_t num_classes, std::size_t feature_dim, std::size_t vocab_size,
                           std::size_t max_key_length);
  static ModelConfig desk(std::size_t num_classes, std::size_t feature_dim, std::size_t vocab_size,
                          std::size_t max_key_length);

  void validate() const;
  std::size_t query_length() const { return 1 + context_tokens + max_key_length; }
};

}  // namespace wtal::model
