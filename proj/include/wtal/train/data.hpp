#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "wtal/corpus/descriptions.hpp"
#include "wtal/corpus/vocabulary.hpp"
#include "wtal/nn/tensor.hpp"

namespace wtal::train {

// Everything the trainer needs from the training split, with all
// description-generator calls made up front.
struct TrainingSet {
  std::vector<const corpus::VideoSample*> videos;
  std::vector<nn::Tensor> fused;                   // [T x 2D] per video
  std::vector<corpus::Tokens> complete;            // complete description per video
  std::vector<std::vector<std::string>> verbs;     // action verbs per video
  std::vector<corpus::Tokens> key_texts;           // key description per class
  std::shared_ptr<const corpus::Vocabulary> vocab;
  std::vector<nn::Tensor> key_vectors;             // word vectors of key_texts

  std::size_t num_classes() const { return key_texts.size(); }
  std::size_t max_key_length() const;
};

// Key texts come from the first training video containing each class (the
// class name when no video does). A video's complete description joins the
// complete descriptions of its positive classes in class order. When
// `word_vectors` names a file, its rows replace the seeded embeddings.
TrainingSet prepare_training_set(const std::vector<corpus::VideoSample>& train, corpus::DescriptionGenerator& describer,
                                 std::uint64_t vocab_seed, const std::filesystem::path& word_vectors = {});

}  // namespace wtal::train
