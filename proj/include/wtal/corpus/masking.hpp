#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wtal/corpus/descriptions.hpp"

namespace wtal::corpus {

// The model-side view of a complete description with some words hidden.
struct MaskedSentence {
  Tokens input;                            // masked positions hold [MASK]
  std::vector<std::size_t> positions;      // ascending
  Tokens targets;                          // original words at `positions`
};

struct DescriptionPair {
  std::string video_id;
  Tokens key_text;
  Tokens complete_text;
  std::vector<std::size_t> mask_positions;
};

// Selects ceil(m/3) distinct positions by sequential weighted sampling
// without replacement; tokens listed in `verbs` carry twice the weight of
// other tokens.
MaskedSentence mask_description(const Tokens& sentence, const std::vector<std::string>& verbs, std::mt19937_64& rng);
MaskedSentence mask_description(const Tokens& sentence, const std::vector<std::string>& verbs, std::uint64_t seed);

inline std::size_t mask_count(std::size_t length) { return (length + 2) / 3; }

}  // namespace wtal::corpus
