#include "wtal/corpus/masking.hpp"

#include <algorithm>

#include "wtal/corpus/vocabulary.hpp"
#include "wtal/errors.hpp"

namespace wtal::corpus {

MaskedSentence mask_description(const Tokens& sentence, const std::vector<std::string>& verbs, std::mt19937_64& rng) {
  const std::size_t m = sentence.size();
  if (m < 3) throw ArgumentError("mask_description: sentence needs at least 3 tokens, got " + std::to_string(m));
  std::vector<double> weights(m);
  for (std::size_t i = 0; i < m; ++i) {
    weights[i] = std::find(verbs.begin(), verbs.end(), sentence[i]) != verbs.end() ? 2.0 : 1.0;
  }
  MaskedSentence out;
  const std::size_t n = mask_count(m);
  for (std::size_t draw = 0; draw < n; ++draw) {
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const std::size_t i = pick(rng);
    out.positions.push_back(i);
    weights[i] = 0.0;
  }
  std::sort(out.positions.begin(), out.positions.end());
  out.input = sentence;
  for (auto i : out.positions) {
    out.targets.push_back(sentence[i]);
    out.input[i] = kMaskToken;
  }
  return out;
}

MaskedSentence mask_description(const Tokens& sentence, const std::vector<std::string>& verbs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return mask_description(sentence, verbs, rng);
}

}  // namespace wtal::corpus
