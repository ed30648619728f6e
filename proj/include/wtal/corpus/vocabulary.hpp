#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "wtal/corpus/descriptions.hpp"
#include "wtal/nn/tensor.hpp"

namespace wtal::corpus {

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kStartToken = "[START]";
inline constexpr const char* kMaskToken = "[MASK]";

// Token ids plus a frozen word-embedding table. Ids 0..2 are [PAD], [START]
// and [MASK]; the [PAD] row is zero, every other row is drawn from
// N(0, 0.1^2) with a generator keyed by (seed, id).
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kStart = 1;
  static constexpr std::size_t kMask = 2;
  static constexpr std::size_t kDefaultDim = 300;

  Vocabulary(const std::vector<std::string>& words, std::uint64_t seed, std::size_t dim = kDefaultDim);
  // Every token of every key and complete sentence in the table.
  static Vocabulary from_table(const DescriptionTable& table, std::uint64_t seed, std::size_t dim = kDefaultDim);

  std::size_t size() const { return words_.size(); }
  std::size_t dim() const { return dim_; }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  // Unknown tokens map to [PAD] and are counted.
  std::size_t id(const std::string& token) const;
  std::vector<std::size_t> ids(const Tokens& tokens) const;
  const std::string& word(std::size_t id) const { return words_.at(id); }

  nn::Tensor embed_tokens(const Tokens& tokens) const;
  nn::Tensor embed_ids(const std::vector<std::size_t>& ids) const;
  std::span<const double> row(std::size_t id) const;

  // Text file with lines `word v_1 ... v_dim`. Rows of words present in the
  // vocabulary are replaced; returns the number of rows replaced.
  std::size_t load_vectors(const std::filesystem::path& path);

  std::uint64_t oov_count() const { return oov_.load(std::memory_order_relaxed); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_;
  std::vector<double> table_;
  mutable std::atomic<std::uint64_t> oov_{0};
};

}  // namespace wtal::corpus
