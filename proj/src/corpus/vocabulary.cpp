#include "wtal/corpus/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "wtal/errors.hpp"

namespace wtal::corpus {

Vocabulary::Vocabulary(const std::vector<std::string>& words, std::uint64_t seed, std::size_t dim) : dim_(dim) {
  words_ = {kPadToken, kStartToken, kMaskToken};
  for (const auto& w : words) {
    if (std::find(words_.begin(), words_.end(), w) == words_.end()) words_.push_back(w);
  }
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
  table_.assign(words_.size() * dim_, 0.0);
  for (std::size_t id = 1; id < words_.size(); ++id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 0.1);
    for (std::size_t j = 0; j < dim_; ++j) table_[id * dim_ + j] = gauss(rng);
  }
}

Vocabulary Vocabulary::from_table(const DescriptionTable& table, std::uint64_t seed, std::size_t dim) {
  // Sorted so ids do not depend on table order.
  std::set<std::string> unique;
  for (const auto& e : table.entries()) {
    for (auto& t : tokenize(e.key_sentence)) unique.insert(t);
    for (auto& t : tokenize(e.complete_sentence)) unique.insert(t);
  }
  return Vocabulary(std::vector<std::string>(unique.begin(), unique.end()), seed, dim);
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) {
    oov_.fetch_add(1, std::memory_order_relaxed);
    return kPad;
  }
  return it->second;
}

std::vector<std::size_t> Vocabulary::ids(const Tokens& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::span<const double> Vocabulary::row(std::size_t id) const {
  if (id >= words_.size()) throw ArgumentError("token id out of range");
  return {table_.data() + id * dim_, dim_};
}

nn::Tensor Vocabulary::embed_ids(const std::vector<std::size_t>& ids) const {
  if (ids.empty()) throw ArgumentError("embed: empty token sequence");
  std::vector<double> out;
  out.reserve(ids.size() * dim_);
  for (auto i : ids) {
    const auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return nn::Tensor::from({ids.size(), dim_}, std::move(out));
}

nn::Tensor Vocabulary::embed_tokens(const Tokens& tokens) const { return embed_ids(ids(tokens)); }

std::size_t Vocabulary::load_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open vector file " + path.string());
  std::string line;
  std::size_t replaced = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (values.size() != dim_) {
      throw FormatError("vector file line " + std::to_string(lineno) + ": expected " + std::to_string(dim_) +
                        " values, got " + std::to_string(values.size()));
    }
    auto it = index_.find(word);
    if (it == index_.end() || it->second == kPad) continue;
    std::copy(values.begin(), values.end(), table_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    ++replaced;
  }
  return replaced;
}

}  // namespace wtal::corpus
