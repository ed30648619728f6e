#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wtal/corpus/sample.hpp"

namespace wtal::corpus {

using Tokens = std::vector<std::string>;

// Lowercases and splits on whitespace; punctuation other than in-word
// apostrophes and hyphens is dropped.
Tokens tokenize(std::string_view sentence);

struct ClassDescription {
  std::string name;
  std::string key_sentence;
  std::string complete_sentence;
  std::vector<std::string> verbs;  // lowercase
};

// Canned per-class descriptions. On disk: one line per class,
// `<class_name>\t<key sentence>\t<complete sentence>\t<comma-separated verbs>`.
class DescriptionTable {
 public:
  DescriptionTable() = default;
  explicit DescriptionTable(std::vector<ClassDescription> entries);

  // The first num_classes entries of the built-in sports table (at most 20).
  static DescriptionTable builtin(std::size_t num_classes);
  static DescriptionTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return entries_.size(); }
  const ClassDescription& at(int cls) const;
  const std::vector<ClassDescription>& entries() const { return entries_; }
  std::vector<std::string> class_names() const;
  int find(std::string_view name) const;  // -1 when absent

 private:
  std::vector<ClassDescription> entries_;
};

enum class DescriptionMode { kKey, kComplete };

// Source of the key / complete action descriptions used at training time.
// All calls pass through describe_key / describe_complete, which check the
// class against the video label and bump a process-wide call counter.
class DescriptionGenerator {
 public:
  virtual ~DescriptionGenerator() = default;

  Tokens describe_key(const VideoSample& video, int cls);
  Tokens describe_complete(const VideoSample& video, int cls);
  virtual std::vector<std::string> action_verbs(int cls) const = 0;
  virtual std::string class_name(int cls) const = 0;

  static std::uint64_t call_count();
  static void reset_call_count();

 protected:
  virtual std::string generate(const VideoSample& video, int cls, DescriptionMode mode) = 0;

 private:
  Tokens describe(const VideoSample& video, int cls, DescriptionMode mode);
  static std::atomic<std::uint64_t> calls_;
};

// Deterministic class-keyed stand-in for a multimodal language model.
class TemplateDescriber final : public DescriptionGenerator {
 public:
  explicit TemplateDescriber(DescriptionTable table) : table_(std::move(table)) {}

  std::vector<std::string> action_verbs(int cls) const override { return table_.at(cls).verbs; }
  std::string class_name(int cls) const override { return table_.at(cls).name; }
  const DescriptionTable& table() const { return table_; }

 protected:
  std::string generate(const VideoSample& video, int cls, DescriptionMode mode) override;

 private:
  DescriptionTable table_;
};

}  // namespace wtal::corpus
