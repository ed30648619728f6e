#include "wtal/train/data.hpp"

#include <algorithm>
#include <set>

#include "wtal/errors.hpp"
#include "wtal/model/ksm.hpp"

namespace wtal::train {

std::size_t TrainingSet::max_key_length() const {
  std::size_t n = 1;
  for (const auto& k : key_texts) n = std::max(n, k.size());
  return n;
}

TrainingSet prepare_training_set(const std::vector<corpus::VideoSample>& train, corpus::DescriptionGenerator& describer,
                                 std::uint64_t vocab_seed, const std::filesystem::path& word_vectors) {
  if (train.empty()) throw ArgumentError("training split is empty");
  const std::size_t num_classes = train.front().num_classes();
  TrainingSet set;
  set.key_texts.assign(num_classes, {});
  std::vector<bool> have_key(num_classes, false);

  for (const auto& video : train) {
    video.validate();
    if (video.num_classes() != num_classes) throw ArgumentError("training videos disagree on the class count");
    set.videos.push_back(&video);
    set.fused.push_back(model::fuse_features(video.rgb, video.flow));
    corpus::Tokens complete;
    std::vector<std::string> verbs;
    for (int c : video.positive_classes()) {
      if (!have_key[c]) {
        set.key_texts[c] = describer.describe_key(video, c);
        have_key[c] = !set.key_texts[c].empty();
      }
      auto sentence = describer.describe_complete(video, c);
      complete.insert(complete.end(), sentence.begin(), sentence.end());
      for (auto& v : describer.action_verbs(c)) {
        if (std::find(verbs.begin(), verbs.end(), v) == verbs.end()) verbs.push_back(v);
      }
    }
    set.complete.push_back(std::move(complete));
    set.verbs.push_back(std::move(verbs));
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!have_key[c]) set.key_texts[c] = corpus::tokenize(describer.class_name(static_cast<int>(c)));
    if (set.key_texts[c].empty()) set.key_texts[c] = {"action"};
  }

  std::set<std::string> words;
  for (const auto& k : set.key_texts) words.insert(k.begin(), k.end());
  for (const auto& s : set.complete) words.insert(s.begin(), s.end());
  auto vocab = std::make_shared<corpus::Vocabulary>(std::vector<std::string>(words.begin(), words.end()), vocab_seed);
  if (!word_vectors.empty()) vocab->load_vectors(word_vectors);
  set.vocab = std::move(vocab);
  for (const auto& k : set.key_texts) set.key_vectors.push_back(set.vocab->embed_tokens(k));
  return set;
}

}  // namespace wtal::train
