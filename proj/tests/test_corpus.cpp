#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include "support.hpp"
#include "wtal/corpus/descriptions.hpp"
#include "wtal/corpus/feature_file.hpp"
#include "wtal/corpus/generator.hpp"
#include "wtal/corpus/masking.hpp"
#include "wtal/corpus/vocabulary.hpp"
#include "wtal/errors.hpp"

TEST_SUITE_BEGIN("corpus");

using namespace wtal;
using namespace wtal::corpus;
using wtal::testing::TempDir;
using wtal::testing::values;

namespace {

CorpusConfig small_config() {
  CorpusConfig c;
  c.num_classes = 4;
  c.num_train = 6;
  c.num_test = 3;
  c.t_min = 32;
  c.t_max = 64;
  c.feature_dim = 16;
  return c;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("generate_corpus is deterministic") {
  const auto a = generate_corpus(small_config());
  const auto b = generate_corpus(small_config());
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(values(a.train[i].rgb) == values(b.train[i].rgb));
    CHECK(values(a.train[i].flow) == values(b.train[i].flow));
    CHECK(a.train[i].label == b.train[i].label);
    CHECK(a.train[i].gt_intervals == b.train[i].gt_intervals);
  }
}

TEST_CASE("noise-free segments recover the planted intervals by nearest prototype") {
  auto cfg = small_config();
  cfg.snr = std::numeric_limits<double>::infinity();
  const auto corpus = generate_corpus(cfg);
  const std::size_t C = static_cast<std::size_t>(cfg.num_classes);
  const std::size_t width = corpus.prototypes.dim(1);
  std::vector<std::span<const double>> protos;
  for (std::size_t c = 0; c <= C; ++c) protos.push_back(corpus.prototypes.data().subspan(c * width, width));

  for (const auto* split : {&corpus.train, &corpus.test}) {
    for (const auto& video : *split) {
      const std::size_t T = video.length();
      std::vector<std::size_t> nearest(T);
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> seg(width);
        for (std::size_t d = 0; d < width / 2; ++d) {
          seg[d] = video.rgb.at(t, d);
          seg[d + width / 2] = video.flow.at(t, d);
        }
        double best = -2.0;
        for (std::size_t c = 0; c <= C; ++c) {
          const double s = cosine(seg, protos[c]);
          if (s > best) {
            best = s;
            nearest[t] = c;
          }
        }
      }
      std::vector<GtInterval> runs;
      for (std::size_t t = 0; t < T;) {
        std::size_t e = t;
        while (e < T && nearest[e] == nearest[t]) ++e;
        if (nearest[t] != C) runs.push_back({static_cast<int>(nearest[t]), double(t), double(e)});
        t = e;
      }
      CHECK(runs == video.gt_intervals);
    }
  }
}

TEST_CASE("labels are the union of planted classes and samples validate") {
  const auto corpus = generate_corpus(small_config());
  for (const auto& v : corpus.train) {
    std::vector<std::uint8_t> from_gt(v.num_classes(), 0);
    for (const auto& g : v.gt_intervals) from_gt[g.cls] = 1;
    CHECK(v.label == from_gt);
    CHECK(v.gt_intervals.size() >= 1);
    CHECK(v.gt_intervals.size() <= 4);
    CHECK_NOTHROW(v.validate());
    for (const auto& g : v.gt_intervals) {
      CHECK(0.0 <= g.start_seg);
      CHECK(g.start_seg < g.end_seg);
      CHECK(g.end_seg <= double(v.length()));
    }
  }
}

TEST_CASE("invalid corpus configurations are rejected") {
  auto c = small_config();
  c.num_classes = 1;
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  c = small_config();
  c.t_min = 8;
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  c = small_config();
  c.t_max = 600;
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
}

TEST_CASE("WTF1 round trip and malformed files") {
  TempDir dir("wtf");
  const auto corpus = generate_corpus(small_config());
  const auto& video = corpus.train.front();
  const auto path = dir.path() / (video.id + ".wtf");
  write_feature_file(path, video);
  const auto back = load_feature_file(path);
  CHECK(back.id == video.id);
  CHECK(values(back.rgb) == values(video.rgb));
  CHECK(values(back.flow) == values(video.flow));
  CHECK(back.label == video.label);
  CHECK(back.gt_intervals == video.gt_intervals);
  CHECK(back.seconds_per_segment == doctest::Approx(video.seconds_per_segment).epsilon(1e-7));

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir.path() / name, std::ios::binary) << content;
    return dir.path() / name;
  };

  std::string zero_t = bytes;
  zero_t[4] = zero_t[5] = zero_t[6] = zero_t[7] = 0;
  try {
    load_feature_file(write("zero.wtf", zero_t));
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
  }

  try {
    load_feature_file(write("trunc.wtf", bytes.substr(0, bytes.size() / 2)));
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    const std::string what = e.what();
    CHECK(what.find("expected") != std::string::npos);
    CHECK(what.find("found") != std::string::npos);
    CHECK(e.offset() != FormatError::npos);
  }

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(load_feature_file(write("magic.wtf", bad_magic)), FormatError);
  CHECK_THROWS_AS(load_feature_file(dir.path() / "missing.wtf"), PathError);
}

TEST_CASE("template describer") {
  auto table = DescriptionTable::builtin(20);
  TemplateDescriber describer(table);
  const int high_jump = table.find("HighJump");
  REQUIRE(high_jump >= 0);

  VideoSample a, b;
  a.id = "a";
  b.id = "b";
  a.label.assign(20, 0);
  b.label.assign(20, 0);
  a.label[high_jump] = 1;
  b.label[high_jump] = 1;
  const auto key = describer.describe_key(a, high_jump);
  CHECK(key == tokenize(table.at(high_jump).key_sentence));
  CHECK(describer.describe_key(a, high_jump) == key);
  CHECK(describer.describe_key(b, high_jump) == key);
  CHECK_THROWS_AS(describer.describe_key(a, 99), ArgumentError);
  CHECK_THROWS_AS(describer.describe_key(a, 0), ArgumentError);

  for (int c = 0; c < 20; ++c) {
    VideoSample v;
    v.id = "v";
    v.label.assign(20, 0);
    v.label[c] = 1;
    const auto complete = describer.describe_complete(v, c);
    CHECK(complete.size() >= 12);
    CHECK(describer.describe_complete(v, c) == complete);
    const auto verbs = describer.action_verbs(c);
    CHECK(std::any_of(verbs.begin(), verbs.end(),
                      [&](const std::string& w) { return std::find(complete.begin(), complete.end(), w) != complete.end(); }));
  }
}

TEST_CASE("description table file round trip") {
  TempDir dir("table");
  const auto table = DescriptionTable::builtin(5);
  table.save(dir.path() / "d.tsv");
  const auto back = DescriptionTable::load(dir.path() / "d.tsv");
  REQUIRE(back.size() == 5);
  for (int c = 0; c < 5; ++c) {
    CHECK(back.at(c).name == table.at(c).name);
    CHECK(back.at(c).complete_sentence == table.at(c).complete_sentence);
    CHECK(back.at(c).verbs == table.at(c).verbs);
  }
  std::ofstream(dir.path() / "bad.tsv") << "only\ttwo\n";
  CHECK_THROWS_AS(DescriptionTable::load(dir.path() / "bad.tsv"), FormatError);
}

TEST_CASE("tokenize") {
  CHECK(tokenize("The athlete's take-off, then LANDS.") == Tokens{"the", "athlete's", "take-off", "then", "lands"});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("mask counts") {
  const std::vector<std::string> verbs{"jumps"};
  CHECK(mask_description(Tokens(6, "w"), verbs, 1).positions.size() == 2);
  CHECK(mask_description(Tokens(3, "w"), verbs, 1).positions.size() == 1);
  CHECK_THROWS_AS(mask_description(Tokens(2, "w"), verbs, 1), ArgumentError);

  std::mt19937_64 rng(9);
  for (std::size_t m = 3; m <= 200; ++m) {
    Tokens sentence;
    for (std::size_t i = 0; i < m; ++i) sentence.push_back(i % 5 == 0 ? "jumps" : "w" + std::to_string(i));
    const auto masked = mask_description(sentence, verbs, rng);
    CHECK(masked.positions.size() == static_cast<std::size_t>(std::ceil(m / 3.0)));
    std::set<std::size_t> unique(masked.positions.begin(), masked.positions.end());
    CHECK(unique.size() == masked.positions.size());
    CHECK(*unique.rbegin() < m);
    for (std::size_t j = 0; j < masked.positions.size(); ++j) {
      CHECK(masked.input[masked.positions[j]] == kMaskToken);
      CHECK(masked.targets[j] == sentence[masked.positions[j]]);
    }
  }
}

TEST_CASE("verb masking frequency matches the weighted-sampling oracle") {
  const Tokens sentence{"a", "player", "jumps", "over", "the", "bar"};
  const std::vector<std::string> verbs{"jumps"};
  const std::size_t verb_index = 2;

  // Exact probability that index `target` is among `draws` sequential
  // weighted draws without replacement.
  std::function<double(std::vector<double>, std::size_t)> oracle = [&](std::vector<double> w, std::size_t draws) {
    if (draws == 0) return 0.0;
    double total = 0.0;
    for (double x : w) total += x;
    double p = w[verb_index] / total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i == verb_index || w[i] == 0.0) continue;
      auto rest = w;
      rest[i] = 0.0;
      p += w[i] / total * oracle(rest, draws - 1);
    }
    return p;
  };
  const double expected = oracle({1, 1, 2, 1, 1, 1}, 2);
  CHECK(expected == doctest::Approx(11.0 / 21.0).epsilon(1e-12));

  std::mt19937_64 rng(2024);
  int hits = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const auto masked = mask_description(sentence, verbs, rng);
    hits += std::count(masked.positions.begin(), masked.positions.end(), verb_index) > 0;
  }
  CHECK(std::abs(double(hits) / trials - expected) < 0.02);
}

TEST_CASE("vocabulary embeddings") {
  Vocabulary vocab({"jump", "throw", "ball"}, 5);
  CHECK(vocab.size() == 6);
  auto rows = vocab.embed_tokens({"jump", "jump", "[MASK]"});
  CHECK(rows.shape() == nn::Shape{3, 300});
  for (std::size_t j = 0; j < 300; ++j) CHECK(rows.at(0, j) == rows.at(1, j));
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (id == Vocabulary::kMask) continue;
    const auto r = vocab.row(id);
    CHECK_FALSE(std::equal(r.begin(), r.end(), vocab.row(Vocabulary::kMask).begin()));
  }
  Vocabulary again({"jump", "throw", "ball"}, 5);
  CHECK(std::equal(vocab.row(3).begin(), vocab.row(3).end(), again.row(3).begin()));

  const auto before = vocab.oov_count();
  CHECK(vocab.id("unknownword") == Vocabulary::kPad);
  CHECK(vocab.oov_count() == before + 1);
  for (double v : vocab.row(Vocabulary::kPad)) CHECK(v == 0.0);
}

TEST_CASE("loading an external vector file overrides exactly the listed rows") {
  TempDir dir("vec");
  Vocabulary vocab({"jump", "throw", "ball"}, 5, 3);
  const std::vector<double> ball_before(vocab.row(vocab.id("ball")).begin(), vocab.row(vocab.id("ball")).end());
  std::ofstream(dir.path() / "v.txt") << "jump 1 2 3\nthrow 4 5 6\nnotinvocab 7 8 9\n";
  CHECK(vocab.load_vectors(dir.path() / "v.txt") == 2);
  CHECK(std::vector<double>(vocab.row(vocab.id("jump")).begin(), vocab.row(vocab.id("jump")).end()) ==
        std::vector<double>{1, 2, 3});
  CHECK(std::vector<double>(vocab.row(vocab.id("throw")).begin(), vocab.row(vocab.id("throw")).end()) ==
        std::vector<double>{4, 5, 6});
  CHECK(std::vector<double>(vocab.row(vocab.id("ball")).begin(), vocab.row(vocab.id("ball")).end()) == ball_before);
  std::ofstream(dir.path() / "bad.txt") << "jump 1 2\n";
  CHECK_THROWS_AS(vocab.load_vectors(dir.path() / "bad.txt"), FormatError);
}
TEST_SUITE_END();
