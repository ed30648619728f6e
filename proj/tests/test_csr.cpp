#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "support.hpp"
#include "wtal/corpus/generator.hpp"
#include "wtal/errors.hpp"
#include "wtal/model/csr.hpp"
#include "wtal/model/ksm.hpp"
#include "wtal/model/model.hpp"
#include "wtal/nn/adam.hpp"
#include "wtal/nn/gradcheck.hpp"
#include "wtal/train/data.hpp"

TEST_SUITE_BEGIN("csr");

using namespace wtal;
using namespace wtal::model;
using nn::Tensor;
using wtal::testing::max_abs_diff;
using wtal::testing::random_tensor;
using wtal::testing::tiny_model_config;
using wtal::testing::values;
using wtal::testing::loop_attention;
using wtal::testing::loop_matmul;
using wtal::testing::max_diff;
using wtal::testing::to_matrix;

namespace {

struct Fixture {
  ModelConfig config = tiny_model_config();
  Rng rng{23};
  CsrParams params = CsrParams::init(config, rng);
};

}  // namespace

TEST_CASE("embed_video_fc is affine") {
  Fixture fx;
  std::mt19937_64 r(1);
  auto a = random_tensor({5, fx.config.feature_dim}, r);
  auto b = random_tensor({5, fx.config.feature_dim}, r);
  auto f0 = embed_video_fc(Tensor::zeros({5, fx.config.feature_dim}), fx.params);
  auto lhs = nn::sub(embed_video_fc(nn::add(a, b), fx.params), f0);
  auto rhs = nn::add(nn::sub(embed_video_fc(a, fx.params), f0), nn::sub(embed_video_fc(b, fx.params), f0));
  CHECK(max_abs_diff(lhs.data(), rhs.data()) < 1e-12);
  CHECK(embed_video_fc(a, fx.params).shape() == nn::Shape{5, fx.config.recon_dim});

  auto zeroed = fx.params;
  zeroed.video_fc.bias = Tensor::zeros(fx.params.video_fc.bias.shape());
  const auto origin = embed_video_fc(Tensor::zeros({3, fx.config.feature_dim}), zeroed);
  for (double v : origin.data()) CHECK(v == 0.0);
}

TEST_CASE("csr_attention") {
  Fixture fx;
  std::mt19937_64 r(2);
  auto features = random_tensor({11, fx.config.embed_dim}, r, -3, 3);
  auto a = csr_attention(features, fx.params);
  CHECK(a.shape() == nn::Shape{11, 1});
  for (double v : a.data()) CHECK((v > 0.0 && v < 1.0));
  CHECK(values(a) == values(csr_attention(features, fx.params)));
}

TEST_CASE("reconstruct_encode matches a loop oracle") {
  Fixture fx;
  fx.config.recon_dim = 8;
  Rng init(4);
  auto params = CsrParams::init(fx.config, init);
  std::mt19937_64 r(3);
  auto complete = random_tensor({4, 8}, r);
  auto attention = random_tensor({4, 1}, r, 0.0, 1.0);
  auto fg = reconstruct_encode(complete, attention, params);

  const auto c = to_matrix(complete);
  const auto oracle = loop_attention(loop_matmul(c, to_matrix(params.wq)), loop_matmul(c, to_matrix(params.wk)),
                                     loop_matmul(c, to_matrix(params.wv)), values(attention));
  CHECK(max_diff(fg, oracle) < 1e-10);

  auto ones = reconstruct_encode(complete, Tensor::full({4, 1}, 1.0), params);
  const auto plain = nn::scaled_attention(nn::matmul(complete, params.wq), nn::matmul(complete, params.wk),
                                          nn::matmul(complete, params.wv));
  CHECK(max_abs_diff(ones.data(), plain.data()) < 1e-12);

  auto single = random_tensor({1, 8}, r);
  auto out = reconstruct_encode(single, Tensor::full({1, 1}, 0.3), params);
  CHECK(max_abs_diff(out.data(), nn::matmul(single, params.wv).data()) < 1e-12);
  CHECK_THROWS_AS(reconstruct_encode(complete, Tensor::full({3, 1}, 1.0), params), DimensionError);
}

TEST_CASE("reconstruct_decode matches a loop oracle") {
  Fixture fx;
  fx.config.recon_dim = 4;
  Rng init(5);
  auto params = CsrParams::init(fx.config, init);
  std::mt19937_64 r(6);
  auto text = random_tensor({3, 4}, r);
  auto fg = random_tensor({5, 4}, r);
  auto attention = random_tensor({5, 1}, r, 0.0, 1.0);
  auto h = reconstruct_decode(text, fg, attention, params);
  CHECK(h.shape() == nn::Shape{3, 4});
  const auto oracle = loop_attention(loop_matmul(to_matrix(text), to_matrix(params.wqd)),
                                     loop_matmul(to_matrix(fg), to_matrix(params.wkd)),
                                     loop_matmul(to_matrix(fg), to_matrix(params.wvd)), values(attention));
  CHECK(max_diff(h, oracle) < 1e-10);

  auto t1 = random_tensor({1, 4}, r);
  auto f1 = random_tensor({1, 4}, r);
  auto single = reconstruct_decode(t1, f1, Tensor::full({1, 1}, 0.8), params);
  CHECK(max_abs_diff(single.data(), nn::matmul(f1, params.wvd).data()) < 1e-12);

  CHECK_THROWS_AS(reconstruct_decode(random_tensor({3, 5}, r), fg, attention, params), DimensionError);
  CHECK_THROWS_AS(reconstruct_decode(text, fg, Tensor::full({4, 1}, 1.0), params), DimensionError);
}

TEST_CASE("permuting segments together with the attention leaves H unchanged") {
  Fixture fx;
  std::mt19937_64 r(7);
  const std::size_t T = 9, d = fx.config.recon_dim;
  auto text = random_tensor({4, d}, r);
  auto fg = random_tensor({T, d}, r);
  auto attention = random_tensor({T, 1}, r, 0.0, 1.0);
  std::vector<std::size_t> perm(T);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), r);
  std::vector<double> pf(T * d), pa(T);
  for (std::size_t t = 0; t < T; ++t) {
    pa[t] = attention[perm[t]];
    for (std::size_t j = 0; j < d; ++j) pf[t * d + j] = fg.at(perm[t], j);
  }
  auto h = reconstruct_decode(text, fg, attention, fx.params);
  auto hp = reconstruct_decode(text, Tensor::from({T, d}, pf), Tensor::from({T, 1}, pa), fx.params);
  CHECK(max_abs_diff(h.data(), hp.data()) < 1e-12);
}

TEST_CASE("word_distributions") {
  Fixture fx;
  std::mt19937_64 r(8);
  auto hidden = random_tensor({5, fx.config.recon_dim}, r, -5, 5);
  auto dists = word_distributions(hidden, fx.params);
  CHECK(dists.shape() == nn::Shape{5, fx.config.vocab_size});
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < fx.config.vocab_size; ++j) s += dists.at(i, j);
    CHECK(std::abs(s - 1.0) < 1e-10);
  }

  auto zeroed = fx.params;
  zeroed.output.weight = Tensor::zeros(fx.params.output.weight.shape());
  zeroed.output.bias = Tensor::zeros(fx.params.output.bias.shape());
  const auto flat = word_distributions(hidden, zeroed);
  for (double v : flat.data()) {
    CHECK(v == doctest::Approx(1.0 / static_cast<double>(fx.config.vocab_size)).epsilon(1e-14));
  }

  auto argmax_rows = [](const Tensor& t) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < t.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < t.cols(); ++j)
        if (t.at(i, j) > t.at(i, best)) best = j;
      out.push_back(best);
    }
    return out;
  };
  auto scaled = fx.params;
  scaled.output.weight = nn::scale(fx.params.output.weight, 2.5).detach();
  scaled.output.bias = nn::scale(fx.params.output.bias, 2.5).detach();
  CHECK(argmax_rows(word_distributions(hidden, scaled)) == argmax_rows(dists));
}

TEST_CASE("csr_loss") {
  std::vector<double> onehot(3 * 4, 0.0);
  onehot[0 * 4 + 2] = 1.0;
  onehot[2 * 4 + 1] = 1.0;
  const std::vector<std::size_t> targets{2, 1}, positions{0, 2};
  CHECK(csr_loss(Tensor::from({3, 4}, onehot), targets, positions).item() == 0.0);

  auto uniform = Tensor::full({5, 100}, 0.01);
  const std::vector<std::size_t> t2{7, 93}, p2{1, 4};
  CHECK(std::abs(csr_loss(uniform, t2, p2).item() - 2.0 * std::log(100.0)) < 1e-12);
  CHECK(std::abs(csr_loss(uniform, t2, p2).item() - 9.2103) < 1e-4);

  std::mt19937_64 r(9);
  auto dists = nn::softmax(random_tensor({6, 10}, r, -2, 2), 1);
  const std::vector<std::size_t> t3{3, 0, 9}, p3{0, 2, 5};
  double oracle = 0.0;
  for (std::size_t i = 0; i < 3; ++i) oracle -= std::log(dists.at(p3[i], t3[i]));
  CHECK(csr_loss(dists, t3, p3).item() == doctest::Approx(oracle).epsilon(1e-14));

  const std::vector<std::size_t> none;
  CHECK_THROWS_AS(csr_loss(dists, none, none), ArgumentError);
  const std::vector<std::size_t> zero{0}, far{6};
  CHECK_THROWS_AS(csr_loss(dists, zero, far), ArgumentError);
  CHECK_THROWS_AS(csr_loss(dists, t3, p2), ArgumentError);
}

TEST_CASE("csr_forward distributions are valid for extreme inputs") {
  Fixture fx;
  std::mt19937_64 r(10);
  for (double amp : {1e-3, 1.0, 1e3}) {
    auto fused = random_tensor({7, fx.config.feature_dim}, r, -amp, amp);
    auto features = random_tensor({7, fx.config.embed_dim}, r, -amp, amp);
    auto words = random_tensor({5, fx.config.word_dim}, r, -amp, amp);
    auto out = csr_forward(fused, features, words, fx.params);
    for (double v : out.word_dists.data()) CHECK((std::isfinite(v) && v >= 0.0 && v <= 1.0));
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < fx.config.vocab_size; ++j) s += out.word_dists.at(i, j);
      CHECK(std::abs(s - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("csr_loss overfits a single video") {
  Fixture fx;
  fx.config.recon_dim = 64;
  Rng init(23);
  auto csr = CsrParams::init(fx.config, init);
  std::mt19937_64 r(11);
  auto fused = random_tensor({10, fx.config.feature_dim}, r);
  auto features = random_tensor({10, fx.config.embed_dim}, r);
  auto words = random_tensor({6, fx.config.word_dim}, r);
  const std::vector<std::size_t> targets{4}, positions{1};
  auto params = tensors_of(csr.parameters());
  nn::AdamState state;
  nn::AdamConfig cfg;
  auto loss_now = [&] { return csr_loss(csr_forward(fused, features, words, csr).word_dists, targets, positions); };
  const double initial = loss_now().item();
  double previous = initial;
  for (int step = 0; step < 50; ++step) {
    nn::zero_grads(params);
    loss_now().backward();
    nn::adam_step(params, state, cfg);
    const double now = loss_now().item();
    CHECK(now <= previous + 1e-12);
    previous = now;
  }
  CHECK(previous < 0.2 * initial);
}

TEST_CASE("masked verbs are reconstructed from the planted interval") {
  corpus::CorpusConfig cc;
  cc.num_classes = 3;
  cc.num_train = 24;
  cc.num_test = 12;
  cc.t_min = 32;
  cc.t_max = 48;
  cc.feature_dim = 32;
  cc.multi_class_prob = 0.0;
  cc.seed = 5;
  const auto corpus = corpus::generate_corpus(cc);
  corpus::TemplateDescriber describer(corpus::DescriptionTable::builtin(3));
  const auto data = train::prepare_training_set(corpus.train, describer, 11);
  const auto mc = ModelConfig::desk(3, 2 * 32, data.vocab->size(), data.max_key_length());
  const auto frozen = Model::init(mc, 0);

  struct Item {
    Tensor fused, features, words;
    std::vector<std::size_t> positions, targets;
  };
  // Keeps only the segments inside (or outside) the planted intervals and
  // masks every action verb of the class description.
  auto build = [&](const std::vector<corpus::VideoSample>& videos, bool planted) {
    std::vector<Item> items;
    for (const auto& video : videos) {
      const auto fused = fuse_features(video.rgb, video.flow);
      const std::size_t D = fused.cols();
      std::vector<double> rows;
      for (std::size_t t = 0; t < video.length(); ++t) {
        bool inside = false;
        for (const auto& gt : video.gt_intervals) inside |= t + 0.5 >= gt.start_seg && t + 0.5 < gt.end_seg;
        if (inside != planted) continue;
        for (std::size_t j = 0; j < D; ++j) rows.push_back(fused.at(t, j));
      }
      if (rows.empty()) continue;
      Item item;
      item.fused = Tensor::from({rows.size() / D, D}, rows);
      Rng drop(0);
      item.features = embed_video(item.fused, frozen.ksm, 0.5, drop, false).features;
      const auto& entry = describer.table().at(video.positive_classes().front());
      auto sentence = corpus::tokenize(entry.complete_sentence);
      for (std::size_t p = 0; p < sentence.size(); ++p) {
        if (std::find(entry.verbs.begin(), entry.verbs.end(), sentence[p]) == entry.verbs.end()) continue;
        item.positions.push_back(p);
        item.targets.push_back(data.vocab->id(sentence[p]));
        sentence[p] = corpus::kMaskToken;
      }
      REQUIRE(!item.positions.empty());
      item.words = data.vocab->embed_tokens(sentence);
      items.push_back(std::move(item));
    }
    return items;
  };

  auto held_out_accuracy = [&](bool planted) {
    const auto train = build(corpus.train, planted);
    const auto test = build(corpus.test, planted);
    Rng init(2);
    auto csr = CsrParams::init(mc, init);
    auto params = tensors_of(csr.parameters());
    nn::AdamState state;
    nn::AdamConfig cfg;
    cfg.lr = 1e-3;
    for (int step = 0; step < 100; ++step) {
      nn::zero_grads(params);
      Tensor total = Tensor::scalar(0.0);
      for (const auto& item : train) {
        auto dists = csr_forward(item.fused, item.features, item.words, csr).word_dists;
        total = nn::add(total, csr_loss(dists, item.targets, item.positions));
      }
      total.backward();
      nn::adam_step(params, state, cfg);
    }
    std::size_t hits = 0, count = 0;
    for (const auto& item : test) {
      const auto dists = csr_forward(item.fused, item.features, item.words, csr).word_dists;
      for (std::size_t k = 0; k < item.positions.size(); ++k) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < dists.cols(); ++j)
          if (dists.at(item.positions[k], j) > dists.at(item.positions[k], best)) best = j;
        hits += best == item.targets[k];
        ++count;
      }
    }
    return static_cast<double>(hits) / static_cast<double>(count);
  };
  const double inside = held_out_accuracy(true);
  const double outside = held_out_accuracy(false);
  MESSAGE("held-out masked-verb accuracy: planted " << inside << ", complement " << outside);
  CHECK(inside > outside);
}

TEST_SUITE_END();
