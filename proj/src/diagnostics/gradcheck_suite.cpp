#include "wtal/diagnostics/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "wtal/model/csr.hpp"
#include "wtal/model/ksm.hpp"
#include "wtal/model/lochead.hpp"
#include "wtal/train/trainer.hpp"

namespace wtal::diagnostics {

namespace {

using nn::GradCheckOptions;
using nn::GradCheckReport;
using nn::Rng;
using nn::Tensor;

std::size_t pick_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor uniform(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(nn::numel_of(shape));
  for (auto& x : v) x = d(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

// Linear read-out with fixed weights so that every output entry influences
// the scalar.
Tensor readout_fixed(const Tensor& y, const Tensor& w) { return nn::sum(nn::mul(y, w.reshape(y.shape()))); }

GradCheckReport check(const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                      const GradCheckOptions& o) {
  return nn::finite_diff_check(name, f, std::move(inputs), o);
}

// Unary op on a random matrix, read out linearly.
RegisteredOp unary(const std::string& name, std::function<Tensor(const Tensor&)> op, double lo = -1.0,
                   double hi = 1.0) {
  return {name, [=](Rng& rng, const GradCheckOptions& o) {
            Tensor x = uniform({pick_size(rng, 1, 4), pick_size(rng, 1, 4)}, rng, lo, hi);
            Tensor w = uniform(op(x).shape(), rng);
            return check(name, [&] { return nn::sum(nn::mul(op(x), w)); }, {x}, o);
          }};
}

RegisteredOp binary(const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> op,
                    double b_lo = -1.0, double b_hi = 1.0) {
  return {name, [=](Rng& rng, const GradCheckOptions& o) {
            const nn::Shape shape{pick_size(rng, 1, 4), pick_size(rng, 1, 4)};
            Tensor a = uniform(shape, rng), b = uniform(shape, rng, b_lo, b_hi), w = uniform(shape, rng);
            return check(name, [&] { return nn::sum(nn::mul(op(a, b), w)); }, {a, b}, o);
          }};
}

model::ModelConfig tiny_config(Rng& rng) {
  model::ModelConfig c;
  c.num_classes = pick_size(rng, 1, 3);
  c.feature_dim = 6;
  c.embed_dim = 8;
  c.attention_hidden = 4;
  c.text_heads = 2;
  c.text_ff = 8;
  c.context_tokens = 2;
  c.word_dim = 5;
  c.recon_dim = 6;
  c.head_hidden = 4;
  c.vocab_size = 10;
  c.max_key_length = 3;
  return c;
}

std::vector<std::uint8_t> random_label(std::size_t classes, Rng& rng) {
  std::vector<std::uint8_t> label(classes, 0);
  for (auto& l : label) l = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
  label[pick_size(rng, 0, classes - 1)] = 1;
  return label;
}

std::vector<RegisteredOp> build_registry() {
  std::vector<RegisteredOp> ops;

  // --- primitives ---------------------------------------------------------
  ops.push_back({"matmul", [](Rng& rng, const GradCheckOptions& o) {
                   const auto m = pick_size(rng, 1, 4), k = pick_size(rng, 1, 4), n = pick_size(rng, 1, 4);
                   Tensor a = uniform({m, k}, rng), b = uniform({k, n}, rng), w = uniform({m, n}, rng);
                   return check("matmul", [&] { return nn::sum(nn::mul(nn::matmul(a, b), w)); }, {a, b}, o);
                 }});
  ops.push_back(unary("transpose", [](const Tensor& x) { return nn::transpose(x); }));
  ops.push_back(binary("add", [](const Tensor& a, const Tensor& b) { return nn::add(a, b); }));
  ops.push_back(binary("sub", [](const Tensor& a, const Tensor& b) { return nn::sub(a, b); }));
  ops.push_back(binary("mul", [](const Tensor& a, const Tensor& b) { return nn::mul(a, b); }));
  ops.push_back(binary("div", [](const Tensor& a, const Tensor& b) { return nn::div(a, b); }, 0.5, 2.0));
  ops.push_back(binary("minimum", [](const Tensor& a, const Tensor& b) { return nn::minimum(a, b); }));
  ops.push_back(binary("maximum", [](const Tensor& a, const Tensor& b) { return nn::maximum(a, b); }));
  ops.push_back(unary("scale", [](const Tensor& x) { return nn::scale(x, -1.7); }));
  ops.push_back(unary("add_scalar", [](const Tensor& x) { return nn::add_scalar(x, 0.3); }));
  ops.push_back(unary("relu", [](const Tensor& x) { return nn::relu(x); }));
  ops.push_back(unary("sigmoid", [](const Tensor& x) { return nn::sigmoid(x); }, -3.0, 3.0));
  ops.push_back(unary("softplus", [](const Tensor& x) { return nn::softplus(x); }, -3.0, 3.0));
  ops.push_back(unary("log_clamped", [](const Tensor& x) { return nn::log_clamped(x); }, 0.2, 2.0));
  ops.push_back({"pow_scalar", [](Rng& rng, const GradCheckOptions& o) {
                   const double p = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
                   Tensor x = uniform({pick_size(rng, 1, 4), pick_size(rng, 1, 4)}, rng, 0.2, 2.0);
                   Tensor w = uniform(x.shape(), rng);
                   return check("pow_scalar", [&] { return nn::sum(nn::mul(nn::pow_scalar(x, p), w)); }, {x}, o);
                 }});
  ops.push_back({"add_bias", [](Rng& rng, const GradCheckOptions& o) {
                   const auto m = pick_size(rng, 1, 4), n = pick_size(rng, 1, 4);
                   Tensor x = uniform({m, n}, rng), b = uniform({n}, rng), w = uniform({m, n}, rng);
                   return check("add_bias", [&] { return nn::sum(nn::mul(nn::add_bias(x, b), w)); }, {x, b}, o);
                 }});
  ops.push_back({"scale_rows", [](Rng& rng, const GradCheckOptions& o) {
                   const auto m = pick_size(rng, 1, 4), n = pick_size(rng, 1, 4);
                   Tensor x = uniform({m, n}, rng), s = uniform({m, 1}, rng), w = uniform({m, n}, rng);
                   return check("scale_rows", [&] { return nn::sum(nn::mul(nn::scale_rows(x, s), w)); }, {x, s}, o);
                 }});
  ops.push_back({"scale_cols", [](Rng& rng, const GradCheckOptions& o) {
                   const auto m = pick_size(rng, 1, 4), n = pick_size(rng, 1, 4);
                   Tensor x = uniform({m, n}, rng), s = uniform({n}, rng), w = uniform({m, n}, rng);
                   return check("scale_cols", [&] { return nn::sum(nn::mul(nn::scale_cols(x, s), w)); }, {x, s}, o);
                 }});
  ops.push_back(unary("sum", [](const Tensor& x) { return nn::scale(nn::sum(x), 1.0); }));
  ops.push_back(unary("mean", [](const Tensor& x) { return nn::mean(x); }));
  ops.push_back({"mse", [](Rng& rng, const GradCheckOptions& o) {
                   const nn::Shape shape{pick_size(rng, 1, 6), 1};
                   Tensor a = uniform(shape, rng), b = uniform(shape, rng);
                   return check("mse", [&] { return nn::mse(a, b); }, {a, b}, o);
                 }});
  ops.push_back({"concat", [](Rng& rng, const GradCheckOptions& o) {
                   const std::size_t axis = pick_size(rng, 0, 1);
                   const auto r = pick_size(rng, 1, 3), c = pick_size(rng, 1, 3);
                   Tensor a = uniform({r, c}, rng);
                   Tensor b = axis == 0 ? uniform({pick_size(rng, 1, 3), c}, rng) : uniform({r, pick_size(rng, 1, 3)}, rng);
                   Tensor w = uniform(nn::concat({a, b}, axis).shape(), rng);
                   return check("concat", [&] { return nn::sum(nn::mul(nn::concat({a, b}, axis), w)); }, {a, b}, o);
                 }});
  ops.push_back({"slice", [](Rng& rng, const GradCheckOptions& o) {
                   const auto r = pick_size(rng, 2, 5), c = pick_size(rng, 2, 5);
                   Tensor x = uniform({r, c}, rng);
                   const auto r0 = pick_size(rng, 0, r - 1), c0 = pick_size(rng, 0, c - 1);
                   Tensor w = uniform({r - r0, c - c0}, rng);
                   return check("slice",
                                [&] { return nn::sum(nn::mul(nn::slice_cols(nn::slice_rows(x, r0, r), c0, c), w)); },
                                {x}, o);
                 }});
  ops.push_back({"pick", [](Rng& rng, const GradCheckOptions& o) {
                   const auto r = pick_size(rng, 1, 4), c = pick_size(rng, 1, 4), n = pick_size(rng, 1, 6);
                   Tensor x = uniform({r, c}, rng);
                   std::vector<std::size_t> rows(n), cols(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     rows[i] = pick_size(rng, 0, r - 1);
                     cols[i] = pick_size(rng, 0, c - 1);
                   }
                   Tensor w = uniform({n}, rng);
                   return check("pick", [&] { return nn::sum(nn::mul(nn::pick(x, rows, cols), w)); }, {x}, o);
                 }});
  ops.push_back({"softmax", [](Rng& rng, const GradCheckOptions& o) {
                   const std::size_t axis = pick_size(rng, 0, 1);
                   Tensor x = uniform({pick_size(rng, 1, 4), pick_size(rng, 1, 5)}, rng, -3.0, 3.0);
                   Tensor w = uniform(x.shape(), rng);
                   return check("softmax", [&] { return nn::sum(nn::mul(nn::softmax(x, axis), w)); }, {x}, o);
                 }});
  ops.push_back({"conv1d", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 6), ci = pick_size(rng, 1, 3), co = pick_size(rng, 1, 3);
                   const std::size_t k = 2 * pick_size(rng, 0, 2) + 1;
                   Tensor x = uniform({t, ci}, rng), wt = uniform({k, ci, co}, rng), b = uniform({co}, rng);
                   Tensor w = uniform({t, co}, rng);
                   return check("conv1d", [&] { return nn::sum(nn::mul(nn::conv1d(x, wt, b), w)); }, {x, wt, b}, o);
                 }});
  ops.push_back({"layer_norm", [](Rng& rng, const GradCheckOptions& o) {
                   const auto r = pick_size(rng, 1, 3), c = pick_size(rng, 3, 6);
                   Tensor x = uniform({r, c}, rng), g = uniform({c}, rng), b = uniform({c}, rng);
                   Tensor w = uniform({r, c}, rng);
                   return check("layer_norm", [&] { return nn::sum(nn::mul(nn::layer_norm(x, g, b), w)); }, {x, g, b},
                                o);
                 }});
  // Rows of width >= 2: a single-entry row normalises to a constant.
  ops.push_back({"normalize_rows", [](Rng& rng, const GradCheckOptions& o) {
                   Tensor x = uniform({pick_size(rng, 1, 4), pick_size(rng, 2, 5)}, rng, 0.1, 1.0);
                   Tensor w = uniform(x.shape(), rng);
                   return check("normalize_rows", [&] { return nn::sum(nn::mul(nn::normalize_rows(x), w)); }, {x}, o);
                 }});
  ops.push_back({"topk_mean", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 8), c = pick_size(rng, 1, 3);
                   const auto k = pick_size(rng, 1, t);
                   Tensor x = uniform({t, c}, rng), w = uniform({c}, rng);
                   return check("topk_mean", [&] { return nn::sum(nn::mul(nn::topk_mean_columns(x, k), w)); }, {x},
                                o);
                 }});
  ops.push_back({"dropout", [](Rng& rng, const GradCheckOptions& o) {
                   Tensor x = uniform({pick_size(rng, 1, 4), pick_size(rng, 1, 4)}, rng);
                   std::vector<std::uint8_t> keep(x.numel());
                   for (auto& k : keep) k = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
                   Tensor w = uniform(x.shape(), rng);
                   return check("dropout", [&] { return nn::sum(nn::mul(nn::dropout_with_mask(x, keep, 0.5), w)); },
                                {x}, o);
                 }});
  ops.push_back({"masked_scaled_attention", [](Rng& rng, const GradCheckOptions& o) {
                   const auto m = pick_size(rng, 1, 4), t = pick_size(rng, 1, 4), d = pick_size(rng, 1, 4);
                   Tensor q = uniform({m, d}, rng), k = uniform({t, d}, rng), v = uniform({t, d}, rng);
                   Tensor a = uniform({t, 1}, rng, 0.05, 0.95), w = uniform({m, d}, rng);
                   return check("masked_scaled_attention",
                                [&] { return nn::sum(nn::mul(nn::masked_scaled_attention(q, k, v, a), w)); },
                                {q, k, v, a}, o);
                 }});
  ops.push_back({"scaled_attention", [](Rng& rng, const GradCheckOptions& o) {
                   const auto m = pick_size(rng, 1, 4), t = pick_size(rng, 1, 5), d = pick_size(rng, 1, 4);
                   Tensor q = uniform({m, d}, rng), k = uniform({t, d}, rng), v = uniform({t, d}, rng);
                   std::vector<bool> valid(t);
                   for (std::size_t i = 0; i < t; ++i) valid[i] = std::bernoulli_distribution(0.7)(rng);
                   valid[pick_size(rng, 0, t - 1)] = true;
                   Tensor w = uniform({m, d}, rng);
                   return check("scaled_attention",
                                [&] { return nn::sum(nn::mul(nn::scaled_attention(q, k, v, valid), w)); }, {q, k, v},
                                o);
                 }});
  ops.push_back({"reshape", [](Rng& rng, const GradCheckOptions& o) {
                   const auto r = pick_size(rng, 1, 4), c = pick_size(rng, 1, 4);
                   Tensor x = uniform({r, c}, rng), w = uniform({c, r}, rng);
                   return check("reshape", [&] { return nn::sum(nn::mul(x.reshape({c, r}), w)); }, {x}, o);
                 }});

  // --- model operations ---------------------------------------------------
  ops.push_back({"fuse_features", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 5);
                   Tensor a = uniform({t, 3}, rng), b = uniform({t, 2}, rng), w = uniform({t, 5}, rng);
                   return check("fuse_features", [&] { return nn::sum(nn::mul(model::fuse_features(a, b), w)); },
                                {a, b}, o);
                 }});
  ops.push_back({"embed_video", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::KsmParams::init(cfg, rng);
                   Tensor f = uniform({pick_size(rng, 1, 6), cfg.feature_dim}, rng);
                   Rng unused(0);
                   auto probe = model::embed_video(f, p, 0.5, unused, false);
                   Tensor w1 = uniform(probe.features.shape(), rng), w2 = uniform(probe.attention.shape(), rng);
                   return check("embed_video",
                                [&] {
                                  auto e = model::embed_video(f, p, 0.5, unused, false);
                                  return nn::add(readout_fixed(e.features, w1), readout_fixed(e.attention, w2));
                                },
                                {f, p.embed2.weight, p.attention.hidden.weight}, o);
                 }});
  ops.push_back({"encode_text_query", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::KsmParams::init(cfg, rng);
                   std::vector<Tensor> keys;
                   for (std::size_t c = 0; c < cfg.num_classes; ++c) {
                     keys.push_back(uniform({pick_size(rng, 1, cfg.max_key_length), cfg.word_dim}, rng));
                   }
                   p.background_key = uniform(p.background_key.shape(), rng, -0.5, 0.5);
                   Tensor w = uniform({cfg.num_classes + 1, cfg.embed_dim}, rng);
                   return check("encode_text_query",
                                [&] {
                                  return readout_fixed(
                                      model::encode_text_query(model::build_query_tokens(keys, p, cfg), p, cfg), w);
                                },
                                {keys.front(), p.context, p.key_projection, p.background_key, p.text.wq, p.text.ff1.weight},
                                o);
                 }});
  ops.push_back({"match", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 5), c = pick_size(rng, 2, 4), d = pick_size(rng, 2, 5);
                   Tensor f = uniform({t, d}, rng), a = uniform({t, 1}, rng, 0.05, 0.95), q = uniform({c, d}, rng);
                   Tensor w1 = uniform({t, c}, rng), w2 = uniform({t, c}, rng);
                   return check("match",
                                [&] {
                                  auto s = model::match(f, a, q, 10.0);
                                  return nn::add(readout_fixed(s.m, w1), readout_fixed(s.m_hat, w2));
                                },
                                {f, a, q}, o);
                 }});
  ops.push_back({"video_scores", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 8), c = pick_size(rng, 2, 4);
                   const auto k = pick_size(rng, 1, t);
                   Tensor m = uniform({t, c}, rng, -3.0, 3.0), w = uniform({c}, rng);
                   return check("video_scores", [&] { return readout_fixed(model::video_scores(m, k).p, w); }, {m}, o);
                 }});
  ops.push_back({"ksm_loss", [](Rng& rng, const GradCheckOptions& o) {
                   const auto c = pick_size(rng, 1, 4);
                   const auto label = random_label(c, rng);
                   Tensor s = uniform({c + 1}, rng, -2.0, 2.0), sh = uniform({c + 1}, rng, -2.0, 2.0);
                   return check("ksm_loss",
                                [&] { return model::ksm_loss(nn::softmax(s, 0), nn::softmax(sh, 0), label); }, {s, sh},
                                o);
                 }});
  ops.push_back({"embed_video_fc", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::CsrParams::init(cfg, rng);
                   Tensor f = uniform({pick_size(rng, 1, 5), cfg.feature_dim}, rng);
                   Tensor w = uniform({f.rows(), cfg.recon_dim}, rng);
                   return check("embed_video_fc", [&] { return readout_fixed(model::embed_video_fc(f, p), w); },
                                {f, p.video_fc.weight, p.video_fc.bias}, o);
                 }});
  ops.push_back({"csr_attention", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::CsrParams::init(cfg, rng);
                   Tensor f = uniform({pick_size(rng, 1, 5), cfg.embed_dim}, rng, 0.0, 1.0);
                   Tensor w = uniform({f.rows(), 1}, rng);
                   return check("csr_attention", [&] { return readout_fixed(model::csr_attention(f, p), w); },
                                {f, p.attention.output.weight}, o);
                 }});
  ops.push_back({"reconstruct_encode", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::CsrParams::init(cfg, rng);
                   const auto t = pick_size(rng, 1, 5);
                   Tensor f = uniform({t, cfg.recon_dim}, rng), a = uniform({t, 1}, rng, 0.05, 0.95);
                   Tensor w = uniform({t, cfg.recon_dim}, rng);
                   return check("reconstruct_encode",
                                [&] { return readout_fixed(model::reconstruct_encode(f, a, p), w); },
                                {f, a, p.wq, p.wk, p.wv}, o);
                 }});
  ops.push_back({"reconstruct_decode", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::CsrParams::init(cfg, rng);
                   const auto t = pick_size(rng, 1, 5), m = pick_size(rng, 1, 4);
                   Tensor text = uniform({m, cfg.recon_dim}, rng), fg = uniform({t, cfg.recon_dim}, rng);
                   Tensor a = uniform({t, 1}, rng, 0.05, 0.95), w = uniform({m, cfg.recon_dim}, rng);
                   return check("reconstruct_decode",
                                [&] { return readout_fixed(model::reconstruct_decode(text, fg, a, p), w); },
                                {text, fg, a, p.wqd, p.wkd, p.wvd}, o);
                 }});
  ops.push_back({"word_distributions", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::CsrParams::init(cfg, rng);
                   Tensor h = uniform({pick_size(rng, 1, 4), cfg.recon_dim}, rng);
                   Tensor w = uniform({h.rows(), cfg.vocab_size}, rng);
                   return check("word_distributions",
                                [&] { return readout_fixed(model::word_distributions(h, p), w); },
                                {h, p.output.weight, p.output.bias}, o);
                 }});
  ops.push_back({"csr_loss", [](Rng& rng, const GradCheckOptions& o) {
                   const auto m = pick_size(rng, 1, 5), v = pick_size(rng, 2, 8);
                   Tensor logits = uniform({m, v}, rng, -2.0, 2.0);
                   std::vector<std::size_t> positions, targets;
                   for (std::size_t i = 0; i < m; ++i) {
                     if (i == 0 || std::bernoulli_distribution(0.5)(rng)) {
                       positions.push_back(i);
                       targets.push_back(pick_size(rng, 0, v - 1));
                     }
                   }
                   return check("csr_loss",
                                [&] { return model::csr_loss(nn::softmax(logits, 1), targets, positions); }, {logits},
                                o);
                 }});
  ops.push_back({"focal_loss", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 6), c = pick_size(rng, 2, 4);
                   Tensor logits = uniform({t, c}, rng, -2.0, 2.0);
                   std::vector<std::size_t> labels(t);
                   for (auto& l : labels) l = pick_size(rng, 0, c - 1);
                   return check("focal_loss", [&] { return model::focal_loss(logits, labels); }, {logits}, o);
                 }});
  ops.push_back({"diou_loss", [](Rng& rng, const GradCheckOptions& o) {
                   const auto n = pick_size(rng, 1, 5);
                   std::vector<double> pv, tv;
                   std::uniform_real_distribution<double> pos(0.0, 10.0), len(0.5, 5.0);
                   for (std::size_t i = 0; i < n; ++i) {
                     const double ps = pos(rng), ts = pos(rng);
                     pv.insert(pv.end(), {ps, ps + len(rng)});
                     tv.insert(tv.end(), {ts, ts + len(rng)});
                   }
                   Tensor pred = Tensor::from({n, 2}, pv), target = Tensor::from({n, 2}, tv);
                   return check("diou_loss", [&] { return model::diou_loss(pred, target); }, {pred}, o);
                 }});
  ops.push_back({"mil_loss", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 8), c = pick_size(rng, 1, 3);
                   const auto k = pick_size(rng, 1, t);
                   const auto label = random_label(c, rng);
                   Tensor logits = uniform({t, c + 1}, rng, -2.0, 2.0);
                   return check("mil_loss", [&] { return model::mil_loss(logits, label, k); }, {logits}, o);
                 }});
  ops.push_back({"loc_loss", [](Rng& rng, const GradCheckOptions& o) {
                   const auto cfg = tiny_config(rng);
                   auto p = model::LocHeadParams::init(cfg, rng);
                   const auto t = pick_size(rng, 2, 6);
                   Tensor f = uniform({t, cfg.embed_dim}, rng, 0.0, 1.0);
                   const auto label = random_label(cfg.num_classes, rng);
                   std::vector<model::PseudoProposal> props;
                   for (std::size_t c = 0; c < cfg.num_classes; ++c) {
                     if (!label[c]) continue;
                     const auto s = pick_size(rng, 0, t - 1);
                     props.push_back({static_cast<int>(c), s, pick_size(rng, s + 1, t), 0.5});
                   }
                   const auto k = model::default_topk(t);
                   return check("loc_loss",
                                [&] { return model::loc_loss(model::loc_head_forward(f, p), props, label, k).total; },
                                {f, p.cls_out.weight, p.reg_out.weight, p.reg_out.bias}, o);
                 }});
  ops.push_back({"distill_mse", [](Rng& rng, const GradCheckOptions& o) {
                   const auto t = pick_size(rng, 1, 6);
                   Tensor x = uniform({t, 1}, rng, 0.0, 1.0);
                   const Tensor a = uniform({t, 1}, rng, 0.0, 1.0);
                   return check("distill_mse", [&] { return nn::mse(x, train::psi(a)); }, {x}, o);
                 }});
  return ops;
}

}  // namespace

const std::vector<RegisteredOp>& registered_ops() {
  static const std::vector<RegisteredOp> ops = build_registry();
  return ops;
}

std::vector<OpSummary> run_gradcheck_suite(std::size_t trials, std::uint64_t seed, nn::GradCheckOptions options,
                                           const std::vector<std::string>& only) {
  std::vector<OpSummary> out;
  for (std::size_t op_index = 0; op_index < registered_ops().size(); ++op_index) {
    const auto& op = registered_ops()[op_index];
    if (!only.empty() && std::find(only.begin(), only.end(), op.name) == only.end()) continue;
    OpSummary s;
    s.name = op.name;
    const auto t0 = std::chrono::steady_clock::now();
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(op_index)};
    Rng rng(seq);
    for (std::size_t i = 0; i < trials; ++i) {
      const auto r = op.trial(rng, options);
      ++s.trials;
      if (!r.passed) ++s.failed_trials;
      s.checked += r.checked;
      s.skipped += r.skipped;
      s.max_rel_error = std::max(s.max_rel_error, r.max_rel_error);
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(s);
  }
  return out;
}

std::string format_gradcheck_table(const std::vector<OpSummary>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-26s %7s %7s %9s %8s %12s  %s\n", "op", "trials", "failed", "checked", "kinks",
                "max_rel_err", "status");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-26s %7zu %7zu %9zu %8zu %12.3e  %s\n", r.name.c_str(), r.trials,
                  r.failed_trials, r.checked, r.skipped, r.max_rel_error, r.passed() ? "PASS" : "FAIL");
    out += buf;
  }
  return out;
}

}  // namespace wtal::diagnostics
