#include "wtal/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "wtal/errors.hpp"

namespace wtal::train {

std::string to_string(PsiMode mode) { return mode == PsiMode::kMinMax ? "minmax" : "stopgrad"; }

PsiMode parse_psi_mode(const std::string& text) {
  if (text == "stopgrad") return PsiMode::kStopGradient;
  if (text == "minmax") return PsiMode::kMinMax;
  throw ConfigError("unknown psi mode '" + text + "' (expected stopgrad or minmax)");
}

Tensor psi(const Tensor& attention, PsiMode mode) {
  Tensor out = attention.detach();
  if (mode == PsiMode::kStopGradient) return out;
  auto v = out.mutable_data();
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, range = *hi - *lo;
  for (auto& x : v) x = range > 0.0 ? (x - a) / range : 0.0;
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
  if (lambda1 < 0.0 || lambda2 < 0.0 || mu1 < 0.0) throw ConfigError("train: lambda1, lambda2 and mu1 must be >= 0");
  if (topk_divisor == 0) throw ConfigError("train: topk_divisor must be >= 1");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (pseudo_refresh == 0) throw ConfigError("train: pseudo_refresh must be >= 1");
}

std::string IterationMetrics::to_json() const {
  nlohmann::ordered_json j{{"iteration", iteration}, {"L_match", l_match},   {"L_KSM", l_ksm},
                           {"L_loc", l_loc},         {"L_focal", l_focal},   {"L_DIoU", l_diou},
                           {"L_MIL", l_mil},         {"L_rec", l_rec},       {"L_CSR", l_csr},
                           {"MSE_ksm_csr", mse_ksm_csr}};
  return j.dump();
}

namespace {

void check_finite(const Tensor& t, const char* term, const corpus::VideoSample& video) {
  const double v = t.item();
  if (!std::isfinite(v)) {
    throw TrainingError(std::string("non-finite ") + term + " (" + std::to_string(v) + ") on video " + video.id);
  }
}

Tensor accumulate(const Tensor& total, const Tensor& term) { return total.defined() ? nn::add(total, term) : term; }

double plain_mse(const Tensor& a, const Tensor& b) {
  const auto x = a.data(), y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

}  // namespace

MatchLoss match_phase(const std::vector<VideoForward>& batch, const TrainingSet& data, const TrainConfig& config) {
  MatchLoss out;
  const double lambda1 = config.effective_lambda1();
  const double mu1 = config.effective_mu1();
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& f : batch) {
    const auto& video = *data.videos[f.index];
    Tensor per_video;
    if (config.enable_ksm) {
      Tensor l = model::ksm_loss(f.p, f.p_hat, video.label);
      check_finite(l, "L_KSM", video);
      out.ksm += l.item() * inv;
      per_video = accumulate(per_video, l);
    }
    if (lambda1 > 0.0 && f.csr) {
      Tensor d = nn::mse(f.attention, psi(f.csr->attention, config.psi_mode));
      check_finite(d, "MSE(A_KSM, psi(A_CSR))", video);
      out.distill += d.item() * inv;
      per_video = accumulate(per_video, nn::scale(d, lambda1));
    }
    if (mu1 > 0.0) {
      const auto terms = model::loc_loss(f.head, f.proposals, video.label,
                                         model::default_topk(video.length(), config.topk_divisor));
      check_finite(terms.focal, "L_focal", video);
      check_finite(terms.diou, "L_DIoU", video);
      check_finite(terms.mil, "L_MIL", video);
      out.loc += terms.total.item() * inv;
      out.focal += terms.focal.item() * inv;
      out.diou += terms.diou.item() * inv;
      out.mil += terms.mil.item() * inv;
      per_video = accumulate(per_video, nn::scale(terms.total, mu1));
    }
    if (per_video.defined()) out.total = accumulate(out.total, per_video);
  }
  if (out.total.defined()) out.total = nn::scale(out.total, inv);
  return out;
}

RecLoss rec_phase(const std::vector<VideoForward>& batch, const TrainingSet& data, const TrainConfig& config) {
  RecLoss out;
  if (!config.enable_csr) return out;
  const double lambda2 = config.effective_lambda2();
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& f : batch) {
    if (!f.csr) throw TrainingError("rec_phase: reconstruction forward missing");
    const auto& video = *data.videos[f.index];
    Tensor l = model::csr_loss(f.csr->word_dists, f.mask_targets, f.masked.positions);
    check_finite(l, "L_CSR", video);
    out.csr += l.item() * inv;
    Tensor per_video = l;
    if (lambda2 > 0.0) {
      Tensor d = nn::mse(f.csr->attention, psi(f.attention, config.psi_mode));
      check_finite(d, "MSE(A_CSR, psi(A_KSM))", video);
      out.distill += d.item() * inv;
      per_video = nn::add(per_video, nn::scale(d, lambda2));
    }
    out.total = accumulate(out.total, per_video);
  }
  out.total = nn::scale(out.total, inv);
  return out;
}

Trainer::Trainer(model::Model& model, const TrainingSet& data, TrainConfig config)
    : model_(model), data_(data), config_(config) {
  config_.validate();
  if (data_.videos.empty()) throw ArgumentError("trainer: empty training set");
  if (data_.num_classes() != model_.config.num_classes) {
    throw ArgumentError("trainer: model and data disagree on the class count");
  }
  state_.data_rng = model::stream_rng(config_.seed, model::Stream::kData);
  state_.dropout_rng = model::stream_rng(config_.seed, model::Stream::kDropout);
  state_.mask_rng = model::stream_rng(config_.seed, model::Stream::kMask);
  pseudo_.resize(data_.videos.size());
}

model::ParamList Trainer::match_parameters() const {
  model::ParamList out;
  model_.ksm.collect_video(out);
  if (config_.enable_ksm) model_.ksm.collect_text(out);
  for (auto& p : model_.head.parameters()) out.push_back(std::move(p));
  return out;
}

model::ParamList Trainer::rec_parameters() const {
  return config_.enable_csr ? model_.csr.parameters() : model::ParamList{};
}

std::vector<std::size_t> Trainer::next_batch() {
  const std::size_t n = data_.videos.size();
  std::vector<std::size_t> batch;
  while (batch.size() < std::min(config_.batch_size, n)) {
    if (state_.cursor >= state_.order.size()) {
      state_.order.resize(n);
      std::iota(state_.order.begin(), state_.order.end(), std::size_t{0});
      std::shuffle(state_.order.begin(), state_.order.end(), state_.data_rng);
      state_.cursor = 0;
    }
    batch.push_back(state_.order[state_.cursor++]);
  }
  return batch;
}

const std::vector<model::PseudoProposal>& Trainer::proposals_for(std::size_t index, const Tensor& queries) {
  auto& slot = pseudo_[index];
  if (slot) return *slot;
  // Mined from a deterministic evaluation-mode forward.
  const auto& video = *data_.videos[index];
  const Tensor& fused = data_.fused[index];
  nn::Rng unused(0);
  const auto emb = model::embed_video(fused, model_.ksm, model_.config.dropout, unused, false);
  Tensor scores;
  if (config_.enable_ksm) {
    scores = model::match(emb.features, emb.attention, queries, model_.config.temperature).m_hat;
  } else {
    scores = nn::softmax(model::loc_head_forward(emb.features, model_.head).logits, 1);
  }
  const auto thresholds = model::default_mining_thresholds();
  slot = model::mine_pseudo_proposals(emb.attention.data(), scores.detach(), video.label, thresholds);
  return *slot;
}

std::vector<VideoForward> Trainer::forward(const std::vector<std::size_t>& batch) {
  const auto& cfg = model_.config;
  Tensor queries;
  if (config_.enable_ksm) {
    queries = model::encode_text_query(model::build_query_tokens(data_.key_vectors, model_.ksm, cfg), model_.ksm, cfg);
  }
  std::vector<VideoForward> out;
  out.reserve(batch.size());
  for (std::size_t index : batch) {
    const auto& video = *data_.videos[index];
    const Tensor& fused = data_.fused[index];
    VideoForward f;
    f.index = index;
    if (config_.enable_locloss) f.proposals = proposals_for(index, queries.defined() ? queries.detach() : queries);
    const auto emb = model::embed_video(fused, model_.ksm, cfg.dropout, state_.dropout_rng, true);
    f.features = emb.features;
    f.attention = emb.attention;
    if (config_.enable_ksm) {
      const auto sim = model::match(emb.features, emb.attention, queries, cfg.temperature);
      const std::size_t k = model::default_topk(video.length(), config_.topk_divisor);
      f.p = model::video_scores(sim.m, k).p;
      f.p_hat = model::video_scores(sim.m_hat, k).p;
    }
    f.head = model::loc_head_forward(emb.features, model_.head);
    if (config_.enable_csr) {
      f.masked = corpus::mask_description(data_.complete[index], data_.verbs[index], state_.mask_rng);
      f.mask_targets = data_.vocab->ids(f.masked.targets);
      f.csr = model::csr_forward(fused, emb.features.detach(), data_.vocab->embed_tokens(f.masked.input), model_.csr);
    }
    out.push_back(std::move(f));
  }
  return out;
}

IterationMetrics Trainer::step() {
  if (state_.iteration % static_cast<long long>(config_.pseudo_refresh) == 0) {
    for (auto& slot : pseudo_) slot.reset();
  }
  const auto batch = next_batch();
  IterationMetrics m;
  m.iteration = state_.iteration + 1;
  try {
    const auto forwards = forward(batch);
    const MatchLoss match = match_phase(forwards, data_, config_);
    const RecLoss rec = rec_phase(forwards, data_, config_);
    if (config_.enable_csr) {
      for (const auto& f : forwards) m.mse_ksm_csr += plain_mse(f.attention, f.csr->attention);
      m.mse_ksm_csr /= static_cast<double>(forwards.size());
    }
    const nn::AdamConfig adam{config_.lr, 0.9, 0.999, 1e-8, config_.weight_decay};
    if (match.total.defined()) {
      check_finite(match.total, "L_match", *data_.videos[batch.front()]);
      auto params = model::tensors_of(match_parameters());
      nn::zero_grads(params);
      match.total.backward();
      nn::adam_step(params, state_.match_adam, adam);
      m.l_match = match.total.item();
    }
    if (rec.total.defined()) {
      auto params = model::tensors_of(rec_parameters());
      nn::zero_grads(params);
      rec.total.backward();
      nn::adam_step(params, state_.rec_adam, adam);
      m.l_rec = rec.total.item();
    }
    m.l_ksm = match.ksm;
    m.l_loc = match.loc;
    m.l_focal = match.focal;
    m.l_diou = match.diou;
    m.l_mil = match.mil;
    m.l_csr = rec.csr;
  } catch (const TrainingError& e) {
    throw TrainingError("iteration " + std::to_string(m.iteration) + ": " + e.what());
  }
  ++state_.iteration;
  history_.push_back(m);
  return m;
}

void Trainer::run(const std::function<void(const IterationMetrics&)>& on_iteration) {
  while (state_.iteration < config_.iterations) {
    const auto m = step();
    if (on_iteration) on_iteration(m);
  }
}

}  // namespace wtal::train
