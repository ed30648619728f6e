#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wtal/corpus/masking.hpp"
#include "wtal/model/model.hpp"
#include "wtal/nn/adam.hpp"
#include "wtal/train/data.hpp"

namespace wtal::train {

using nn::Tensor;

enum class PsiMode {
  kStopGradient,  // detached copy, values unchanged
  kMinMax,        // detached and min-max rescaled to [0, 1]
};
std::string to_string(PsiMode mode);
PsiMode parse_psi_mode(const std::string& text);

// Turns a branch's attention track into a constant target for the other
// branch.
Tensor psi(const Tensor& attention, PsiMode mode = PsiMode::kStopGradient);

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 1e-3;
  long long iterations = 5000;
  double lambda1 = 1.5;
  double lambda2 = 1.5;
  double mu1 = 1.0;
  std::size_t topk_divisor = 8;  // k = max(1, T / topk_divisor)
  std::uint64_t seed = 0;
  std::size_t batch_size = 8;
  std::size_t pseudo_refresh = 100;
  bool enable_ksm = true;
  bool enable_csr = true;
  bool enable_distill = true;
  bool enable_locloss = true;
  PsiMode psi_mode = PsiMode::kStopGradient;

  void validate() const;
  // Coefficients with the ablation switches applied.
  double effective_lambda1() const { return enable_csr && enable_distill ? lambda1 : 0.0; }
  double effective_lambda2() const { return enable_csr && enable_distill ? lambda2 : 0.0; }
  double effective_mu1() const { return enable_locloss ? mu1 : 0.0; }
};

struct IterationMetrics {
  long long iteration = 0;
  double l_match = 0.0;
  double l_ksm = 0.0;
  double l_loc = 0.0;
  double l_focal = 0.0;
  double l_diou = 0.0;
  double l_mil = 0.0;
  double l_rec = 0.0;
  double l_csr = 0.0;
  double mse_ksm_csr = 0.0;  // MSE(A_KSM, A_CSR), logged even when not optimised
  std::string to_json() const;
};

// Forward results of one training video in the current iteration.
struct VideoForward {
  std::size_t index = 0;
  Tensor features;   // F_e
  Tensor attention;  // A_KSM
  Tensor p, p_hat;   // undefined when KSM is disabled
  model::LocHeadOutput head;
  std::vector<model::PseudoProposal> proposals;
  std::optional<model::CsrForward> csr;
  corpus::MaskedSentence masked;
  std::vector<std::size_t> mask_targets;  // vocabulary ids of the masked words
};

struct MatchLoss {
  Tensor total;  // undefined when no term is active
  double ksm = 0.0, loc = 0.0, focal = 0.0, diou = 0.0, mil = 0.0, distill = 0.0;
};
struct RecLoss {
  Tensor total;
  double csr = 0.0, distill = 0.0;
};

// L_match = L_KSM + λ1 MSE(A_KSM, ψ(A_CSR)) + μ1 L_loc, averaged over the
// batch. Terms switched off by the config are left out rather than scaled
// by zero. Throws TrainingError naming the first non-finite term.
MatchLoss match_phase(const std::vector<VideoForward>& batch, const TrainingSet& data, const TrainConfig& config);
// L_rec = L_CSR + λ2 MSE(A_CSR, ψ(A_KSM)), averaged over the batch.
RecLoss rec_phase(const std::vector<VideoForward>& batch, const TrainingSet& data, const TrainConfig& config);

struct TrainState {
  long long iteration = 0;
  nn::AdamState match_adam;
  nn::AdamState rec_adam;
  nn::Rng data_rng;
  nn::Rng dropout_rng;
  nn::Rng mask_rng;
  std::vector<std::size_t> order;  // current epoch permutation
  std::size_t cursor = 0;
};

class Trainer {
 public:
  Trainer(model::Model& model, const TrainingSet& data, TrainConfig config);

  // One alternating iteration: both forwards, then the match update, then
  // the reconstruction update.
  IterationMetrics step();
  // Steps until config.iterations, calling on_iteration after each.
  void run(const std::function<void(const IterationMetrics&)>& on_iteration = {});

  std::vector<std::size_t> next_batch();
  std::vector<VideoForward> forward(const std::vector<std::size_t>& batch);

  // Parameters updated by each phase under the current switches.
  model::ParamList match_parameters() const;
  model::ParamList rec_parameters() const;

  const TrainConfig& config() const { return config_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }
  const std::vector<IterationMetrics>& history() const { return history_; }

 private:
  const std::vector<model::PseudoProposal>& proposals_for(std::size_t index, const Tensor& queries);

  model::Model& model_;
  const TrainingSet& data_;
  TrainConfig config_;
  TrainState state_;
  std::vector<IterationMetrics> history_;
  std::vector<std::optional<std::vector<model::PseudoProposal>>> pseudo_;
};

}  // namespace wtal::train
