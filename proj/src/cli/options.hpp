#pragma once

#include <string>

#include "wtal/cli/commands.hpp"
#include "wtal/errors.hpp"

namespace wtal::cli::detail {

inline const char* const kCommands[] = {"gen-data", "train", "eval", "gradcheck", "ablate"};

// Calls v(name, field, description) for every option of `command`, in the
// order they are registered and printed.
template <class Visitor>
void visit_options(RunConfig& c, const std::string& command, Visitor&& v) {
  auto describer_options = [&] {
    v("data", c.data_dir, "corpus directory written by gen-data");
    v("descriptions", c.descriptions, "description table (default: <data>/descriptions.tsv)");
    v("word-vectors", c.word_vectors, "text file of 300-d word vectors replacing the seeded table");
    v("mllm-endpoint", c.mllm_endpoint, "http://host:port/path answering {\"class\",\"mode\"} with {\"sentence\"}");
    v("vocab-seed", c.vocab_seed, "seed of the word-embedding table");
    v("preset", c.preset, "model widths: desk or full");
  };
  auto optimiser_options = [&] {
    v("iterations", c.train.iterations, "training iterations");
    v("lr", c.train.lr, "AdamW learning rate");
    v("weight-decay", c.train.weight_decay, "AdamW weight decay");
    v("lambda1", c.train.lambda1, "weight of MSE(A_KSM, psi(A_CSR)) in L_match");
    v("lambda2", c.train.lambda2, "weight of MSE(A_CSR, psi(A_KSM)) in L_rec");
    v("mu1", c.train.mu1, "weight of L_loc in L_match");
    v("topk-divisor", c.train.topk_divisor, "k = max(1, T / divisor) for top-k pooling");
    v("batch-size", c.train.batch_size, "videos per iteration");
    v("pseudo-refresh", c.train.pseudo_refresh, "iterations between pseudo-proposal refreshes");
    v("enable-distill", c.train.enable_distill, "attention distillation between the branches");
    v("enable-locloss", c.train.enable_locloss, "localisation-head loss");
    v("psi", c.psi, "target transform: stopgrad or minmax");
  };

  if (command == "gen-data") {
    v("num-classes", c.corpus.num_classes, "action classes (at most 20)");
    v("num-train", c.corpus.num_train, "training videos");
    v("num-test", c.corpus.num_test, "test videos");
    v("t-min", c.corpus.t_min, "shortest video in segments");
    v("t-max", c.corpus.t_max, "longest video in segments");
    v("feature-dim", c.corpus.feature_dim, "feature width per stream");
    v("snr", c.corpus.snr, "per-dimension prototype-to-noise ratio");
    v("max-instances", c.corpus.max_instances, "most planted instances per video");
    v("multi-class-prob", c.corpus.multi_class_prob, "probability of a second class in a video");
    v("min-instance-frac", c.corpus.min_instance_frac, "shortest instance as a fraction of T");
    v("max-instance-frac", c.corpus.max_instance_frac, "longest instance as a fraction of T");
    v("edge-amplitude", c.corpus.edge_amplitude, "prototype amplitude at instance edges");
    v("confuser-prob", c.corpus.confuser_prob, "probability of a confuser run next to an instance");
    v("confuser-strength", c.corpus.confuser_strength, "class prototype strength inside confusers");
    v("seconds-per-segment", c.corpus.seconds_per_segment, "segment duration");
    v("seed", c.corpus.seed, "corpus seed");
  } else if (command == "train") {
    describer_options();
    v("seed", c.train.seed, "training seed");
    optimiser_options();
    v("enable-ksm", c.train.enable_ksm, "key semantic matching branch");
    v("enable-csr", c.train.enable_csr, "complete semantic reconstruction branch");
    v("permute-labels", c.permute_labels, "shuffle video labels (control run)");
    v("checkpoint-every", c.checkpoint_every, "iterations between checkpoints (0: final only)");
  } else if (command == "eval") {
    v("checkpoint", c.checkpoint, "checkpoint written by train");
    v("data", c.data_dir, "corpus directory written by gen-data");
    v("tracks", c.tracks, "write per-video score tracks as CSV");
  } else if (command == "gradcheck") {
    v("trials", c.gradcheck_trials, "seeded trials per op");
    v("seed", c.gradcheck_seed, "base seed");
    v("tol", c.gradcheck_tol, "relative tolerance");
    v("op", c.gradcheck_ops, "restrict to these ops");
  } else if (command == "ablate") {
    describer_options();
    v("seeds", c.seeds, "training seeds per row");
    optimiser_options();
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
}

}  // namespace wtal::cli::detail
