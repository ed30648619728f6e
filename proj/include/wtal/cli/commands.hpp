#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wtal/corpus/descriptions.hpp"
#include "wtal/corpus/generator.hpp"
#include "wtal/eval/inference.hpp"
#include "wtal/model/model.hpp"
#include "wtal/train/trainer.hpp"

namespace wtal::cli {

// Settings of one command. Only the fields a command reads are part of its
// canonical form (and therefore of its run-directory hash).
struct RunConfig {
  std::string command;

  corpus::CorpusConfig corpus;
  train::TrainConfig train;
  std::string psi = "stopgrad";  // stopgrad | minmax
  std::string preset = "desk";   // desk | full

  std::string data_dir;
  std::string checkpoint;
  std::string descriptions;  // defaults to <data_dir>/descriptions.tsv
  std::string word_vectors;
  std::string mllm_endpoint;
  std::uint64_t vocab_seed = 11;
  long long checkpoint_every = 500;
  bool permute_labels = false;
  bool tracks = false;

  std::size_t gradcheck_trials = 100;
  std::uint64_t gradcheck_seed = 1;
  double gradcheck_tol = 1e-4;
  std::vector<std::string> gradcheck_ops;

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  // Not hashed. Empty means $WTAL_RUN_ROOT, or ./runs when that is unset.
  std::string run_root;

  // TrainConfig with psi parsed and validated.
  train::TrainConfig resolved_train() const;
};

// A `[command]` header and one `key = value` line per option the command
// reads, in registration order; `wtal --config <file>` replays it.
std::string canonical_config(const RunConfig& config);
std::string sha256_hex(const std::string& bytes);
std::filesystem::path run_root(const RunConfig& config);
// <root>/<command>-<first 12 hex digits of sha256(canonical form)>
std::filesystem::path run_directory(const RunConfig& config);

// A corpus written by gen-data: manifest.json, descriptions.tsv and one
// WTF1 file per video under train/ and test/.
struct CorpusDir {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<corpus::VideoSample> train;
  std::vector<corpus::VideoSample> test;
};

void save_corpus_dir(const std::filesystem::path& dir, const corpus::Corpus& corpus,
                     const corpus::DescriptionTable& table);
// Throws PathError when the directory or a listed file is missing.
CorpusDir load_corpus_dir(const std::filesystem::path& dir, bool load_train = true, bool load_test = true);

// Shuffles the label vectors among the videos. Features stay put; the
// ground-truth intervals no longer match the labels and are dropped (training
// never reads them).
void permute_labels(std::vector<corpus::VideoSample>& videos, std::uint64_t seed);

// Describer posting {"class": name, "mode": "key"|"complete"} to an HTTP
// endpoint and reading {"sentence": ...}; class names and verbs come from
// the table.
class HttpDescriber final : public corpus::DescriptionGenerator {
 public:
  HttpDescriber(std::string endpoint, corpus::DescriptionTable table);

  std::vector<std::string> action_verbs(int cls) const override { return table_.at(cls).verbs; }
  std::string class_name(int cls) const override { return table_.at(cls).name; }

 protected:
  std::string generate(const corpus::VideoSample& video, int cls, corpus::DescriptionMode mode) override;

 private:
  std::string host_;
  std::string path_;
  corpus::DescriptionTable table_;
};

std::unique_ptr<corpus::DescriptionGenerator> make_describer(const RunConfig& config, const CorpusDir& data);

struct TrainResult {
  model::Model model;
  std::vector<train::IterationMetrics> history;
};

// Trains on `videos`. With a non-empty out_dir, writes metrics.jsonl,
// checkpoints/ckpt_<iteration>.wtck every checkpoint_every iterations and
// final.wtck.
TrainResult train_model(const std::vector<corpus::VideoSample>& videos, corpus::DescriptionGenerator& describer,
                        const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

eval::SplitResult evaluate_model(const model::Model& model, const CorpusDir& data, std::size_t topk_divisor = 8);

// Rows in the order Baseline, Baseline+KSM, Baseline+CSR, Baseline+KSM+CSR.
struct AblationRow {
  std::string name;
  bool enable_ksm = false;
  bool enable_csr = false;
  std::vector<double> avg_map;  // average mAP@[0.1:0.7] per seed
  double mean() const;
};
std::vector<AblationRow> ablation_rows();
std::vector<AblationRow> run_ablation(const CorpusDir& data, const RunConfig& config, std::ostream& log);
std::string format_ablation(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds);

struct CommandResult {
  std::filesystem::path run_dir;
  bool ok = true;
};

CommandResult cmd_gen_data(const RunConfig& config, std::ostream& log);
CommandResult cmd_train(const RunConfig& config, std::ostream& log);
CommandResult cmd_eval(const RunConfig& config, std::ostream& log);
CommandResult cmd_gradcheck(const RunConfig& config, std::ostream& log);
CommandResult cmd_ablate(const RunConfig& config, std::ostream& log);

// Parses argv, runs the chosen command and returns the process exit code
// (non-zero on any error or a failed gradient check).
int run_cli(int argc, char** argv);

}  // namespace wtal::cli
