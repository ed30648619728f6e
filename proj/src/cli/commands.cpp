#include "wtal/cli/commands.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <ostream>

#include "wtal/diagnostics/gradcheck_suite.hpp"
#include "wtal/errors.hpp"
#include "wtal/train/checkpoint.hpp"
#include "wtal/train/data.hpp"

namespace wtal::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw PathError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

fs::path prepare_run_dir(const RunConfig& config) {
  const fs::path dir = run_directory(config);
  fs::create_directories(dir);
  write_text(dir / "config.toml", canonical_config(config));
  return dir;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  return out + "\"";
}

TrainResult train_on_set(const train::TrainingSet& set, const RunConfig& config, const fs::path& out_dir,
                         std::ostream& log) {
  const train::TrainConfig tc = config.resolved_train();
  const auto& first = *set.videos.front();
  const std::size_t feature_dim = first.rgb.dim(1) + first.flow.dim(1);
  model::ModelConfig mc;
  if (config.preset == "desk") {
    mc = model::ModelConfig::desk(set.num_classes(), feature_dim, set.vocab->size(), set.max_key_length());
  } else if (config.preset == "full") {
    mc = model::ModelConfig::full(set.num_classes(), feature_dim, set.vocab->size(), set.max_key_length());
  } else {
    throw ConfigError("unknown preset '" + config.preset + "' (expected desk or full)");
  }

  TrainResult result{model::Model::init(mc, tc.seed), {}};
  train::Trainer trainer(result.model, set, tc);

  std::ofstream metrics;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir / "checkpoints");
    metrics = open_out(out_dir / "metrics.jsonl");
  }
  const auto started = std::chrono::steady_clock::now();
  trainer.run([&](const train::IterationMetrics& m) {
    if (metrics.is_open()) metrics << m.to_json() << '\n';
    if (!out_dir.empty() && config.checkpoint_every > 0 && m.iteration % config.checkpoint_every == 0 &&
        m.iteration != tc.iterations) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06lld.wtck", m.iteration);
      train::save_checkpoint(out_dir / "checkpoints" / name, result.model, trainer);
    }
    if (m.iteration % 100 == 0 || m.iteration == tc.iterations) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      char line[200];
      std::snprintf(line, sizeof line, "iter %lld/%lld  L_match %.4f  L_rec %.4f  MSE %.4f  (%.0f s)\n", m.iteration,
                    tc.iterations, m.l_match, m.l_rec, m.mse_ksm_csr, secs);
      log << line << std::flush;
    }
  });
  if (!out_dir.empty()) train::save_checkpoint(out_dir / "final.wtck", result.model, trainer);
  result.history = trainer.history();
  return result;
}

}  // namespace

TrainResult train_model(const std::vector<corpus::VideoSample>& videos, corpus::DescriptionGenerator& describer,
                        const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const auto set = train::prepare_training_set(videos, describer, config.vocab_seed, config.word_vectors);
  return train_on_set(set, config, out_dir, log);
}

eval::SplitResult evaluate_model(const model::Model& model, const CorpusDir& data, std::size_t topk_divisor) {
  if (data.test.empty()) throw ArgumentError("test split is empty");
  eval::InferenceConfig cfg;
  cfg.topk_divisor = topk_divisor;
  return eval::evaluate_split(data.test, model, data.class_names, cfg);
}

double AblationRow::mean() const {
  if (avg_map.empty()) return 0.0;
  return std::accumulate(avg_map.begin(), avg_map.end(), 0.0) / static_cast<double>(avg_map.size());
}

std::vector<AblationRow> ablation_rows() {
  return {{"Baseline", false, false, {}},
          {"Baseline+KSM", true, false, {}},
          {"Baseline+CSR", false, true, {}},
          {"Baseline+KSM+CSR", true, true, {}}};
}

std::vector<AblationRow> run_ablation(const CorpusDir& data, const RunConfig& config, std::ostream& log) {
  if (config.seeds.empty()) throw ConfigError("ablation needs at least one seed");
  auto describer = make_describer(config, data);
  const auto set = train::prepare_training_set(data.train, *describer, config.vocab_seed, config.word_vectors);
  auto rows = ablation_rows();
  for (auto& row : rows) {
    for (auto seed : config.seeds) {
      RunConfig run = config;
      run.train.seed = seed;
      run.train.enable_ksm = row.enable_ksm;
      run.train.enable_csr = row.enable_csr;
      log << row.name << " seed " << seed << '\n';
      const auto trained = train_on_set(set, run, {}, log);
      const auto result = evaluate_model(trained.model, data, run.train.topk_divisor);
      row.avg_map.push_back(result.report.avg_01_07);
      log << row.name << " seed " << seed << ": avg mAP@[0.1:0.7] " << num(result.report.avg_01_07) << '\n';
    }
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-18s", "avg mAP@[0.1:0.7]");
  out += buf;
  for (auto s : seeds) {
    std::snprintf(buf, sizeof buf, " %8s", ("seed " + std::to_string(s)).c_str());
    out += buf;
  }
  out += "      mean\n";
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-18s", row.name.c_str());
    out += buf;
    for (double v : row.avg_map) {
      std::snprintf(buf, sizeof buf, " %8.2f", 100.0 * v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, " %9.2f\n", 100.0 * row.mean());
    out += buf;
  }
  return out;
}

CommandResult cmd_gen_data(const RunConfig& config, std::ostream& log) {
  config.corpus.validate();
  const fs::path dir = prepare_run_dir(config);
  const auto corpus = corpus::generate_corpus(config.corpus);
  save_corpus_dir(dir, corpus, corpus::DescriptionTable::builtin(static_cast<std::size_t>(config.corpus.num_classes)));
  log << "wrote " << corpus.train.size() << " train and " << corpus.test.size() << " test videos to " << dir.string()
      << '\n';
  return {dir, true};
}

CommandResult cmd_train(const RunConfig& config, std::ostream& log) {
  config.resolved_train();
  auto data = load_corpus_dir(config.data_dir, true, false);
  if (config.permute_labels) permute_labels(data.train, config.train.seed);
  auto describer = make_describer(config, data);
  const fs::path dir = prepare_run_dir(config);
  const auto result = train_model(data.train, *describer, config, dir, log);
  const auto& last = result.history.back();
  log << "final L_match " << num(last.l_match) << "  L_rec " << num(last.l_rec) << "\n";
  return {dir, true};
}

CommandResult cmd_eval(const RunConfig& config, std::ostream& log) {
  if (config.checkpoint.empty()) throw PathError("no checkpoint given (--checkpoint)");
  const auto calls_before = corpus::DescriptionGenerator::call_count();
  const auto loaded = train::load_checkpoint(config.checkpoint);
  const auto data = load_corpus_dir(config.data_dir, false, true);
  const std::size_t divisor = loaded.train ? loaded.train->topk_divisor : 8;
  const auto result = evaluate_model(loaded.model, data, divisor);

  const fs::path dir = prepare_run_dir(config);
  write_text(dir / "report.json", result.report.to_json());
  write_text(dir / "report.txt", result.report.to_text());
  {
    auto csv = open_out(dir / "proposals.csv");
    csv << "video_id,class,q,t_s,t_e\n";
    for (const auto& [video_id, proposals] : result.proposals) {
      for (const auto& p : proposals) {
        csv << csv_field(video_id) << ',' << csv_field(data.class_names.at(static_cast<std::size_t>(p.cls))) << ','
            << num(p.q) << ',' << num(p.t_s) << ',' << num(p.t_e) << '\n';
      }
    }
  }
  if (config.tracks) {
    fs::create_directories(dir / "tracks");
    for (const auto& video : data.test) {
      const auto tracks =
          eval::compute_tracks(loaded.model, model::fuse_features(video.rgb, video.flow), divisor);
      auto csv = open_out(dir / "tracks" / (video.id + ".csv"));
      csv << "segment,t,A_KSM,A_CSR";
      for (const auto& name : data.class_names) csv << ",fused_" << csv_field(name);
      csv << '\n';
      for (std::size_t t = 0; t < tracks.t_len; ++t) {
        csv << t << ',' << num((static_cast<double>(t) + 0.5) * video.seconds_per_segment) << ','
            << num(tracks.attention[t]) << ',' << num(tracks.csr_attention[t]);
        for (std::size_t c = 0; c < tracks.num_classes; ++c) csv << ',' << num(tracks.fused(t, c));
        csv << '\n';
      }
    }
  }
  const auto calls = corpus::DescriptionGenerator::call_count() - calls_before;
  log << result.report.to_text() << "description-generator calls during eval: " << calls << '\n';
  return {dir, true};
}

CommandResult cmd_gradcheck(const RunConfig& config, std::ostream& log) {
  if (config.gradcheck_trials == 0) throw ConfigError("gradcheck needs at least one trial");
  nn::GradCheckOptions options;
  options.tol = config.gradcheck_tol;
  const auto rows =
      diagnostics::run_gradcheck_suite(config.gradcheck_trials, config.gradcheck_seed, options, config.gradcheck_ops);
  if (rows.empty()) throw ConfigError("no registered op matches --op");
  const fs::path dir = prepare_run_dir(config);
  const std::string table = diagnostics::format_gradcheck_table(rows);
  write_text(dir / "gradcheck.txt", table);
  log << table;
  bool ok = true;
  for (const auto& r : rows) ok = ok && r.passed();
  return {dir, ok};
}

CommandResult cmd_ablate(const RunConfig& config, std::ostream& log) {
  config.resolved_train();
  const auto data = load_corpus_dir(config.data_dir, true, true);
  const fs::path dir = prepare_run_dir(config);
  const auto rows = run_ablation(data, config, log);

  nlohmann::ordered_json j;
  j["seeds"] = config.seeds;
  j["metric"] = "average mAP@[0.1:0.7]";
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    j["rows"].push_back({{"name", row.name},
                         {"enable_ksm", row.enable_ksm},
                         {"enable_csr", row.enable_csr},
                         {"avg_map", row.avg_map},
                         {"mean", row.mean()}});
  }
  write_text(dir / "ablation.json", j.dump(2) + "\n");
  const std::string table = format_ablation(rows, config.seeds);
  write_text(dir / "ablation.txt", table);
  log << table;
  return {dir, true};
}

}  // namespace wtal::cli
