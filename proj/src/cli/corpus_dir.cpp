#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "wtal/cli/commands.hpp"
#include "wtal/corpus/feature_file.hpp"
#include "wtal/errors.hpp"

namespace wtal::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ordered_json corpus_config_json(const corpus::CorpusConfig& c) {
  ordered_json j;
  j["num_classes"] = c.num_classes;
  j["num_train"] = c.num_train;
  j["num_test"] = c.num_test;
  j["t_min"] = c.t_min;
  j["t_max"] = c.t_max;
  j["feature_dim"] = c.feature_dim;
  j["snr"] = std::isinf(c.snr) ? ordered_json("inf") : ordered_json(c.snr);
  j["max_instances"] = c.max_instances;
  j["multi_class_prob"] = c.multi_class_prob;
  j["min_instance_frac"] = c.min_instance_frac;
  j["max_instance_frac"] = c.max_instance_frac;
  j["edge_amplitude"] = c.edge_amplitude;
  j["confuser_prob"] = c.confuser_prob;
  j["confuser_strength"] = c.confuser_strength;
  j["seconds_per_segment"] = c.seconds_per_segment;
  j["seed"] = c.seed;
  return j;
}

ordered_json write_split(const fs::path& dir, const std::string& split, const std::vector<corpus::VideoSample>& videos) {
  fs::create_directories(dir / split);
  ordered_json entries = ordered_json::array();
  for (const auto& video : videos) {
    const std::string rel = split + "/" + video.id + ".wtf";
    corpus::write_feature_file(dir / rel, video);
    entries.push_back({{"id", video.id}, {"file", rel}, {"sha256", sha256_hex(read_bytes(dir / rel))}});
  }
  return entries;
}

std::vector<corpus::VideoSample> read_split(const fs::path& dir, const nlohmann::json& entries) {
  std::vector<corpus::VideoSample> videos;
  for (const auto& e : entries) {
    const fs::path file = dir / e.at("file").get<std::string>();
    if (!fs::exists(file)) throw PathError("corpus file listed in the manifest is missing: " + file.string());
    if (e.contains("sha256") && sha256_hex(read_bytes(file)) != e["sha256"].get<std::string>()) {
      throw FormatError("checksum mismatch for " + file.string());
    }
    videos.push_back(corpus::load_feature_file(file));
  }
  return videos;
}

}  // namespace

void save_corpus_dir(const fs::path& dir, const corpus::Corpus& corpus, const corpus::DescriptionTable& table) {
  fs::create_directories(dir);
  table.save(dir / "descriptions.tsv");
  ordered_json manifest;
  manifest["format"] = "WTF1";
  manifest["corpus"] = corpus_config_json(corpus.config);
  manifest["class_names"] = table.class_names();
  manifest["descriptions"] = "descriptions.tsv";
  manifest["train"] = write_split(dir, "train", corpus.train);
  manifest["test"] = write_split(dir, "test", corpus.test);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw PathError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

CorpusDir load_corpus_dir(const fs::path& dir, bool load_train, bool load_test) {
  if (dir.empty()) throw PathError("no corpus directory given (--data)");
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw PathError("corpus manifest not found: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_bytes(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what(), e.byte);
  }
  CorpusDir out;
  out.root = dir;
  try {
    out.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    if (load_train) out.train = read_split(dir, manifest.at("train"));
    if (load_test) out.test = read_split(dir, manifest.at("test"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  for (const auto* split : {&out.train, &out.test}) {
    for (const auto& v : *split) {
      if (v.num_classes() != out.class_names.size()) {
        throw FormatError(v.id + ": label width " + std::to_string(v.num_classes()) + " but the manifest lists " +
                          std::to_string(out.class_names.size()) + " classes");
      }
    }
  }
  return out;
}

void permute_labels(std::vector<corpus::VideoSample>& videos, std::uint64_t seed) {
  std::vector<std::vector<std::uint8_t>> labels;
  for (const auto& v : videos) labels.push_back(v.label);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9e3779b9u};
  std::mt19937_64 rng(seq);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    videos[i].label = std::move(labels[i]);
    videos[i].gt_intervals.clear();
  }
}

}  // namespace wtal::cli
