#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "wtal/cli/commands.hpp"
#include "wtal/errors.hpp"
#include "wtal/train/checkpoint.hpp"

TEST_SUITE_BEGIN("cli");

using namespace wtal;
using namespace wtal::cli;
using wtal::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

// Runs the command line in-process with $WTAL_RUN_ROOT pointing at `root`.
Invocation invoke(const fs::path& root, std::vector<std::string> args) {
  ::setenv("WTAL_RUN_ROOT", root.c_str(), 1);
  args.insert(args.begin(), "wtal");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Invocation r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  ::unsetenv("WTAL_RUN_ROOT");
  r.out = out.str();
  r.err = err.str();
  if (!r.out.empty() && r.out.back() == '\n') r.out.pop_back();
  return r;
}

std::vector<std::string> small_corpus_flags() {
  return {"gen-data", "--num-classes", "3", "--num-train", "8", "--num-test", "4", "--t-min", "24", "--t-max", "32",
          "--feature-dim", "8", "--seed", "3"};
}

std::vector<std::string> train_flags(const std::string& data) {
  return {"train", "--data", data, "--iterations", "10", "--batch-size", "4", "--checkpoint-every", "5"};
}

double value_of(const std::string& canonical, const std::string& key) {
  for (const auto& line : lines_of(canonical)) {
    if (line.rfind(key + " = ", 0) == 0) return std::stod(line.substr(key.size() + 3));
  }
  FAIL("no key " << key);
  return 0.0;
}

// Serves on a background thread until destruction.
class LocalServer {
 public:
  explicit LocalServer(httplib::Server& server) : server_(server) {
    port_ = server_.bind_to_any_port("127.0.0.1");
    worker_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    worker_.join();
  }
  int port() const { return port_; }

 private:
  httplib::Server& server_;
  int port_ = -1;
  std::thread worker_;
};

std::map<std::string, std::string> tree_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_all(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("canonical config and run directory") {
  RunConfig c;
  c.command = "train";
  c.data_dir = "corpus";
  c.run_root = "/tmp/r";
  const auto text = canonical_config(c);
  CHECK(text.rfind("[train]\n", 0) == 0);
  CHECK(value_of(text, "lambda1") == 1.5);
  CHECK(value_of(text, "lambda2") == 1.5);
  CHECK(value_of(text, "mu1") == 1.0);
  CHECK(value_of(text, "lr") == 0.0005);
  CHECK(value_of(text, "weight-decay") == 0.001);
  CHECK(text.find("num-classes") == std::string::npos);

  const auto dir = run_directory(c);
  CHECK(dir.parent_path() == fs::path("/tmp/r"));
  CHECK(dir.filename().string() == "train-" + sha256_hex("train\n" + text).substr(0, 12));
  CHECK(canonical_config(c) == text);

  RunConfig moved = c;
  moved.run_root = "/elsewhere";
  CHECK(canonical_config(moved) == text);
  RunConfig other = c;
  other.train.seed = 1;
  CHECK(run_directory(other) != dir);
  RunConfig unread = c;
  unread.corpus.num_classes = 7;
  CHECK(run_directory(unread) == dir);
}

TEST_CASE("gen-data, train and eval end to end") {
  TempDir root("cli");

  const auto gen = invoke(root.path(), small_corpus_flags());
  REQUIRE(gen.code == 0);
  const fs::path data = gen.out;
  CHECK(data.parent_path() == root.path());
  CHECK(data.filename().string().rfind("gen-data-", 0) == 0);

  const auto manifest = nlohmann::json::parse(read_all(data / "manifest.json"));
  CHECK(manifest["format"] == "WTF1");
  CHECK(manifest["class_names"].size() == 3);
  REQUIRE(manifest["train"].size() == 8);
  REQUIRE(manifest["test"].size() == 4);
  for (const char* split : {"train", "test"}) {
    for (const auto& entry : manifest[split]) {
      const auto file = data / entry["file"].get<std::string>();
      REQUIRE(fs::exists(file));
      CHECK(entry["sha256"] == sha256_hex(read_all(file)));
    }
  }
  CHECK(fs::exists(data / "descriptions.tsv"));
  CHECK(fs::exists(data / "config.toml"));

  SUBCASE("regeneration is idempotent") {
    const auto before = tree_contents(data);
    const auto again = invoke(root.path(), small_corpus_flags());
    REQUIRE(again.code == 0);
    CHECK(fs::path(again.out) == data);
    CHECK(tree_contents(data) == before);
  }

  SUBCASE("the canonical config replays the run") {
    const auto replay = invoke(root.path(), {"--config", (data / "config.toml").string(), "gen-data"});
    REQUIRE(replay.code == 0);
    CHECK(fs::path(replay.out) == data);
  }

  SUBCASE("training writes metrics, checkpoints and a reproducible final checkpoint") {
    const auto first = invoke(root.path(), train_flags(data.string()));
    REQUIRE(first.code == 0);
    const fs::path run = first.out;
    const auto metrics = lines_of(read_all(run / "metrics.jsonl"));
    REQUIRE(metrics.size() == 10);
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      const auto j = nlohmann::json::parse(metrics[i]);
      CHECK(j["iteration"] == i + 1);
      CHECK(j.contains("L_match"));
      CHECK(j.contains("L_rec"));
    }
    CHECK(fs::exists(run / "checkpoints" / "ckpt_000005.wtck"));
    const auto loaded = train::load_checkpoint(run / "final.wtck");
    REQUIRE(loaded.train.has_value());
    CHECK(loaded.train->lambda1 == 1.5);
    CHECK(loaded.train->lambda2 == 1.5);
    CHECK(loaded.train->mu1 == 1.0);

    auto control = train_flags(data.string());
    control.push_back("--permute-labels");
    const auto permuted = invoke(root.path(), control);
    REQUIRE(permuted.code == 0);
    CHECK(fs::path(permuted.out) != run);

    const auto final_bytes = read_all(run / "final.wtck");
    fs::remove_all(run);
    const auto second = invoke(root.path(), train_flags(data.string()));
    REQUIRE(second.code == 0);
    CHECK(fs::path(second.out) == run);
    CHECK(read_all(run / "final.wtck") == final_bytes);

    const auto replay = invoke(root.path(), {"--config", (run / "config.toml").string(), "train"});
    REQUIRE(replay.code == 0);
    CHECK(fs::path(replay.out) == run);
    CHECK(read_all(run / "final.wtck") == final_bytes);

    const std::vector<std::string> eval_flags = {"eval", "--checkpoint", (run / "final.wtck").string(), "--data",
                                                 data.string(), "--tracks"};
    const auto eval = invoke(root.path(), eval_flags);
    REQUIRE(eval.code == 0);
    const fs::path eval_dir = eval.out;
    CHECK(eval.err.find("description-generator calls during eval: 0") != std::string::npos);
    const auto report = nlohmann::json::parse(read_all(eval_dir / "report.json"));
    for (const auto& [key, value] : report.items()) {
      if (value.is_number()) {
        CHECK(value.get<double>() >= 0.0);
        CHECK(value.get<double>() <= 1.0);
      }
    }
    CHECK(lines_of(read_all(eval_dir / "proposals.csv")).front() == "video_id,class,q,t_s,t_e");
    CHECK(fs::exists(eval_dir / "tracks"));
    const auto outputs = tree_contents(eval_dir);

    fs::remove(data / "descriptions.tsv");
    const auto without_table = invoke(root.path(), eval_flags);
    REQUIRE(without_table.code == 0);
    CHECK(tree_contents(eval_dir) == outputs);
  }
}

TEST_CASE("label permutation shuffles labels among videos") {
  corpus::CorpusConfig config;
  config.num_classes = 4;
  config.num_train = 20;
  config.num_test = 0;
  config.t_min = 16;
  config.t_max = 20;
  config.feature_dim = 4;
  config.seed = 8;
  const auto original = corpus::generate_corpus(config).train;
  auto permuted = original;
  permute_labels(permuted, 3);
  auto again = original;
  permute_labels(again, 3);

  std::multiset<std::vector<std::uint8_t>> before, after;
  std::size_t moved = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    before.insert(original[i].label);
    after.insert(permuted[i].label);
    moved += permuted[i].label != original[i].label;
    CHECK(permuted[i].label == again[i].label);
    CHECK(permuted[i].gt_intervals.empty());
    CHECK(permuted[i].rgb.data().data() == original[i].rgb.data().data());
    CHECK_NOTHROW(permuted[i].validate());
  }
  CHECK(before == after);
  CHECK(moved > 0);
}

TEST_CASE("errors exit non-zero") {
  TempDir root("cli");
  CHECK(invoke(root.path(), {}).code != 0);
  CHECK(invoke(root.path(), {"bogus"}).code != 0);
  CHECK(invoke(root.path(), {"train", "--data", (root.path() / "nowhere").string()}).code != 0);
  CHECK(invoke(root.path(), {"eval", "--data", (root.path() / "nowhere").string()}).code != 0);
  CHECK(invoke(root.path(), {"gen-data", "--num-classes", "0"}).code != 0);
  CHECK(invoke(root.path(), {"gradcheck", "--op", "no_such_op", "--trials", "1"}).code != 0);
  CHECK(invoke(root.path(), {"gradcheck", "--trials", "2", "--tol", "0"}).code != 0);

  const auto ok = invoke(root.path(), {"gradcheck", "--trials", "2", "--op", "add"});
  CHECK(ok.code == 0);
  CHECK(read_all(fs::path(ok.out) / "gradcheck.txt").find("add") != std::string::npos);

  RunConfig missing;
  missing.command = "train";
  missing.data_dir = (root.path() / "nowhere").string();
  missing.run_root = root.path().string();
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_train(missing, log), PathError);
}

TEST_CASE("the Baseline ablation row equals a train run with both branches off") {
  TempDir root("cli");
  RunConfig gen;
  gen.command = "gen-data";
  gen.run_root = root.path().string();
  gen.corpus.num_classes = 3;
  gen.corpus.num_train = 8;
  gen.corpus.num_test = 4;
  gen.corpus.t_min = 24;
  gen.corpus.t_max = 32;
  gen.corpus.feature_dim = 8;
  gen.corpus.seed = 3;
  std::ostringstream log;
  const auto data_dir = cmd_gen_data(gen, log).run_dir;
  const auto data = load_corpus_dir(data_dir);

  RunConfig ablate;
  ablate.command = "ablate";
  ablate.run_root = root.path().string();
  ablate.data_dir = data_dir.string();
  ablate.seeds = {2};
  ablate.train.iterations = 8;
  ablate.train.batch_size = 4;
  const auto rows = run_ablation(data, ablate, log);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "Baseline");
  CHECK(rows[1].name == "Baseline+KSM");
  CHECK(rows[2].name == "Baseline+CSR");
  CHECK(rows[3].name == "Baseline+KSM+CSR");
  const auto table = lines_of(format_ablation(rows, ablate.seeds));
  REQUIRE(table.size() == 5);
  CHECK(table[1].rfind("Baseline ", 0) == 0);
  CHECK(table[4].rfind("Baseline+KSM+CSR", 0) == 0);

  RunConfig train = ablate;
  train.command = "train";
  train.train.seed = 2;
  train.train.enable_ksm = false;
  train.train.enable_csr = false;
  const auto run_dir = cmd_train(train, log).run_dir;
  const auto loaded = train::load_checkpoint(run_dir / "final.wtck");
  const auto report = evaluate_model(loaded.model, data, loaded.train->topk_divisor).report;
  CHECK(report.avg_01_07 == rows[0].avg_map[0]);
}

TEST_CASE("the HTTP describer speaks the endpoint protocol") {
  httplib::Server server;
  std::vector<nlohmann::json> requests;
  server.Post("/describe", [&](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    requests.push_back(j);
    const std::string sentence = j["mode"] == "key" ? "a person " + j["class"].get<std::string>()
                                                    : "a person is doing " + j["class"].get<std::string>() + " now";
    res.set_content(nlohmann::json{{"sentence", sentence}}.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"text\": 1}", "application/json");
  });
  auto local = std::make_unique<LocalServer>(server);
  REQUIRE(local->port() > 0);

  const auto table = corpus::DescriptionTable::builtin(2);
  const std::string base = "http://127.0.0.1:" + std::to_string(local->port());
  HttpDescriber describer(base + "/describe", table);
  corpus::VideoSample video;
  video.id = "v";
  video.label = {1, 1};
  const auto key = describer.describe_key(video, 1);
  const auto complete = describer.describe_complete(video, 0);
  HttpDescriber broken(base + "/broken", table);
  CHECK_THROWS_AS(broken.describe_key(video, 0), FormatError);
  HttpDescriber wrong_path(base + "/nothing", table);
  CHECK_THROWS_AS(wrong_path.describe_key(video, 0), LoadError);

  local.reset();

  REQUIRE(requests.size() == 2);
  CHECK(requests[0]["class"] == table.at(1).name);
  CHECK(requests[0]["mode"] == "key");
  CHECK(requests[1]["class"] == table.at(0).name);
  CHECK(requests[1]["mode"] == "complete");
  CHECK_FALSE(key.empty());
  CHECK(complete.size() > key.size());
  CHECK(describer.class_name(1) == table.at(1).name);
  CHECK_THROWS_AS(HttpDescriber("ftp://host/x", table), ConfigError);
}

TEST_SUITE_END();
