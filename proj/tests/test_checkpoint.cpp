#include <fstream>
#include <iterator>

#include "support.hpp"
#include "training_fixture.hpp"
#include "wtal/errors.hpp"
#include "wtal/train/checkpoint.hpp"

TEST_SUITE_BEGIN("checkpoint");

using namespace wtal;
using namespace wtal::train;
using wtal::testing::same_values;
using wtal::testing::TempDir;

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
}

TrainConfig short_run() {
  TrainConfig tc;
  tc.iterations = 6;
  tc.batch_size = 4;
  tc.pseudo_refresh = 3;
  tc.seed = 4;
  return tc;
}

}  // namespace

TEST_CASE("configs survive the JSON form") {
  const auto mc = wtal::testing::tiny_model_config(4, 10, 33, 5);
  const auto back = model_config_from_json(to_json(mc));
  CHECK(to_json(back) == to_json(mc));

  TrainConfig tc;
  tc.lambda1 = 0.25;
  tc.psi_mode = PsiMode::kMinMax;
  tc.enable_csr = false;
  tc.seed = 123456789012345ull;
  const auto tback = train_config_from_json(to_json(tc));
  CHECK(to_json(tback) == to_json(tc));
  CHECK(tback.seed == tc.seed);
  CHECK(tback.psi_mode == PsiMode::kMinMax);

  auto broken = to_json(tc);
  broken.erase("lr");
  CHECK_THROWS_AS(train_config_from_json(broken), FormatError);
}

TEST_CASE("save and load round-trip parameters and training state") {
  auto fx = wtal::testing::small_fixture();
  TempDir dir("ckpt");
  auto m = model::Model::init(fx->model_config, 2);
  auto tc = short_run();
  tc.iterations = 3;
  Trainer trainer(m, fx->data, tc);
  trainer.run();
  save_checkpoint(dir.path() / "a.wtck", m, trainer);

  const auto loaded = load_checkpoint(dir.path() / "a.wtck");
  CHECK(same_values(loaded.model.parameters(), m.parameters()));
  CHECK(loaded.iteration == 3);
  REQUIRE(loaded.train.has_value());
  CHECK(to_json(*loaded.train) == to_json(tc));
  CHECK(to_json(loaded.model.config) == to_json(m.config));
  CHECK_FALSE(loaded.extra.empty());

  save_checkpoint(dir.path() / "bare.wtck", m);
  const auto bare = load_checkpoint(dir.path() / "bare.wtck");
  CHECK(same_values(bare.model.parameters(), m.parameters()));
  CHECK_FALSE(bare.train.has_value());
  CHECK(bare.extra.empty());
}

TEST_CASE("saving is byte-deterministic") {
  auto fx = wtal::testing::small_fixture();
  TempDir dir("ckpt");
  for (const char* name : {"a.wtck", "b.wtck"}) {
    auto m = model::Model::init(fx->model_config, 9);
    auto tc = short_run();
    tc.iterations = 2;
    Trainer trainer(m, fx->data, tc);
    trainer.run();
    save_checkpoint(dir.path() / name, m, trainer);
  }
  const auto a = read_all(dir.path() / "a.wtck");
  CHECK(a.size() > 100);
  CHECK(a.substr(0, 4) == "WTCK");
  CHECK(a == read_all(dir.path() / "b.wtck"));
}

TEST_CASE("a resumed run continues the uninterrupted one exactly") {
  auto fx = wtal::testing::small_fixture();
  TempDir dir("ckpt");
  const auto tc = short_run();

  auto straight = model::Model::init(fx->model_config, tc.seed);
  Trainer full(straight, fx->data, tc);
  full.run();

  auto first_half = model::Model::init(fx->model_config, tc.seed);
  auto half = tc;
  half.iterations = 3;
  Trainer head(first_half, fx->data, half);
  head.run();
  save_checkpoint(dir.path() / "mid.wtck", first_half, head);

  auto loaded = load_checkpoint(dir.path() / "mid.wtck");
  Trainer tail(loaded.model, fx->data, tc);
  restore_trainer(tail, loaded);
  CHECK(tail.state().iteration == 3);
  tail.run();

  REQUIRE(tail.history().size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(tail.history()[i].to_json() == full.history()[i + 3].to_json());
  CHECK(same_values(loaded.model.parameters(), straight.parameters()));
}

TEST_CASE("malformed checkpoints are rejected") {
  auto fx = wtal::testing::small_fixture();
  TempDir dir("ckpt");
  auto m = model::Model::init(fx->model_config, 0);
  save_checkpoint(dir.path() / "good.wtck", m);
  const auto good = read_all(dir.path() / "good.wtck");
  const auto bad = dir.path() / "bad.wtck";

  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.wtck"), LoadError);

  auto magic = good;
  magic[0] = 'X';
  write_all(bad, magic);
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);

  auto version = good;
  version[4] = static_cast<char>(kCheckpointVersion + 1);
  write_all(bad, version);
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, good.size() / 2, good.size() - 1}) {
    write_all(bad, good.substr(0, cut));
    CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  }

  write_all(bad, good + "x");
  try {
    load_checkpoint(bad);
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == good.size());
  }

  write_all(bad, "");
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
}

TEST_CASE("a parameter-only checkpoint restores a fresh trainer") {
  auto fx = wtal::testing::small_fixture();
  TempDir dir("ckpt");
  const auto tc = short_run();
  auto fresh = model::Model::init(fx->model_config, tc.seed);
  save_checkpoint(dir.path() / "bare.wtck", fresh);
  Trainer reference(fresh, fx->data, tc);
  reference.run();

  auto loaded = load_checkpoint(dir.path() / "bare.wtck");
  Trainer trainer(loaded.model, fx->data, tc);
  restore_trainer(trainer, loaded);
  CHECK(trainer.state().iteration == 0);
  trainer.run();
  CHECK(same_values(loaded.model.parameters(), fresh.parameters()));
}

TEST_SUITE_END();
