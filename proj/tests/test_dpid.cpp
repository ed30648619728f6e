#include <cmath>

#include "support.hpp"
#include "training_fixture.hpp"
#include "wtal/errors.hpp"
#include "wtal/nn/gradcheck.hpp"

TEST_SUITE_BEGIN("dpid");

using namespace wtal;
using namespace wtal::train;
using nn::Tensor;
using wtal::testing::checksum;
using wtal::testing::random_tensor;
using wtal::testing::same_values;

TEST_CASE("TrainConfig defaults") {
  const TrainConfig c;
  CHECK(c.lr == 0.0005);
  CHECK(c.weight_decay == 0.001);
  CHECK(c.iterations == 5000);
  CHECK(c.lambda1 == 1.5);
  CHECK(c.lambda2 == 1.5);
  CHECK(c.mu1 == 1.0);
  CHECK(c.batch_size == 8);
  CHECK(c.pseudo_refresh == 100);

  TrainConfig bad;
  bad.lambda1 = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_psi_mode(to_string(PsiMode::kMinMax)) == PsiMode::kMinMax);
  CHECK_THROWS_AS(parse_psi_mode("soft"), ConfigError);
}

TEST_CASE("psi stops gradients and keeps values") {
  std::mt19937_64 r(1);
  auto a = random_tensor({9, 1}, r, 0.0, 1.0, true);
  auto x = random_tensor({9, 1}, r, 0.0, 1.0, true);
  const auto target = psi(a);
  CHECK(wtal::testing::values(target) == wtal::testing::values(a));
  CHECK_FALSE(target.requires_grad());

  nn::mse(x, psi(a)).backward();
  for (double g : a.grad()) CHECK(g == 0.0);
  for (std::size_t t = 0; t < 9; ++t) CHECK(x.grad()[t] == doctest::Approx(2.0 * (x[t] - a[t]) / 9.0).epsilon(1e-14));

  const auto report = nn::finite_diff_check("mse_psi", [&](const Tensor& v) { return nn::mse(v, psi(a)); }, x);
  CHECK(report.passed);

  const auto scaled = psi(a, PsiMode::kMinMax);
  CHECK_FALSE(scaled.requires_grad());
  double lo = 1.0, hi = 0.0;
  for (double v : scaled.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0);
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("phase losses isolate their terms") {
  auto fx = wtal::testing::small_fixture();
  auto m = model::Model::init(fx->model_config, 0);
  TrainConfig tc;
  tc.batch_size = 4;
  Trainer trainer(m, fx->data, tc);
  auto batch = trainer.forward(trainer.next_batch());

  const auto full = match_phase(batch, fx->data, tc);
  CHECK(full.total.item() == doctest::Approx(full.ksm + 1.5 * full.distill + 1.0 * full.loc).epsilon(1e-13));
  CHECK(full.loc == doctest::Approx(full.focal + full.diou + full.mil).epsilon(1e-13));
  CHECK(full.distill > 0.0);

  auto isolated = tc;
  isolated.lambda1 = 0.0;
  isolated.mu1 = 0.0;
  CHECK(match_phase(batch, fx->data, isolated).total.item() == full.ksm);

  const auto rec = rec_phase(batch, fx->data, tc);
  double csr = 0.0, distill = 0.0;
  for (const auto& f : batch) {
    double mse = 0.0;
    for (std::size_t t = 0; t < f.attention.numel(); ++t) {
      const double d = f.csr->attention[t] - f.attention[t];
      mse += d * d / static_cast<double>(f.attention.numel());
    }
    distill += mse / 4.0;
    csr += model::csr_loss(f.csr->word_dists, f.mask_targets, f.masked.positions).item() / 4.0;
  }
  CHECK(rec.csr == doctest::Approx(csr).epsilon(1e-13));
  CHECK(rec.distill == doctest::Approx(distill).epsilon(1e-13));
  CHECK(rec.total.item() == doctest::Approx(csr + 1.5 * distill).epsilon(1e-13));
  auto no_coupling = tc;
  no_coupling.lambda2 = 0.0;
  CHECK(rec_phase(batch, fx->data, no_coupling).total.item() == doctest::Approx(rec.csr).epsilon(1e-15));

  for (auto& f : batch) f.csr->attention = f.attention.detach();
  CHECK(match_phase(batch, fx->data, tc).distill == 0.0);
  CHECK(rec_phase(batch, fx->data, tc).distill == 0.0);
}

TEST_CASE("each phase moves only its own parameter group") {
  auto fx = wtal::testing::small_fixture();
  auto m = model::Model::init(fx->model_config, 1);
  TrainConfig tc;
  tc.batch_size = 4;
  Trainer trainer(m, fx->data, tc);

  const auto match_names = trainer.match_parameters();
  const auto rec_names = trainer.rec_parameters();
  for (const auto& [a, ta] : match_names)
    for (const auto& [b, tb] : rec_names) CHECK(a != b);
  CHECK(match_names.size() + rec_names.size() == m.parameters().size());

  const nn::AdamConfig adam{tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay};
  const auto batch = trainer.forward(trainer.next_batch());
  auto all = model::tensors_of(m.parameters());

  const auto rec_before = checksum(trainer.rec_parameters());
  const auto match_before = checksum(trainer.match_parameters());
  nn::zero_grads(all);
  match_phase(batch, fx->data, tc).total.backward();
  for (const auto& [name, t] : trainer.rec_parameters())
    for (double g : t.grad()) CHECK(g == 0.0);
  nn::AdamState match_state;
  auto match_params = model::tensors_of(trainer.match_parameters());
  nn::adam_step(match_params, match_state, adam);
  CHECK(checksum(trainer.rec_parameters()) == rec_before);
  const auto match_after = checksum(trainer.match_parameters());
  CHECK(match_after != match_before);

  nn::zero_grads(all);
  rec_phase(batch, fx->data, tc).total.backward();
  for (const auto& [name, t] : trainer.match_parameters())
    for (double g : t.grad()) CHECK(g == 0.0);
  nn::AdamState rec_state;
  auto rec_params = model::tensors_of(trainer.rec_parameters());
  nn::adam_step(rec_params, rec_state, adam);
  CHECK(checksum(trainer.match_parameters()) == match_after);
  CHECK(checksum(trainer.rec_parameters()) != rec_before);
}

TEST_CASE("training is reproducible from the seed") {
  auto fx = wtal::testing::small_fixture();
  TrainConfig tc;
  tc.iterations = 6;
  tc.batch_size = 4;
  tc.pseudo_refresh = 3;
  std::vector<std::string> logs[2];
  model::ParamList finals[2];
  for (int run = 0; run < 2; ++run) {
    auto m = model::Model::init(fx->model_config, 5);
    Trainer trainer(m, fx->data, tc);
    trainer.run();
    for (const auto& h : trainer.history()) logs[run].push_back(h.to_json());
    finals[run] = m.parameters();
  }
  CHECK(logs[0] == logs[1]);
  CHECK(same_values(finals[0], finals[1]));
  CHECK(logs[0].size() == 6);
  CHECK(logs[0][0].find("\"L_match\"") != std::string::npos);
}

TEST_CASE("without coupling the branches train independently") {
  auto fx = wtal::testing::small_fixture();
  TrainConfig tc;
  tc.iterations = 8;
  tc.batch_size = 4;
  tc.pseudo_refresh = 4;
  tc.enable_distill = false;
  tc.seed = 2;

  auto dual_model = model::Model::init(fx->model_config, tc.seed);
  Trainer dual(dual_model, fx->data, tc);
  dual.run();

  const auto single = wtal::testing::run_independent(fx->data, fx->model_config, tc);
  REQUIRE(single.ksm_history.size() == dual.history().size());
  for (std::size_t i = 0; i < dual.history().size(); ++i) {
    CHECK(dual.history()[i].l_match == single.ksm_history[i].l_match);
    CHECK(dual.history()[i].l_ksm == single.ksm_history[i].l_ksm);
    CHECK(dual.history()[i].l_loc == single.ksm_history[i].l_loc);
    CHECK(dual.history()[i].l_csr == single.csr_losses[i]);
  }
  CHECK(same_values(dual.match_parameters(), model::Model(single.ksm_model).match_group()));
  CHECK(same_values(dual_model.csr.parameters(), single.csr.parameters()));

  // Editing the reconstruction branch's initial weights leaves the matching
  // branch untouched.
  auto edited = model::Model::init(fx->model_config, tc.seed);
  edited.csr = model::Model::init(fx->model_config, 99).csr;
  Trainer other(edited, fx->data, tc);
  other.run();
  CHECK(same_values(edited.match_group(), dual_model.match_group()));
  CHECK_FALSE(same_values(edited.csr.parameters(), dual_model.csr.parameters()));
}

TEST_CASE("a non-finite loss names the offending term") {
  auto fx = wtal::testing::small_fixture();
  auto m = model::Model::init(fx->model_config, 0);
  TrainConfig tc;
  tc.batch_size = 2;
  Trainer trainer(m, fx->data, tc);
  m.csr.output.bias.mutable_data()[0] = std::nan("");
  try {
    trainer.step();
    FAIL("expected a TrainingError");
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    CHECK(what.find("L_CSR") != std::string::npos);
    CHECK(what.find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("distillation MSE falls between iterations 50 and 2000 on the default corpus" * doctest::timeout(1500)) {
  auto fx = std::make_unique<wtal::testing::TrainingFixture>(corpus::CorpusConfig{});
  auto m = model::Model::init(fx->model_config, 0);
  TrainConfig tc;
  tc.iterations = 2000;
  Trainer trainer(m, fx->data, tc);
  trainer.run();
  const auto& h = trainer.history();
  for (const auto& it : h) {
    REQUIRE(std::isfinite(it.l_match));
    REQUIRE(std::isfinite(it.l_rec));
  }
  MESSAGE("MSE(A_KSM, A_CSR): iteration 50 " << h[49].mse_ksm_csr << ", iteration 2000 " << h[1999].mse_ksm_csr);
  CHECK(h[1999].mse_ksm_csr < h[49].mse_ksm_csr);
}

TEST_SUITE_END();
