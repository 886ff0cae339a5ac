#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "feasc/checkpoint.hpp"
#include "feasc/trainer.hpp"
#include "temp_dir.hpp"

using namespace feasc;
namespace fs = std::filesystem;

namespace {

LabeledImages toy_data(int n, std::uint64_t seed) {
  LabeledImages d;
  d.n_classes = 2;
  for (int i = 0; i < n; ++i) {
    d.images.push_back(render_synthetic_image(i % 2, 2, 40, derive_seed(seed, i)));
    d.labels.push_back(i % 2);
  }
  return d;
}

TrainConfig toy_config(Framework mode) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = 3;
  c.warmup_epochs = 1;
  c.batch_size = 4;
  c.base_lr = 0.05;
  c.beta = 2;
  c.encoder.widths = {4, 6};
  c.encoder.strides = {2, 2};
  c.head = HeadSpec{8, 6, 4};
  c.augment.resolution = 32;
  c.seed = 5;
  return c;
}

bool same_losses(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i], &y = b[i];
    if (x.epoch != y.epoch || x.step != y.step || x.eta != y.eta || x.lr != y.lr || x.loss.total != y.loss.total ||
        x.loss.d_orig != y.loss.d_orig || x.loss.d_supp != y.loss.d_supp || x.loss.mse_orig != y.loss.mse_orig ||
        x.loss.mse_supp != y.loss.mse_supp)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule endpoints") {
  CHECK(lr_at(10, 100, 10, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lr_at(55, 100, 10, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lr_at(0, 100, 10, 0.5) == 0.0);
  CHECK(lr_at(5, 100, 10, 0.5) == doctest::Approx(0.25));
  const double last = lr_at(99, 100, 10, 0.5);
  const double increment = lr_at(98, 100, 10, 0.5) - last;
  CHECK(last >= 0.0);
  CHECK(last <= increment);
  CHECK(last == doctest::Approx(0.5 * (1 - std::cos(std::numbers::pi / 90)) / 2).epsilon(1e-12));
  CHECK(lr_at(0, 10, 0, 0.3) == doctest::Approx(0.3));
  CHECK_THROWS_AS(lr_at(100, 100, 10, 0.5), ValidationError);
  CHECK_THROWS_AS(lr_at(-1, 100, 10, 0.5), ValidationError);

  double prev = 1e9;
  for (long s = 10; s < 100; ++s) {
    const double lr = lr_at(s, 100, 10, 0.5);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("sgd momentum and weight decay closed form") {
  Parameter p{"w", Tensor({1}, 1.0), Tensor({1}, 0.5), true};
  Sgd sgd({&p}, SgdConfig{0.5, 0.1});
  sgd.step(0.1);
  CHECK(sgd.velocity()[0][0] == doctest::Approx(0.6));
  CHECK(p.value[0] == doctest::Approx(0.94));
  sgd.step(0.1);
  const double v2 = 0.5 * 0.6 + 0.5 + 0.1 * 0.94;
  CHECK(sgd.velocity()[0][0] == doctest::Approx(v2));
  CHECK(p.value[0] == doctest::Approx(0.94 - 0.1 * v2));
  CHECK_THROWS_AS(Sgd({&p}, SgdConfig{1.0, 0.0}), ValidationError);
}

TEST_CASE("train config json round trip and strictness") {
  TrainConfig c = toy_config(Framework::byol);
  c.lambda = 2.5;
  c.strategy = Strategy::low_response;
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  const TrainConfig partial = TrainConfig::from_json(R"({"epochs": 40, "augment": {"resolution": 32}})");
  CHECK(partial.epochs == 40);
  CHECK(partial.augment.resolution == 32);
  CHECK(partial.momentum == 0.5);

  CHECK_THROWS_WITH_AS(TrainConfig::from_json(R"({"epochz": 3})"), doctest::Contains("epochz"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"epochs": 5, "warmup_epochs": 5})"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"batch_size": 1})"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"base_lr": -0.1})"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"mode": "moco"})"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"epochs": "ten"})"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::from_json("{not json"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::load("/nonexistent/c.json"), IngestionError);
}

TEST_CASE("zero epochs writes only the initial checkpoint") {
  testing::TempDir dir;
  TrainConfig c = toy_config(Framework::simsiam);
  c.epochs = 0;
  c.warmup_epochs = 0;
  const TrainResult r = train(c, toy_data(8, 1), dir.str());
  CHECK(r.metrics.empty());
  REQUIRE(r.checkpoints.size() == 1);
  CHECK(fs::path(r.checkpoints[0]).filename() == "final.ckpt");
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) files += e.is_regular_file();
  CHECK(files == 1);
  CHECK(read_metrics_csv((dir / "metrics.csv").string()).empty());
}

TEST_CASE("logged metrics satisfy the loss identity and the ramp") {
  for (Framework mode : {Framework::simsiam, Framework::byol}) {
    testing::TempDir dir;
    const TrainConfig c = toy_config(mode);
    const TrainResult r = train(c, toy_data(12, 2), dir.str());
    REQUIRE(r.metrics.size() == 9);
    for (const auto& row : r.metrics) {
      CHECK(row.loss.total == doctest::Approx(row.loss.d_orig + c.lambda * row.loss.d_supp).epsilon(1e-12));
      CHECK(row.eta == ramp_up_eta(row.epoch, RampSchedule{c.alpha, c.beta}));
      CHECK(std::isfinite(row.loss.total));
    }
    CHECK(r.metrics[0].lr == 0.0);
    const auto logged = read_metrics_csv((dir / "metrics.csv").string());
    CHECK(same_losses(logged, r.metrics));
  }
}

TEST_CASE("lambda zero gives total equal to d_orig") {
  TrainConfig c = toy_config(Framework::simsiam);
  c.lambda = 0.0;
  const TrainResult r = train(c, toy_data(8, 3), "");
  for (const auto& row : r.metrics) CHECK(row.loss.total == row.loss.d_orig);
}

TEST_CASE("training is reproducible for a fixed seed") {
  const TrainConfig c = toy_config(Framework::byol);
  const LabeledImages data = toy_data(12, 4);
  const TrainResult a = train(c, data, "");
  const TrainResult b = train(c, data, "");
  CHECK(same_losses(a.metrics, b.metrics));
  CHECK(same_state(a.model.encoder, b.model.encoder));

  TrainConfig other = c;
  other.seed = 6;
  CHECK_FALSE(same_losses(train(other, data, "").metrics, a.metrics));
}

TEST_CASE("byol target follows the ema after every step") {
  TrainConfig c = toy_config(Framework::byol);
  c.tau = 0.9;
  Sequential previous_target;
  bool first = true;
  int checked = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const MetricsRow&, const SiameseModel& m) {
    if (!first) {
      const auto tgt = m.target_encoder.state();
      const auto onl = m.encoder.state();
      const auto prev = previous_target.state();
      for (std::size_t k = 0; k < tgt.size(); k += 2)
        for (std::size_t i = 0; i < tgt[k]->value.size(); i += 3) {
          const double expected = 0.9 * prev[k]->value[i] + 0.1 * onl[k]->value[i];
          CHECK(tgt[k]->value[i] == doctest::Approx(expected).epsilon(1e-12));
          ++checked;
        }
    }
    previous_target = m.target_encoder;
    first = false;
  };
  train(c, toy_data(8, 5), "", hooks);
  CHECK(checked > 0);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  testing::TempDir dir;
  TrainHooks hooks;
  hooks.inspect_loss = [](MetricsRow& row) {
    if (row.step == 3) row.loss.total = std::nan("");
  };
  try {
    train(toy_config(Framework::simsiam), toy_data(8, 6), dir.str(), hooks);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
    REQUIRE(fs::exists(e.diagnostics_path()));
    std::ifstream in(e.diagnostics_path());
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("\"step\": 3") != std::string::npos);
  }
  CHECK(read_metrics_csv((dir / "metrics.csv").string()).size() == 3);
}

TEST_CASE("checkpoint cadence") {
  testing::TempDir dir;
  TrainConfig c = toy_config(Framework::simsiam);
  c.epochs = 4;
  c.checkpoint_every = 2;
  const TrainResult r = train(c, toy_data(8, 7), dir.str());
  REQUIRE(r.checkpoints.size() == 2);
  CHECK(fs::path(r.checkpoints[0]).filename() == "epoch_0002.ckpt");
  CHECK(fs::path(r.checkpoints[1]).filename() == "final.ckpt");
  CHECK(read_checkpoint_meta(r.checkpoints[0]).epoch == 2);
  CHECK(read_checkpoint_meta(r.checkpoints[1]).epoch == 4);
  CHECK(TrainConfig::from_json(read_checkpoint_meta(r.checkpoints[1]).config_json).to_json() == c.to_json());
}

TEST_CASE("checkpoint round trip and backbone loading") {
  testing::TempDir dir;
  for (Framework mode : {Framework::byol, Framework::simsiam}) {
    SiameseModel m(mode, toy_config(mode).encoder, toy_config(mode).head, 9);
    m.encoder.state()[0]->value[0] = 0.123;
    Sgd sgd(m.online_parameters(), {});
    sgd.velocity()[1][0] = 4.5;
    const std::string path = (dir / "m.ckpt").string();
    save_checkpoint(path, m, {mode, toy_config(mode).encoder, toy_config(mode).head, 3, 30, "{}"}, &sgd);

    CheckpointMeta meta;
    SiameseModel loaded = load_checkpoint(path, &meta);
    CHECK(meta.epoch == 3);
    CHECK(meta.step == 30);
    CHECK(meta.framework == mode);
    CHECK(same_state(loaded.encoder, m.encoder));
    CHECK(same_state(loaded.projector, m.projector));
    CHECK(same_state(loaded.predictor, m.predictor));
    if (mode == Framework::byol) CHECK(same_state(loaded.target_encoder, m.target_encoder));

    Sgd restored(loaded.online_parameters(), {});
    load_optimizer_state(path, restored);
    CHECK(restored.velocity()[1][0] == 4.5);

    EncoderSpec spec;
    const Sequential backbone = load_backbone(path, &spec);
    CHECK(same_state(backbone, m.encoder));
    CHECK(spec.widths == toy_config(mode).encoder.widths);
  }
}

TEST_CASE("checkpoint errors") {
  testing::TempDir dir;
  const TrainConfig c = toy_config(Framework::simsiam);
  SiameseModel m(c.mode, c.encoder, c.head, 1);
  const CheckpointMeta meta{c.mode, c.encoder, c.head, 0, 0, ""};

  const std::string path = (dir / "full.ckpt").string();
  CHECK_THROWS_WITH_AS(save_checkpoint(path, m, meta, nullptr, {100}), doctest::Contains("no space"), CheckpointError);
  CHECK_FALSE(fs::exists(path));
  CHECK(fs::is_empty(dir.path()));

  CHECK_THROWS_AS(save_checkpoint((dir / "missing/dir/x.ckpt").string(), m, meta), CheckpointError);

  const std::string junk = (dir / "junk.ckpt").string();
  std::ofstream(junk) << "definitely not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(junk), CheckpointError);
  CHECK_THROWS_AS(load_backbone((dir / "absent.ckpt").string()), CheckpointError);

  save_checkpoint(path, m, meta);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(in)), {});
  }
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"), CheckpointError);
}
