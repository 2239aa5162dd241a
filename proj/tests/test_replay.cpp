#include "doctest.h"

#include <algorithm>

#include "grczsl/checkpoint.hpp"
#include "grczsl/errors.hpp"
#include "grczsl/replay.hpp"
#include "grczsl/residency.hpp"
#include "support.hpp"

using namespace grczsl;

namespace {

CvaeArch toy_arch() {
  CvaeArch arch;
  arch.feature_dim = 4;
  arch.attribute_dim = 2;
  arch.encoder_hidden = 8;
  arch.decoder_hidden = 8;
  arch.latent_dim = 2;
  return arch;
}

Matrix toy_attributes() { return Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}, {-1, 0.5}}); }

LabeledBatch toy_batch(std::vector<std::size_t> classes, std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix attrs = toy_attributes();
  LabeledBatch b;
  b.features = Matrix(classes.size() * per_class, 4);
  b.attributes = Matrix(classes.size() * per_class, 2);
  std::size_t r = 0;
  for (std::size_t c : classes) {
    for (std::size_t i = 0; i < per_class; ++i, ++r) {
      for (std::size_t k = 0; k < 4; ++k) b.features(r, k) = static_cast<double>(c) + 0.2 * rng.normal();
      b.attributes(r, 0) = attrs(c, 0);
      b.attributes(r, 1) = attrs(c, 1);
      b.labels.push_back(c);
    }
  }
  return b;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.replay_batch_size = 8;
  cfg.samples_per_seen_class = 10;
  cfg.learning_rate = 1e-2;
  cfg.seed = 21;
  return cfg;
}

}  // namespace

TEST_CASE("combined task loss is the alpha mixture") {
  CHECK(combined_task_loss(2.0, 4.0, 0.25) == doctest::Approx(3.5));
  CHECK(combined_task_loss(2.0, 4.0, 1.0) == 2.0);
  CHECK(combined_task_loss(2.0, 4.0, 0.0) == 4.0);
}

TEST_CASE("replay synthesis: per-class blocks with attributes and provenance") {
  const CvaeParams model = init_cvae(toy_arch(), 1);
  const Matrix attrs = toy_attributes();
  const ReplayPlan plan{{2, 0}, {2, 1}};
  const ReplaySet set = synthesize_replay(model.decoder, plan, attrs, 6, 5);
  REQUIRE(set.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    const std::size_t cls = i < 6 ? 2 : 0;
    CHECK(set.labels[i] == cls);
    CHECK(set.source_tasks[i] == (i < 6 ? 2u : 1u));
    CHECK(set.attributes(i, 0) == attrs(cls, 0));
    CHECK(set.attributes(i, 1) == attrs(cls, 1));
  }
  // each class has its own stream: dropping class 2 leaves class 0 unchanged
  const ReplaySet only0 = synthesize_replay(model.decoder, ReplayPlan{{0}, {1}}, attrs, 6, 5);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(only0.features(i, k) == set.features(6 + i, k));

  CHECK_THROWS_AS(synthesize_replay(model.decoder, ReplayPlan{}, attrs, 6, 5), SequencingError);
  CHECK_THROWS_AS(synthesize_replay(model.decoder, ReplayPlan{{9}, {1}}, attrs, 6, 5), DataError);
  CHECK_THROWS_AS(synthesize_replay(std::filesystem::path("/nonexistent/ckpt.bin"), plan, attrs, 6, 5), DataError);
}

TEST_CASE("task sequencing is enforced") {
  const auto data = toy_batch({0, 1}, 8, 1);
  const auto cfg = toy_config();
  const CvaeArch arch = toy_arch();
  CHECK_THROWS_AS(train_task(1, data, init_cvae(arch, 1), nullptr, arch, cfg), SequencingError);
  CHECK_THROWS_AS(train_task(2, data, std::nullopt, nullptr, arch, cfg), SequencingError);
  CHECK_THROWS_AS(train_task(0, data, std::nullopt, nullptr, arch, cfg), SequencingError);
  CHECK_THROWS_AS(train_task(2, data, init_cvae(arch, 1), nullptr, arch, cfg), DataError);
  CHECK_THROWS_AS(train_task(2, data, std::optional<std::filesystem::path>{}, ReplayPlan{}, toy_attributes(), arch, cfg),
                  SequencingError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training lowers the loss and is deterministic") {
  const auto data = toy_batch({0, 1}, 16, 2);
  auto cfg = toy_config();
  cfg.epochs = 30;
  const auto a = train_task(1, data, std::nullopt, nullptr, toy_arch(), cfg);
  const auto b = train_task(1, data, std::nullopt, nullptr, toy_arch(), cfg);
  CHECK(a.params == b.params);
  REQUIRE(a.losses.size() == 30);
  CHECK(a.losses.back().real_loss < 0.5 * a.losses.front().real_loss);
  CHECK(a.losses.front().replay_loss == 0.0);
  CHECK(a.steps == 30 * 4);
}

TEST_CASE("alpha = 1 with replay data present follows the no-replay trajectory") {
  const auto task1 = toy_batch({0, 1}, 8, 3);
  const auto task2 = toy_batch({2, 3}, 8, 4);
  auto cfg = toy_config();
  const auto first = train_task(1, task1, std::nullopt, nullptr, toy_arch(), cfg);
  const ReplaySet replay =
      synthesize_replay(first.params.decoder, ReplayPlan{{0, 1}, {1, 1}}, toy_attributes(), 10, 8);

  cfg.alpha = 1.0;
  const auto with_replay = train_task(2, task2, first.params, &replay, toy_arch(), cfg);
  cfg.exclude_replay = true;
  const auto without = train_task(2, task2, first.params, nullptr, toy_arch(), cfg);
  CHECK(with_replay.params == without.params);

  cfg.exclude_replay = false;
  cfg.alpha = 0.5;
  const auto mixed = train_task(2, task2, first.params, &replay, toy_arch(), cfg);
  CHECK_FALSE(mixed.params == without.params);
  CHECK(mixed.losses.front().replay_loss > 0.0);
  CHECK(mixed.losses.front().combined ==
        doctest::Approx(combined_task_loss(mixed.losses.front().real_loss, mixed.losses.front().replay_loss, 0.5)));
}

TEST_CASE("checkpoint-driven training matches the in-memory path and bounds residency") {
  testsupport::TempDir dir("grczsl-replay");
  const auto task1 = toy_batch({0, 1}, 8, 3);
  const auto task2 = toy_batch({2, 3}, 8, 4);
  const auto cfg = toy_config();
  const ReplayPlan plan{{0, 1}, {1, 1}};
  {
    const auto first = train_task(1, task1, std::optional<std::filesystem::path>{}, ReplayPlan{}, toy_attributes(),
                                  toy_arch(), cfg);
    save_cvae(dir / "t1.bin", first.params, CheckpointMeta{1, "toy", cfg.seed});
  }
  const auto base = residency::snapshot();
  residency::reset_peaks();
  const auto via_ckpt = train_task(2, task2, dir / "t1.bin", plan, toy_attributes(), toy_arch(), cfg);
  const auto peak = residency::snapshot();
  CHECK(peak.peak_full <= base.live_full + 1);
  CHECK(peak.peak_frozen <= base.live_frozen + 1);

  const CvaeParams loaded = load_cvae(dir / "t1.bin");
  const ReplaySet replay = synthesize_replay(loaded.decoder, plan, toy_attributes(), cfg.samples_per_seen_class,
                                             derive_seed(cfg.seed, {tag(SeedPurpose::Replay), 2}));
  const auto in_memory = train_task(2, task2, loaded, &replay, toy_arch(), cfg);
  CHECK(via_ckpt.params == in_memory.params);

  CHECK_THROWS_AS(train_task(2, task2, dir / "missing.bin", plan, toy_attributes(), toy_arch(), cfg), DataError);
}

TEST_CASE("non-finite data surfaces as a numeric error") {
  auto data = toy_batch({0, 1}, 8, 1);
  data.features(0, 0) = 1e300;
  auto cfg = toy_config();
  CHECK_THROWS_AS(train_task(1, data, std::nullopt, nullptr, toy_arch(), cfg), NumericError);
}
