#include "doctest.h"

#include <fstream>
#include <sstream>

#include "grczsl/config.hpp"
#include "grczsl/dataset.hpp"
#include "grczsl/errors.hpp"
#include "grczsl/experiment.hpp"
#include "support.hpp"

using namespace grczsl;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) n += !line.empty();
  return n;
}

ExperimentConfig toy_config(const std::filesystem::path& data, const std::filesystem::path& out, SettingKind setting) {
  ExperimentConfig c = default_config("toy", setting);
  c.dataset_path = data;
  c.output_dir = out;
  c.seed = 5;
  c.arch.encoder_hidden = 16;
  c.arch.decoder_hidden = 16;
  c.arch.latent_dim = 3;
  c.train.epochs = 4;
  c.train.batch_size = 16;
  c.train.replay_batch_size = 16;
  c.train.samples_per_seen_class = 10;
  c.train.learning_rate = 1e-2;
  c.classifier.hidden = 16;
  c.classifier.epochs = 5;
  c.classifier.learning_rate = 1e-2;
  c.classifier.samples_per_class = 10;
  c.classifier.batch_size = 20;
  if (setting == SettingKind::Fixed) c.fixed_recipe = FixedRecipe{{2, 2, 2}};
  else c.dynamic_recipe = DynamicRecipe{{{2, 1}, {2, 1}}};
  return c;
}

DatasetBundle toy_data(std::size_t seen, std::size_t unseen) {
  SyntheticSpec spec;
  spec.name = "toy";
  spec.seen_classes = seen;
  spec.unseen_classes = unseen;
  spec.samples_per_class = 15;
  return make_synthetic(spec);
}

}  // namespace

TEST_CASE("fixed run writes every artifact with one row per task") {
  testsupport::TempDir dir("grczsl-exp");
  write_dataset(dir / "data", toy_data(4, 2));
  const auto cfg = toy_config(dir / "data", dir / "out", SettingKind::Fixed);
  std::size_t observed = 0;
  const auto data = load_dataset(cfg.dataset_path);
  const auto outcome = train_experiment(cfg, data, [&](std::size_t t, const TaskRecord& r) {
    CHECK(t == ++observed);
    CHECK(r.predictions.size() == r.labels.size());
  });
  CHECK(observed == 3);
  CHECK(outcome.ledger.records.size() == 3);
  CHECK(outcome.losses.size() == 3 * cfg.train.epochs);

  const auto out = cfg.output_dir;
  CHECK(std::filesystem::exists(out / kManifestFile));
  CHECK(std::filesystem::exists(out / kLedgerFile));
  CHECK(line_count(out / kLossFile) == 3 * cfg.train.epochs);
  for (int t = 1; t <= 3; ++t) {
    CHECK(std::filesystem::exists(out / "checkpoints" / ("cvae_task_0" + std::to_string(t) + ".bin")));
    CHECK(std::filesystem::exists(out / "checkpoints" / ("classifier_task_0" + std::to_string(t) + ".bin")));
  }

  const auto metrics = evaluate(outcome.ledger);
  emit_report(outcome.ledger, metrics, cfg, out);
  CHECK(line_count(out / kCurvesFile) == 1 + 3);
  CHECK(line_count(out / kMetricsRecord) == 3 + 1);
  const std::string table = slurp(out / kReportTable);
  CHECK(table.find("mSA (t=1..3)") != std::string::npos);
  CHECK(table.find("mUA (t=1..2)") != std::string::npos);

  std::ifstream echo(out / kResolvedConfig);
  nlohmann::json j;
  echo >> j;
  CHECK(config_to_json(config_from_json(j)) == config_to_json(cfg));

  // the evaluation pool of every fixed task is the whole test split
  const auto stream = read_manifest(out / kManifestFile);
  for (const auto& r : outcome.ledger.records) CHECK(r.labels.size() == evaluation_pool(stream, 1).size());
}

TEST_CASE("dynamic run grows its evaluation pool") {
  testsupport::TempDir dir("grczsl-dyn");
  write_dataset(dir / "data", toy_data(4, 2));
  const auto cfg = toy_config(dir / "data", dir / "out", SettingKind::Dynamic);
  const auto report = run_experiment(cfg);
  REQUIRE(report.outcome.ledger.records.size() == 2);
  CHECK(report.outcome.ledger.records[0].labels.size() < report.outcome.ledger.records[1].labels.size());
  CHECK(report.metrics.unseen_last_task == 2);
  CHECK(report.metrics.per_task.size() == 2);
}

TEST_CASE("runs are byte-identical across reruns and thread counts") {
  testsupport::TempDir dir("grczsl-det");
  write_dataset(dir / "data", toy_data(4, 2));
  auto a = toy_config(dir / "data", dir / "a", SettingKind::Fixed);
  auto b = a;
  b.output_dir = dir / "b";
  run_experiment(a);
  run_experiment(b);
  CHECK(slurp(a.output_dir / kMetricsRecord) == slurp(b.output_dir / kMetricsRecord));
  CHECK(slurp(a.output_dir / kCurvesFile) == slurp(b.output_dir / kCurvesFile));
  CHECK(slurp(a.output_dir / kLedgerFile) == slurp(b.output_dir / kLedgerFile));
  CHECK(slurp(a.output_dir / "checkpoints/cvae_task_03.bin") == slurp(b.output_dir / "checkpoints/cvae_task_03.bin"));

  auto c = a;
  c.output_dir = dir / "c";
  c.threads = 4;
  run_experiment(c);
  CHECK(slurp(a.output_dir / kLedgerFile) == slurp(c.output_dir / kLedgerFile));
}

TEST_CASE("an unwritable output directory fails before any training") {
  testsupport::TempDir dir("grczsl-unw");
  write_dataset(dir / "data", toy_data(4, 2));
  {
    std::ofstream blocker(dir / "file");
    blocker << "x";
  }
  auto cfg = toy_config(dir / "data", dir / "file" / "out", SettingKind::Fixed);
  CHECK_THROWS_AS(run_experiment(cfg), IoError);
  CHECK_FALSE(std::filesystem::exists(dir / "file" / "out"));
}

TEST_CASE("a failing task is named in the error and keeps its category") {
  testsupport::TempDir dir("grczsl-fail");
  auto data = toy_data(4, 2);
  for (double& v : data.features.values()) v *= 1e200;
  write_dataset(dir / "data", data);
  auto cfg = toy_config(dir / "data", dir / "out", SettingKind::Fixed);
  try {
    run_experiment(cfg);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).rfind("task 1:", 0) == 0);
  }
}

TEST_CASE("missing recipes for unnamed datasets are config errors") {
  testsupport::TempDir dir("grczsl-norecipe");
  write_dataset(dir / "data", toy_data(4, 2));
  auto cfg = toy_config(dir / "data", dir / "out", SettingKind::Fixed);
  cfg.fixed_recipe.reset();
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("alpha sweep writes one report per alpha plus a summary") {
  testsupport::TempDir dir("grczsl-sweep");
  write_dataset(dir / "data", toy_data(4, 2));
  auto cfg = toy_config(dir / "data", dir / "out", SettingKind::Fixed);
  cfg.train.epochs = 2;
  cfg.sweep_alphas = {0.0, 0.5, 1.0};
  const auto entries = sweep_alpha(cfg);
  REQUIRE(entries.size() == 3);
  for (const auto& e : entries) CHECK(std::filesystem::exists(e.output_dir / kReportTable));
  CHECK(entries[1].output_dir == cfg.output_dir / "alpha_0.50");
  CHECK(line_count(cfg.output_dir / "sweep_alpha.tsv") == 4);
}
