#include "grczsl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "grczsl/checkpoint.hpp"
#include "grczsl/classifier.hpp"
#include "grczsl/errors.hpp"
#include "grczsl/rng.hpp"

namespace grczsl {

namespace {

std::string effective_name(const ExperimentConfig& config, const DatasetBundle& data) {
  return config.dataset_name.empty() ? data.meta.name : config.dataset_name;
}

std::string task_tag(std::size_t t) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << t;
  return os.str();
}

std::filesystem::path cvae_checkpoint(const std::filesystem::path& dir, std::size_t t) {
  return dir / "checkpoints" / ("cvae_task_" + task_tag(t) + ".bin");
}

std::filesystem::path classifier_checkpoint(const std::filesystem::path& dir, std::size_t t) {
  return dir / "checkpoints" / ("classifier_task_" + task_tag(t) + ".bin");
}

// Predictions are independent per row, so splitting rows over workers keeps
// results identical for any thread count.
std::vector<std::size_t> predict_rows(const ClassifierParams& clf, const Matrix& features, std::size_t threads) {
  const std::size_t n = features.rows();
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n / 256));
  if (workers == 1) return predict(clf, features);
  std::vector<std::size_t> out(n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) return;
        std::vector<std::size_t> idx(end - begin);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
        auto part = predict(clf, gather_rows(features, idx));
        std::copy(part.begin(), part.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::string json_line(const nlohmann::json& j) { return j.dump() + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

void ensure_writable_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".grczsl-write-probe";
  {
    std::ofstream os(probe, std::ios::trunc);
    if (!os || !(os << "ok")) throw IoError("output directory is not writable: " + dir.string());
  }
  std::filesystem::remove(probe, ec);
}

TaskStream build_stream(const ExperimentConfig& config, const DatasetBundle& data) {
  SplitOptions options;
  options.test_fraction = config.test_fraction;
  options.class_order_seed = config.class_order_seed;
  DatasetMeta meta = data.meta;
  const std::string name = effective_name(config, data);
  if (config.setting == SettingKind::Fixed) {
    if (config.fixed_recipe) return split_fixed(meta, config.seed, *config.fixed_recipe, options);
    auto recipe = fixed_recipe_for(name);
    if (!recipe) throw ConfigError("dataset '" + name + "' has no built-in fixed recipe; set dataset.fixed_recipe");
    return split_fixed(meta, config.seed, *recipe, options);
  }
  if (config.dynamic_recipe) return split_dynamic(meta, config.seed, *config.dynamic_recipe, options);
  auto recipe = dynamic_recipe_for(name);
  if (!recipe) throw ConfigError("dataset '" + name + "' has no built-in dynamic recipe; set dataset.dynamic_recipe");
  return split_dynamic(meta, config.seed, *recipe, options);
}

TrainOutcome train_experiment(const ExperimentConfig& config, const DatasetBundle& data, const TaskObserver& observer) {
  config.validate();
  const auto& out_dir = config.output_dir;
  ensure_writable_directory(out_dir);
  ensure_writable_directory(out_dir / "checkpoints");

  TrainOutcome outcome;
  outcome.stream = build_stream(config, data);
  const TaskStream& stream = outcome.stream;
  write_manifest(out_dir / kManifestFile, stream);

  CvaeArch arch = config.arch;
  arch.feature_dim = data.features.cols();
  arch.attribute_dim = data.class_attributes.cols();
  const std::string name = effective_name(config, data);

  outcome.ledger.setting = stream.setting;
  outcome.ledger.total_tasks = stream.size();
  std::ostringstream loss_lines;
  residency::Snapshot peak{};

  for (std::size_t t = 1; t <= stream.size(); ++t) {
    const TaskData& task = stream.task(t);
    try {
      if (t >= 2) residency::reset_peaks();

      TrainConfig train = config.train;
      train.seed = config.seed;
      ReplayPlan plan;
      plan.classes = replay_classes(stream, t);
      for (std::size_t cls : plan.classes) {
        for (std::size_t k = 1; k < t; ++k) {
          const auto& tc = stream.task(k).train_classes;
          if (std::find(tc.begin(), tc.end(), cls) != tc.end()) {
            plan.source_tasks.push_back(k);
            break;
          }
        }
      }
      const LabeledBatch real = data.batch(task.train_indices, t);
      std::optional<std::filesystem::path> previous;
      if (t >= 2) previous = cvae_checkpoint(out_dir, t - 1);
      TaskTrainResult trained = train_task(t, real, previous, plan, data.class_attributes, arch, train);
      save_cvae(cvae_checkpoint(out_dir, t), trained.params, CheckpointMeta{t, name, config.seed});
      for (const LossRecord& r : trained.losses) {
        loss_lines << json_line({{"task", r.task},
                                 {"epoch", r.epoch},
                                 {"real_loss", r.real_loss},
                                 {"replay_loss", r.replay_loss},
                                 {"combined", r.combined}});
      }

      const auto scope = classifier_scope(stream, t);
      const LabeledBatch synthetic =
          build_training_set(trained.params.decoder, scope, data.class_attributes, config.classifier.samples_per_class,
                             derive_seed(config.seed, {tag(SeedPurpose::ClassifierSet), t}));
      ClassifierConfig clf_config = config.classifier;
      clf_config.seed = derive_seed(config.seed, {tag(SeedPurpose::ClassifierInit), t});
      const ClassifierParams clf = train_classifier(synthetic, clf_config);
      save_classifier(classifier_checkpoint(out_dir, t), clf, t, name, config.seed);

      const auto pool = evaluation_pool(stream, t);
      TaskRecord record;
      record.task = t;
      record.predictions = predict_rows(clf, gather_rows(data.features, pool), config.threads);
      record.labels.reserve(pool.size());
      for (std::size_t i : pool) record.labels.push_back(data.labels[i]);
      record.seen_classes = task.seen_at_t;
      record.unseen_classes = task.unseen_at_t;
      if (observer) observer(t, record);
      outcome.ledger.records.push_back(std::move(record));
      outcome.losses.insert(outcome.losses.end(), trained.losses.begin(), trained.losses.end());
    } catch (const Error& e) {
      throw Error(e.kind(), "task " + std::to_string(t) + ": " + e.what());
    }
    if (t >= 2) {
      const auto snap = residency::snapshot();
      peak.peak_full = std::max(peak.peak_full, snap.peak_full);
      peak.peak_frozen = std::max(peak.peak_frozen, snap.peak_frozen);
      peak.peak_total = std::max(peak.peak_total, snap.peak_total);
    }
  }
  outcome.residency = peak;
  write_text(out_dir / kLossFile, loss_lines.str());
  write_ledger(out_dir / kLedgerFile, outcome.ledger);
  return outcome;
}

RunReport run_experiment(const ExperimentConfig& config, const DatasetBundle& data) {
  RunReport report;
  report.outcome = train_experiment(config, data);
  report.metrics = evaluate(report.outcome.ledger);
  emit_report(report.outcome.ledger, report.metrics, config, config.output_dir);
  return report;
}

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ensure_writable_directory(config.output_dir);
  const DatasetBundle data =
      load_dataset(config.dataset_path, LoadOptions{config.normalize_attributes, config.normalize_features});
  return run_experiment(config, data);
}

std::vector<SweepEntry> sweep_alpha(const ExperimentConfig& config) {
  config.validate();
  ensure_writable_directory(config.output_dir);
  const DatasetBundle data =
      load_dataset(config.dataset_path, LoadOptions{config.normalize_attributes, config.normalize_features});
  std::vector<SweepEntry> entries;
  for (double alpha : config.sweep_alphas) {
    ExperimentConfig run = config;
    run.train.alpha = alpha;
    std::ostringstream dir;
    dir << "alpha_" << std::fixed << std::setprecision(2) << alpha;
    run.output_dir = config.output_dir / dir.str();
    RunReport r = run_experiment(run, data);
    entries.push_back({alpha, r.metrics, run.output_dir});
  }
  std::ostringstream table;
  table << "alpha\tmSA\tmUA\tmH\n" << std::fixed << std::setprecision(4);
  for (const auto& e : entries) {
    table << std::setprecision(2) << e.alpha << std::setprecision(4) << '\t' << 100.0 * e.metrics.mean_seen << '\t'
          << 100.0 * e.metrics.mean_unseen << '\t' << 100.0 * e.metrics.mean_h << '\n';
  }
  write_text(config.output_dir / "sweep_alpha.tsv", table.str());
  return entries;
}

std::string format_report_table(const EvaluationLedger& ledger, const MetricSummary& m, const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "dataset: " << (c.dataset_name.empty() ? c.dataset_path.filename().string() : c.dataset_name)
     << "  setting: " << to_string(ledger.setting) << "  tasks: " << ledger.total_tasks
     << "  alpha: " << c.train.alpha << "  seed: " << c.seed << (c.train.exclude_replay ? "  replay: off" : "")
     << "\n\n";
  os << std::left << std::setw(6) << "task" << std::right << std::setw(10) << "SA" << std::setw(10) << "UA"
     << std::setw(10) << "H" << '\n';
  for (const TaskScore& s : m.per_task) {
    os << std::left << std::setw(6) << s.task << std::right << std::setw(10) << 100.0 * s.seen;
    if (s.unseen) {
      os << std::setw(10) << 100.0 * *s.unseen << std::setw(10) << 100.0 * *s.h;
    } else {
      os << std::setw(10) << "-" << std::setw(10) << "-";
    }
    os << '\n';
  }
  os << '\n'
     << "mSA (t=1.." << m.seen_last_task << ")  " << 100.0 * m.mean_seen << '\n'
     << "mUA (t=1.." << m.unseen_last_task << ")  " << 100.0 * m.mean_unseen << '\n'
     << "mH  (t=1.." << m.unseen_last_task << ")  " << 100.0 * m.mean_h << '\n';
  return os.str();
}

void emit_report(const EvaluationLedger& ledger, const MetricSummary& metrics, const ExperimentConfig& config,
                 const std::filesystem::path& dir) {
  ensure_writable_directory(dir);
  write_text(dir / kReportTable, format_report_table(ledger, metrics, config));

  std::ostringstream curves;
  curves << "task\tseen_acc\tunseen_acc\tharmonic\n" << std::setprecision(17);
  for (const TaskScore& s : metrics.per_task) {
    curves << s.task << '\t' << s.seen << '\t';
    if (s.unseen)
      curves << *s.unseen << '\t' << *s.h << '\n';
    else
      curves << "NA\tNA\n";
  }
  write_text(dir / kCurvesFile, curves.str());

  std::string record;
  for (const TaskScore& s : metrics.per_task) {
    record += json_line({{"task", s.task},
                         {"seen_acc", s.seen},
                         {"unseen_acc", s.unseen ? nlohmann::json(*s.unseen) : nlohmann::json(nullptr)},
                         {"harmonic", s.h ? nlohmann::json(*s.h) : nlohmann::json(nullptr)}});
  }
  record += json_line({{"summary",
                        {{"setting", to_string(ledger.setting)},
                         {"tasks", ledger.total_tasks},
                         {"mSA", metrics.mean_seen},
                         {"mUA", metrics.mean_unseen},
                         {"mH", metrics.mean_h},
                         {"mSA_tasks", {1, metrics.seen_last_task}},
                         {"mUA_tasks", {1, metrics.unseen_last_task}},
                         {"mH_tasks", {1, metrics.unseen_last_task}}}}});
  write_text(dir / kMetricsRecord, record);
  write_text(dir / kResolvedConfig, config_to_json(config).dump(2) + "\n");
}

}  // namespace grczsl
