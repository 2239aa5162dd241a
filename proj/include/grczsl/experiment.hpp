#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "grczsl/config.hpp"
#include "grczsl/dataset.hpp"
#include "grczsl/metrics.hpp"
#include "grczsl/replay.hpp"
#include "grczsl/residency.hpp"
#include "grczsl/taskstream.hpp"

namespace grczsl {

// Task stream for the configured setting, honoring recipe overrides.
TaskStream build_stream(const ExperimentConfig& config, const DatasetBundle& data);

struct TrainOutcome {
  TaskStream stream;
  EvaluationLedger ledger;
  std::vector<LossRecord> losses;
  // Peak residency of full CVAEs / frozen decoders over tasks t ≥ 2.
  residency::Snapshot residency;
};

// Optional per-task observer (called after task t's evaluation record is made).
using TaskObserver = std::function<void(std::size_t task, const TaskRecord& record)>;

// Trains every task in order and records each task's predictions on its
// evaluation pool. Writes the split manifest, CVAE and classifier
// checkpoints, losses.jsonl and ledger.json under config.output_dir.
TrainOutcome train_experiment(const ExperimentConfig& config, const DatasetBundle& data,
                              const TaskObserver& observer = {});

struct RunReport {
  TrainOutcome outcome;
  MetricSummary metrics;
};

// train_experiment + evaluation + emit_report. Pure function of
// (dataset files, config): reruns produce byte-identical reports.
RunReport run_experiment(const ExperimentConfig& config);
RunReport run_experiment(const ExperimentConfig& config, const DatasetBundle& data);

struct SweepEntry {
  double alpha = 0.0;
  MetricSummary metrics;
  std::filesystem::path output_dir;
};

// One full run per alpha in config.sweep_alphas, each into
// output_dir/alpha_<value>, plus a sweep summary table in output_dir.
std::vector<SweepEntry> sweep_alpha(const ExperimentConfig& config);

// Creates `dir` if needed and proves it is writable; IoError otherwise.
void ensure_writable_directory(const std::filesystem::path& dir);

// Report files written by emit_report.
inline constexpr const char* kReportTable = "report.txt";
inline constexpr const char* kCurvesFile = "curves.tsv";
inline constexpr const char* kMetricsRecord = "metrics.jsonl";
inline constexpr const char* kResolvedConfig = "config.resolved.json";
inline constexpr const char* kLedgerFile = "ledger.json";
inline constexpr const char* kManifestFile = "split_manifest.json";
inline constexpr const char* kLossFile = "losses.jsonl";

// Writes (a) the aggregate table, (b) per-task curve columns, (c) the
// line-delimited metrics record and (d) the resolved-config echo.
void emit_report(const EvaluationLedger& ledger, const MetricSummary& metrics, const ExperimentConfig& config,
                 const std::filesystem::path& dir);

std::string format_report_table(const EvaluationLedger& ledger, const MetricSummary& metrics,
                                const ExperimentConfig& config);

}  // namespace grczsl
