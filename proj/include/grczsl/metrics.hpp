#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "grczsl/taskstream.hpp"

namespace grczsl {

// Predictions made after task t on that task's evaluation pool, with the
// class partition in force at t. All class ids are global.
struct TaskRecord {
  std::size_t task = 0;
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> seen_classes;
  std::vector<std::size_t> unseen_classes;
};

struct EvaluationLedger {
  SettingKind setting = SettingKind::Fixed;
  std::size_t total_tasks = 0;
  std::vector<TaskRecord> records;
};

// Mean over `classes` of per-class recall, counting only samples whose label
// is in `classes`. Throws EvaluationError naming any class with no samples.
double per_class_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                          std::span<const std::size_t> classes);

// 2su / (s + u), 0 when s + u = 0.
double harmonic(double seen, double unseen);

struct TaskScore {
  std::size_t task = 0;
  double seen = 0.0;
  std::optional<double> unseen;  // absent when no unseen class has test data
  std::optional<double> h;
};

struct MetricSummary {
  double mean_seen = 0.0;    // mSA
  double mean_unseen = 0.0;  // mUA
  double mean_h = 0.0;       // mH, the average of per-task H values
  // Task ranges the three means were taken over (inclusive, 1-based).
  std::size_t seen_last_task = 0;
  std::size_t unseen_last_task = 0;
  std::vector<TaskScore> per_task;
};

// Seen/unseen CAcc of one record. Classes without test samples are dropped
// from the respective set before averaging.
TaskScore score_task(const TaskRecord& record);

// mSA over t = 1..T; mUA and mH over t = 1..T-1. Requires T ≥ 2.
MetricSummary evaluate_fixed(const EvaluationLedger& ledger);
// mSA, mUA and mH all over t = 1..T.
MetricSummary evaluate_dynamic(const EvaluationLedger& ledger);
MetricSummary evaluate(const EvaluationLedger& ledger);

nlohmann::json ledger_to_json(const EvaluationLedger& ledger);
EvaluationLedger ledger_from_json(const nlohmann::json& j);
void write_ledger(const std::filesystem::path& path, const EvaluationLedger& ledger);
EvaluationLedger read_ledger(const std::filesystem::path& path);

}  // namespace grczsl
