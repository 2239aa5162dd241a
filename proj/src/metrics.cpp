#include "grczsl/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "grczsl/errors.hpp"

namespace grczsl {

double per_class_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                          std::span<const std::size_t> classes) {
  if (predictions.size() != labels.size()) {
    throw EvaluationError("per_class_accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
  if (classes.empty()) throw EvaluationError("per_class_accuracy: empty class set");
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> counts;  // class -> (correct, total)
  for (std::size_t c : classes) counts.emplace(c, std::pair<std::size_t, std::size_t>{0, 0});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = counts.find(labels[i]);
    if (it == counts.end()) continue;
    it->second.second += 1;
    if (predictions[i] == labels[i]) it->second.first += 1;
  }
  double sum = 0.0;
  for (const auto& [cls, ct] : counts) {
    if (ct.second == 0) throw EvaluationError("class " + std::to_string(cls) + " has no test samples");
    sum += static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  return sum / static_cast<double>(counts.size());
}

double harmonic(double seen, double unseen) {
  const double denom = seen + unseen;
  if (denom == 0.0) return 0.0;
  return 2.0 * seen * unseen / denom;
}

namespace {

std::vector<std::size_t> present_classes(const std::vector<std::size_t>& classes, const std::vector<std::size_t>& labels) {
  std::set<std::size_t> have(labels.begin(), labels.end());
  std::vector<std::size_t> out;
  for (std::size_t c : classes)
    if (have.count(c)) out.push_back(c);
  return out;
}

void check_ledger(const EvaluationLedger& ledger) {
  if (ledger.total_tasks == 0) throw EvaluationError("ledger has no tasks");
  if (ledger.records.size() != ledger.total_tasks) {
    throw EvaluationError("ledger holds " + std::to_string(ledger.records.size()) + " task records but T = " +
                          std::to_string(ledger.total_tasks));
  }
  for (std::size_t i = 0; i < ledger.records.size(); ++i) {
    if (ledger.records[i].task != i + 1) {
      throw EvaluationError("ledger is missing task " + std::to_string(i + 1));
    }
  }
}

}  // namespace

TaskScore score_task(const TaskRecord& record) {
  if (record.predictions.size() != record.labels.size()) {
    throw EvaluationError("task " + std::to_string(record.task) + ": predictions and labels differ in length");
  }
  TaskScore s;
  s.task = record.task;
  const auto seen = present_classes(record.seen_classes, record.labels);
  if (seen.empty()) throw EvaluationError("task " + std::to_string(record.task) + ": no seen class has test samples");
  s.seen = per_class_accuracy(record.predictions, record.labels, seen);
  const auto unseen = present_classes(record.unseen_classes, record.labels);
  if (!unseen.empty()) {
    s.unseen = per_class_accuracy(record.predictions, record.labels, unseen);
    s.h = harmonic(s.seen, *s.unseen);
  }
  return s;
}

namespace {

MetricSummary summarize(const EvaluationLedger& ledger, std::size_t unseen_last) {
  MetricSummary m;
  m.seen_last_task = ledger.total_tasks;
  m.unseen_last_task = unseen_last;
  double seen_sum = 0.0, unseen_sum = 0.0, h_sum = 0.0;
  for (const TaskRecord& rec : ledger.records) {
    TaskScore s = score_task(rec);
    seen_sum += s.seen;
    if (rec.task <= unseen_last) {
      if (!s.unseen) {
        throw EvaluationError("task " + std::to_string(rec.task) + ": no unseen class has test samples");
      }
      unseen_sum += *s.unseen;
      h_sum += *s.h;
    }
    m.per_task.push_back(s);
  }
  m.mean_seen = seen_sum / static_cast<double>(ledger.total_tasks);
  m.mean_unseen = unseen_sum / static_cast<double>(unseen_last);
  m.mean_h = h_sum / static_cast<double>(unseen_last);
  return m;
}

}  // namespace

MetricSummary evaluate_fixed(const EvaluationLedger& ledger) {
  check_ledger(ledger);
  if (ledger.total_tasks < 2) throw EvaluationError("fixed-setting mUA/mH need at least 2 tasks");
  return summarize(ledger, ledger.total_tasks - 1);
}

MetricSummary evaluate_dynamic(const EvaluationLedger& ledger) {
  check_ledger(ledger);
  return summarize(ledger, ledger.total_tasks);
}

MetricSummary evaluate(const EvaluationLedger& ledger) {
  return ledger.setting == SettingKind::Fixed ? evaluate_fixed(ledger) : evaluate_dynamic(ledger);
}

nlohmann::json ledger_to_json(const EvaluationLedger& ledger) {
  nlohmann::json records = nlohmann::json::array();
  for (const TaskRecord& r : ledger.records) {
    records.push_back({{"task", r.task},
                       {"seen_classes", r.seen_classes},
                       {"unseen_classes", r.unseen_classes},
                       {"labels", r.labels},
                       {"predictions", r.predictions}});
  }
  return {{"format", "grczsl-ledger"},
          {"version", 1},
          {"setting", to_string(ledger.setting)},
          {"total_tasks", ledger.total_tasks},
          {"records", records}};
}

EvaluationLedger ledger_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "grczsl-ledger") throw DataError("not an evaluation ledger");
    EvaluationLedger l;
    l.setting = parse_setting(j.at("setting").get<std::string>());
    l.total_tasks = j.at("total_tasks").get<std::size_t>();
    for (const auto& jr : j.at("records")) {
      TaskRecord r;
      r.task = jr.at("task").get<std::size_t>();
      r.seen_classes = jr.at("seen_classes").get<std::vector<std::size_t>>();
      r.unseen_classes = jr.at("unseen_classes").get<std::vector<std::size_t>>();
      r.labels = jr.at("labels").get<std::vector<std::size_t>>();
      r.predictions = jr.at("predictions").get<std::vector<std::size_t>>();
      l.records.push_back(std::move(r));
    }
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed ledger: ") + e.what());
  }
}

void write_ledger(const std::filesystem::path& path, const EvaluationLedger& ledger) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write ledger: " + path.string());
  os << ledger_to_json(ledger).dump() << '\n';
  if (!os) throw IoError("failed writing ledger: " + path.string());
}

EvaluationLedger read_ledger(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open ledger: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ledger_from_json(j);
}

}  // namespace grczsl
