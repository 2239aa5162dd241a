#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "grczsl/cvae.hpp"
#include "grczsl/matrix.hpp"

namespace grczsl {

struct TrainConfig {
  double alpha = 0.5;  // task importance: weight of the current task's loss
  std::size_t epochs = 25;
  std::size_t batch_size = 50;
  std::size_t replay_batch_size = 100;
  std::size_t samples_per_seen_class = 50;
  double learning_rate = 1e-3;
  double kl_weight = 1.0;
  std::uint64_t seed = 0;
  // No-replay sequential baseline: tasks t ≥ 2 train on real data only.
  bool exclude_replay = false;

  void validate() const;
};

// Synthetic features of previously seen classes, produced by a frozen decoder.
struct ReplaySet {
  Matrix features;
  Matrix attributes;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> source_tasks;

  std::size_t size() const noexcept { return labels.size(); }
};

// Past classes to replay with the task each was first trained in;
// attributes are rows of `class_attributes` indexed by class id.
struct ReplayPlan {
  std::vector<std::size_t> classes;
  std::vector<std::size_t> source_tasks;
};

// samples_per_class rows for every planned class (class order preserved),
// each class drawn from its own seed stream.
ReplaySet synthesize_replay(const Decoder& previous, const ReplayPlan& plan, const Matrix& class_attributes,
                            std::size_t samples_per_class, std::uint64_t seed);
ReplaySet synthesize_replay(const std::filesystem::path& previous_checkpoint, const ReplayPlan& plan,
                            const Matrix& class_attributes, std::size_t samples_per_class, std::uint64_t seed);

// α · real + (1 − α) · replay
double combined_task_loss(double real_loss, double replay_loss, double alpha);

struct LossRecord {
  std::size_t task = 0;
  std::size_t epoch = 0;
  double real_loss = 0.0;
  double replay_loss = 0.0;
  double combined = 0.0;
};

struct TaskTrainResult {
  CvaeParams params;
  std::vector<LossRecord> losses;
  std::size_t steps = 0;
};

// Trains the CVAE for task t.
//   t = 1: `previous` must be empty; fresh weights from `arch`, plain CVAE loss.
//   t ≥ 2: `previous` holds the task t-1 weights this task continues from;
//          `replay` is required unless config.exclude_replay is set.
// Each optimizer step pairs one real batch with one replay batch and follows
// the gradient of combined_task_loss.
TaskTrainResult train_task(std::size_t t, const LabeledBatch& data, std::optional<CvaeParams> previous,
                           const ReplaySet* replay, const CvaeArch& arch, const TrainConfig& config);

// Checkpoint-driven variant: continues from the full CVAE stored at
// `previous_checkpoint` and synthesizes replay from a separately loaded
// frozen copy of its decoder. At most one full CVAE and one frozen decoder
// are resident while it runs.
TaskTrainResult train_task(std::size_t t, const LabeledBatch& data,
                           const std::optional<std::filesystem::path>& previous_checkpoint, const ReplayPlan& plan,
                           const Matrix& class_attributes, const CvaeArch& arch, const TrainConfig& config);

}  // namespace grczsl
