#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace grczsl {

enum class SettingKind { Fixed, Dynamic };

std::string to_string(SettingKind kind);
SettingKind parse_setting(const std::string& text);

// Class inventory of a dataset. Class ids are 0..total_classes-1 and the
// canonical order of each list is the order classes are assigned to tasks.
struct DatasetMeta {
  std::string name;
  std::size_t attribute_dim = 0;
  std::size_t feature_dim = 0;
  std::size_t total_classes = 0;
  std::vector<std::size_t> seen_classes;
  std::vector<std::size_t> unseen_classes;
  // class_samples[c] = sample row indices belonging to class c.
  std::vector<std::vector<std::size_t>> class_samples;
};

// Standard split sizes of the named benchmarks.
struct StandardSplitShape {
  std::size_t attribute_dim;
  std::size_t seen;
  std::size_t unseen;
  std::size_t total;
};

// Canonical spelling ("CUB", "aPY", "AWA1", "AWA2", "SUN") for a known benchmark name, any case.
std::optional<std::string> canonical_dataset_name(const std::string& name);
std::optional<StandardSplitShape> standard_split_shape(const std::string& name);

// Throws DataError if seen/unseen overlap, ids are out of range, or a named
// benchmark's counts differ from its standard split.
void validate_meta(const DatasetMeta& meta);

struct FixedRecipe {
  std::vector<std::size_t> classes_per_task;
};

struct DynamicRecipe {
  struct Step {
    std::size_t seen;
    std::size_t unseen;
  };
  std::vector<Step> steps;
};

std::optional<FixedRecipe> fixed_recipe_for(const std::string& dataset);
std::optional<DynamicRecipe> dynamic_recipe_for(const std::string& dataset);

struct TaskData {
  std::size_t index = 0;  // 1-based
  // Classes with training samples in this task.
  std::vector<std::size_t> train_classes;
  // Classes revealed as unseen at this task (dynamic setting only).
  std::vector<std::size_t> unseen_introduced;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  // Sorted class sets in force once this task has arrived.
  std::vector<std::size_t> seen_at_t;
  std::vector<std::size_t> unseen_at_t;

  std::size_t n_train() const noexcept { return train_indices.size(); }
  std::size_t n_test() const noexcept { return test_indices.size(); }
};

struct TaskStream {
  SettingKind setting = SettingKind::Fixed;
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<TaskData> tasks;

  std::size_t size() const noexcept { return tasks.size(); }
  const TaskData& task(std::size_t t) const;  // 1-based
};

struct SplitOptions {
  double test_fraction = 0.2;
  // When set, classes are shuffled with this seed before assignment;
  // otherwise canonical order is kept.
  std::optional<std::uint64_t> class_order_seed;
};

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified split of one class's samples: round-half-up(fraction · n) test
// samples, at least one. Both outputs are sorted.
Partition partition_train_test(std::span<const std::size_t> class_samples, double test_fraction, std::uint64_t seed);

// Seed used for class c's partition; shared by every consumer so a class
// splits identically wherever it appears.
std::uint64_t class_partition_seed(std::uint64_t seed, std::size_t class_id);

TaskStream split_fixed(const DatasetMeta& meta, std::uint64_t seed, const FixedRecipe& recipe,
                       const SplitOptions& options = {});
TaskStream split_fixed(const DatasetMeta& meta, std::uint64_t seed, const SplitOptions& options = {});
TaskStream split_dynamic(const DatasetMeta& meta, std::uint64_t seed, const DynamicRecipe& recipe,
                         const SplitOptions& options = {});
TaskStream split_dynamic(const DatasetMeta& meta, std::uint64_t seed, const SplitOptions& options = {});

// Test samples evaluated after task t: every task's test data in the fixed
// setting, tasks ≤ t in the dynamic setting. Sorted.
std::vector<std::size_t> evaluation_pool(const TaskStream& stream, std::size_t t);
// Classes the classifier must recognise after task t: seen_at_t ∪ unseen_at_t.
std::vector<std::size_t> classifier_scope(const TaskStream& stream, std::size_t t);
// Classes with training data in tasks 1..t-1.
std::vector<std::size_t> replay_classes(const TaskStream& stream, std::size_t t);

// Offline generalized-ZSL test pool: held-out seen-class samples plus every
// unseen-class sample, built directly from the standard split.
std::vector<std::size_t> standard_gzsl_test_pool(const DatasetMeta& meta, std::uint64_t seed,
                                                 double test_fraction = 0.2);

nlohmann::json stream_to_json(const TaskStream& stream);
TaskStream stream_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path, const TaskStream& stream);
TaskStream read_manifest(const std::filesystem::path& path);

}  // namespace grczsl
