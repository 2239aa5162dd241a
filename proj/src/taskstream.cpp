#include "grczsl/taskstream.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "grczsl/errors.hpp"
#include "grczsl/rng.hpp"

namespace grczsl {

std::string to_string(SettingKind kind) { return kind == SettingKind::Fixed ? "fixed" : "dynamic"; }

SettingKind parse_setting(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "fixed") return SettingKind::Fixed;
  if (lower == "dynamic") return SettingKind::Dynamic;
  throw ConfigError("unknown setting '" + text + "' (expected fixed or dynamic)");
}

std::optional<std::string> canonical_dataset_name(const std::string& name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "CUB") return "CUB";
  if (upper == "APY") return "aPY";
  if (upper == "AWA1") return "AWA1";
  if (upper == "AWA2") return "AWA2";
  if (upper == "SUN") return "SUN";
  return std::nullopt;
}

std::optional<StandardSplitShape> standard_split_shape(const std::string& name) {
  auto canon = canonical_dataset_name(name);
  if (!canon) return std::nullopt;
  if (*canon == "CUB") return StandardSplitShape{312, 150, 50, 200};
  if (*canon == "aPY") return StandardSplitShape{64, 20, 12, 32};
  if (*canon == "AWA1" || *canon == "AWA2") return StandardSplitShape{85, 40, 10, 50};
  return StandardSplitShape{102, 645, 72, 717};
}

void validate_meta(const DatasetMeta& meta) {
  if (meta.total_classes == 0) throw DataError(meta.name + ": dataset has no classes");
  if (meta.class_samples.size() != meta.total_classes) {
    throw DataError(meta.name + ": per-class sample table has " + std::to_string(meta.class_samples.size()) +
                    " entries for " + std::to_string(meta.total_classes) + " classes");
  }
  std::vector<int> status(meta.total_classes, 0);
  for (std::size_t c : meta.seen_classes) {
    if (c >= meta.total_classes) throw DataError(meta.name + ": seen class id " + std::to_string(c) + " out of range");
    if (status[c] != 0) throw DataError(meta.name + ": class " + std::to_string(c) + " listed twice");
    status[c] = 1;
  }
  for (std::size_t c : meta.unseen_classes) {
    if (c >= meta.total_classes) {
      throw DataError(meta.name + ": unseen class id " + std::to_string(c) + " out of range");
    }
    if (status[c] != 0) throw DataError(meta.name + ": class " + std::to_string(c) + " is both seen and unseen");
    status[c] = 2;
  }
  if (auto shape = standard_split_shape(meta.name)) {
    if (meta.attribute_dim != shape->attribute_dim || meta.seen_classes.size() != shape->seen ||
        meta.unseen_classes.size() != shape->unseen || meta.total_classes != shape->total) {
      throw DataError(meta.name + ": class counts do not match the standard split (attribute dim " +
                      std::to_string(shape->attribute_dim) + ", " + std::to_string(shape->seen) + " seen, " +
                      std::to_string(shape->unseen) + " unseen, " + std::to_string(shape->total) + " total)");
    }
  }
}

std::optional<FixedRecipe> fixed_recipe_for(const std::string& dataset) {
  auto canon = canonical_dataset_name(dataset);
  if (!canon) return std::nullopt;
  if (*canon == "CUB") return FixedRecipe{std::vector<std::size_t>(20, 10)};
  if (*canon == "aPY") return FixedRecipe{std::vector<std::size_t>(8, 4)};
  if (*canon == "AWA1" || *canon == "AWA2") return FixedRecipe{std::vector<std::size_t>(10, 5)};
  FixedRecipe sun{std::vector<std::size_t>(15, 48)};
  for (std::size_t t = 0; t < 3; ++t) sun.classes_per_task[t] = 47;
  return sun;
}

std::optional<DynamicRecipe> dynamic_recipe_for(const std::string& dataset) {
  auto canon = canonical_dataset_name(dataset);
  if (!canon) return std::nullopt;
  DynamicRecipe r;
  auto push = [&r](std::size_t count, std::size_t seen, std::size_t unseen) {
    for (std::size_t i = 0; i < count; ++i) r.steps.push_back({seen, unseen});
  };
  if (*canon == "CUB") {
    push(10, 7, 3);
    push(10, 8, 2);
  } else if (*canon == "aPY") {
    push(4, 2, 2);
    push(4, 3, 1);
  } else if (*canon == "AWA1" || *canon == "AWA2") {
    push(10, 4, 1);
  } else {
    push(3, 43, 4);
    push(12, 43, 5);
  }
  return r;
}

const TaskData& TaskStream::task(std::size_t t) const {
  if (t == 0 || t > tasks.size()) {
    throw IndexError("task index " + std::to_string(t) + " out of range 1.." + std::to_string(tasks.size()));
  }
  return tasks[t - 1];
}

std::uint64_t class_partition_seed(std::uint64_t seed, std::size_t class_id) {
  return derive_seed(seed, {tag(SeedPurpose::Partition), class_id});
}

Partition partition_train_test(std::span<const std::size_t> class_samples, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie in (0, 1), got " + std::to_string(test_fraction));
  }
  const std::size_t n = class_samples.size();
  if (n < 2) throw DataError("class has " + std::to_string(n) + " samples; at least 2 are needed to split");
  std::size_t n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n) + 0.5));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> order(class_samples.begin(), class_samples.end());
  std::sort(order.begin(), order.end());
  Rng rng(seed);
  rng.shuffle(order);
  Partition p;
  p.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  p.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(p.test.begin(), p.test.end());
  std::sort(p.train.begin(), p.train.end());
  return p;
}

namespace {

std::vector<std::size_t> ordered(std::vector<std::size_t> classes, const SplitOptions& options, std::uint64_t salt) {
  if (options.class_order_seed) {
    Rng rng(derive_seed(*options.class_order_seed, {tag(SeedPurpose::ClassOrder), salt}));
    rng.shuffle(classes);
  }
  return classes;
}

void append_split(const DatasetMeta& meta, std::size_t cls, std::uint64_t seed, double fraction,
                  std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  try {
    Partition p = partition_train_test(meta.class_samples[cls], fraction, class_partition_seed(seed, cls));
    train.insert(train.end(), p.train.begin(), p.train.end());
    test.insert(test.end(), p.test.begin(), p.test.end());
  } catch (const DataError& e) {
    throw DataError(meta.name + ": class " + std::to_string(cls) + ": " + e.what());
  }
}

std::vector<std::size_t> sorted_union(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

}  // namespace

TaskStream split_fixed(const DatasetMeta& meta, std::uint64_t seed, const FixedRecipe& recipe,
                       const SplitOptions& options) {
  validate_meta(meta);
  if (recipe.classes_per_task.empty()) throw ConfigError("fixed recipe has no tasks");
  const std::size_t sum = std::accumulate(recipe.classes_per_task.begin(), recipe.classes_per_task.end(), std::size_t{0});
  if (sum != meta.total_classes) {
    throw ConfigError("fixed recipe assigns " + std::to_string(sum) + " classes but " + meta.name + " has " +
                      std::to_string(meta.total_classes));
  }
  if (std::find(recipe.classes_per_task.begin(), recipe.classes_per_task.end(), 0u) != recipe.classes_per_task.end()) {
    throw ConfigError("fixed recipe contains an empty task");
  }
  std::vector<std::size_t> all(meta.total_classes);
  std::iota(all.begin(), all.end(), 0);
  all = ordered(std::move(all), options, 0);

  TaskStream stream;
  stream.setting = SettingKind::Fixed;
  stream.dataset = meta.name;
  stream.seed = seed;
  std::size_t cursor = 0;
  for (std::size_t t = 0; t < recipe.classes_per_task.size(); ++t) {
    TaskData task;
    task.index = t + 1;
    task.train_classes.assign(all.begin() + static_cast<std::ptrdiff_t>(cursor),
                              all.begin() + static_cast<std::ptrdiff_t>(cursor + recipe.classes_per_task[t]));
    cursor += recipe.classes_per_task[t];
    for (std::size_t c : task.train_classes) append_split(meta, c, seed, options.test_fraction, task.train_indices, task.test_indices);
    std::sort(task.train_indices.begin(), task.train_indices.end());
    std::sort(task.test_indices.begin(), task.test_indices.end());
    task.seen_at_t.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cursor));
    task.unseen_at_t.assign(all.begin() + static_cast<std::ptrdiff_t>(cursor), all.end());
    std::sort(task.seen_at_t.begin(), task.seen_at_t.end());
    std::sort(task.unseen_at_t.begin(), task.unseen_at_t.end());
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream split_fixed(const DatasetMeta& meta, std::uint64_t seed, const SplitOptions& options) {
  auto recipe = fixed_recipe_for(meta.name);
  if (!recipe) throw ConfigError("no built-in fixed recipe for dataset '" + meta.name + "'; supply one explicitly");
  return split_fixed(meta, seed, *recipe, options);
}

TaskStream split_dynamic(const DatasetMeta& meta, std::uint64_t seed, const DynamicRecipe& recipe,
                         const SplitOptions& options) {
  validate_meta(meta);
  if (recipe.steps.empty()) throw ConfigError("dynamic recipe has no tasks");
  std::size_t seen_sum = 0, unseen_sum = 0;
  for (const auto& s : recipe.steps) {
    if (s.seen == 0) throw ConfigError("dynamic recipe step without seen classes");
    seen_sum += s.seen;
    unseen_sum += s.unseen;
  }
  if (seen_sum != meta.seen_classes.size() || unseen_sum != meta.unseen_classes.size()) {
    throw ConfigError("dynamic recipe assigns " + std::to_string(seen_sum) + " seen / " + std::to_string(unseen_sum) +
                      " unseen classes but " + meta.name + " has " + std::to_string(meta.seen_classes.size()) +
                      " / " + std::to_string(meta.unseen_classes.size()));
  }
  const std::vector<std::size_t> seen = ordered(meta.seen_classes, options, 1);
  const std::vector<std::size_t> unseen = ordered(meta.unseen_classes, options, 2);

  TaskStream stream;
  stream.setting = SettingKind::Dynamic;
  stream.dataset = meta.name;
  stream.seed = seed;
  std::size_t seen_cursor = 0, unseen_cursor = 0;
  std::vector<std::size_t> seen_so_far, unseen_so_far;
  for (std::size_t t = 0; t < recipe.steps.size(); ++t) {
    const auto& step = recipe.steps[t];
    TaskData task;
    task.index = t + 1;
    task.train_classes.assign(seen.begin() + static_cast<std::ptrdiff_t>(seen_cursor),
                              seen.begin() + static_cast<std::ptrdiff_t>(seen_cursor + step.seen));
    task.unseen_introduced.assign(unseen.begin() + static_cast<std::ptrdiff_t>(unseen_cursor),
                                  unseen.begin() + static_cast<std::ptrdiff_t>(unseen_cursor + step.unseen));
    seen_cursor += step.seen;
    unseen_cursor += step.unseen;
    for (std::size_t c : task.train_classes) append_split(meta, c, seed, options.test_fraction, task.train_indices, task.test_indices);
    for (std::size_t c : task.unseen_introduced) {
      task.test_indices.insert(task.test_indices.end(), meta.class_samples[c].begin(), meta.class_samples[c].end());
    }
    std::sort(task.train_indices.begin(), task.train_indices.end());
    std::sort(task.test_indices.begin(), task.test_indices.end());
    seen_so_far = sorted_union(std::move(seen_so_far), task.train_classes);
    unseen_so_far = sorted_union(std::move(unseen_so_far), task.unseen_introduced);
    task.seen_at_t = seen_so_far;
    task.unseen_at_t = unseen_so_far;
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream split_dynamic(const DatasetMeta& meta, std::uint64_t seed, const SplitOptions& options) {
  auto recipe = dynamic_recipe_for(meta.name);
  if (!recipe) throw ConfigError("no built-in dynamic recipe for dataset '" + meta.name + "'; supply one explicitly");
  return split_dynamic(meta, seed, *recipe, options);
}

std::vector<std::size_t> evaluation_pool(const TaskStream& stream, std::size_t t) {
  stream.task(t);
  const std::size_t last = stream.setting == SettingKind::Fixed ? stream.size() : t;
  std::vector<std::size_t> pool;
  for (std::size_t k = 0; k < last; ++k) {
    pool.insert(pool.end(), stream.tasks[k].test_indices.begin(), stream.tasks[k].test_indices.end());
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::size_t> classifier_scope(const TaskStream& stream, std::size_t t) {
  const TaskData& task = stream.task(t);
  return sorted_union(task.seen_at_t, task.unseen_at_t);
}

std::vector<std::size_t> replay_classes(const TaskStream& stream, std::size_t t) {
  stream.task(t);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k + 1 < t; ++k) out = sorted_union(std::move(out), stream.tasks[k].train_classes);
  return out;
}

std::vector<std::size_t> standard_gzsl_test_pool(const DatasetMeta& meta, std::uint64_t seed, double test_fraction) {
  validate_meta(meta);
  std::vector<std::size_t> pool, unused;
  for (std::size_t c : meta.seen_classes) append_split(meta, c, seed, test_fraction, unused, pool);
  for (std::size_t c : meta.unseen_classes) {
    pool.insert(pool.end(), meta.class_samples[c].begin(), meta.class_samples[c].end());
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

nlohmann::json stream_to_json(const TaskStream& stream) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const TaskData& t : stream.tasks) {
    tasks.push_back({{"task", t.index},
                     {"train_classes", t.train_classes},
                     {"unseen_introduced", t.unseen_introduced},
                     {"seen_at_t", t.seen_at_t},
                     {"unseen_at_t", t.unseen_at_t},
                     {"n_train", t.n_train()},
                     {"n_test", t.n_test()},
                     {"train_indices", t.train_indices},
                     {"test_indices", t.test_indices}});
  }
  return {{"format", "grczsl-split-manifest"},
          {"version", 1},
          {"setting", to_string(stream.setting)},
          {"dataset", stream.dataset},
          {"seed", stream.seed},
          {"tasks", tasks}};
}

TaskStream stream_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "grczsl-split-manifest") throw DataError("not a split manifest");
    TaskStream s;
    s.setting = parse_setting(j.at("setting").get<std::string>());
    s.dataset = j.at("dataset").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jt : j.at("tasks")) {
      TaskData t;
      t.index = jt.at("task").get<std::size_t>();
      t.train_classes = jt.at("train_classes").get<std::vector<std::size_t>>();
      t.unseen_introduced = jt.at("unseen_introduced").get<std::vector<std::size_t>>();
      t.seen_at_t = jt.at("seen_at_t").get<std::vector<std::size_t>>();
      t.unseen_at_t = jt.at("unseen_at_t").get<std::vector<std::size_t>>();
      t.train_indices = jt.at("train_indices").get<std::vector<std::size_t>>();
      t.test_indices = jt.at("test_indices").get<std::vector<std::size_t>>();
      if (t.index != s.tasks.size() + 1) throw DataError("manifest tasks out of order at task " + std::to_string(t.index));
      s.tasks.push_back(std::move(t));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const TaskStream& stream) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write split manifest: " + path.string());
  os << stream_to_json(stream).dump(1) << '\n';
  if (!os) throw IoError("failed writing split manifest: " + path.string());
}

TaskStream read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open split manifest: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return stream_from_json(j);
}

}  // namespace grczsl
