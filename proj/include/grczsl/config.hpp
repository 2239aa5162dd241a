#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "grczsl/classifier.hpp"
#include "grczsl/cvae.hpp"
#include "grczsl/replay.hpp"
#include "grczsl/taskstream.hpp"

namespace grczsl {

struct ExperimentConfig {
  std::filesystem::path dataset_path;
  // Name used for recipes and hyperparameter defaults; empty means "take it
  // from the dataset sidecar".
  std::string dataset_name;
  SettingKind setting = SettingKind::Fixed;
  CvaeArch arch;  // feature/attribute dims are taken from the dataset at run time
  TrainConfig train;
  ClassifierConfig classifier;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "grczsl-out";
  bool normalize_attributes = false;
  bool normalize_features = false;
  double test_fraction = 0.2;
  std::optional<std::uint64_t> class_order_seed;
  std::optional<FixedRecipe> fixed_recipe;
  std::optional<DynamicRecipe> dynamic_recipe;
  std::size_t threads = 1;
  std::vector<double> sweep_alphas = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};

  void validate() const;
};

// Published hyperparameters for (dataset, setting); unknown datasets get the
// CUB column.
ExperimentConfig default_config(const std::string& dataset_name, SettingKind setting);

// Starts from default_config(dataset.name, setting) and overrides every field
// present in `j`. Unknown keys are a ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
// Fully resolved echo; config_from_json(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& config);

ExperimentConfig load_config(const std::filesystem::path& path);
// Dotted-key override, e.g. ("train.alpha", "0.3"); the value is parsed as
// JSON when possible and as a string otherwise.
ExperimentConfig with_override(const ExperimentConfig& config, const std::string& key, const std::string& value);
// GRCZSL_OUTPUT_DIR and GRCZSL_THREADS.
void apply_environment(ExperimentConfig& config);

}  // namespace grczsl
