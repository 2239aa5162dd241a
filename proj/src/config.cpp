#include "grczsl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "grczsl/errors.hpp"

namespace grczsl {

namespace {

struct DatasetDefaults {
  std::size_t samples_fixed;
  std::size_t samples_dynamic;
  std::size_t replay_batch_fixed;
  std::size_t replay_batch_dynamic;
  std::size_t classifier_hidden;
  std::size_t classifier_epochs;
};

// Per-dataset rows of the published hyperparameter tables (fixed / dynamic).
DatasetDefaults defaults_for(const std::string& name) {
  const auto canon = canonical_dataset_name(name).value_or("CUB");
  if (canon == "aPY") return {125, 125, 15, 15, 1024, 30};
  if (canon == "AWA1") return {200, 200, 20, 800, 1024, 30};
  if (canon == "AWA2") return {200, 250, 50, 20, 1024, 30};
  if (canon == "SUN") return {50, 50, 100, 100, 512, 25};
  return {50, 50, 100, 100, 1024, 10};
}

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& into, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

std::string sidecar_name(const std::filesystem::path& dataset_path) {
  std::ifstream is(dataset_path / "classes.json");
  if (!is) return {};
  try {
    nlohmann::json j;
    is >> j;
    return j.value("name", std::string{});
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  classifier.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (arch.encoder_hidden == 0 || arch.decoder_hidden == 0 || arch.latent_dim == 0) {
    throw ConfigError("architecture widths must be positive");
  }
  if (!(arch.dropout_rate >= 0.0 && arch.dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  for (double a : sweep_alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep alpha " + std::to_string(a) + " outside [0, 1]");
  }
}

ExperimentConfig default_config(const std::string& dataset_name, SettingKind setting) {
  const DatasetDefaults d = defaults_for(dataset_name);
  const bool fixed = setting == SettingKind::Fixed;
  ExperimentConfig c;
  c.dataset_name = dataset_name;
  c.setting = setting;
  c.train.alpha = 0.5;
  c.train.epochs = 25;
  c.train.batch_size = 50;
  c.train.learning_rate = 1e-3;
  c.train.samples_per_seen_class = fixed ? d.samples_fixed : d.samples_dynamic;
  c.train.replay_batch_size = fixed ? d.replay_batch_fixed : d.replay_batch_dynamic;
  c.classifier.hidden = d.classifier_hidden;
  c.classifier.learning_rate = 1e-4;
  c.classifier.weight_decay = 1e-3;
  c.classifier.batch_size = 100;
  c.classifier.epochs = d.classifier_epochs;
  c.classifier.samples_per_class = c.train.samples_per_seen_class;
  return c;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"dataset", "setting", "seed", "output_dir", "threads", "arch", "train", "classifier", "sweep_alphas"}, "");
  const nlohmann::json empty = nlohmann::json::object();
  const nlohmann::json& jd = j.contains("dataset") ? j.at("dataset") : empty;
  reject_unknown(jd, {"path", "name", "normalize_attributes", "normalize_features", "test_fraction", "class_order_seed",
                      "fixed_recipe", "dynamic_recipe"},
                 "dataset");

  std::string setting_text = "fixed";
  read(j, "setting", setting_text, "");
  const SettingKind setting = parse_setting(setting_text);
  std::string path, name;
  read(jd, "path", path, "dataset");
  read(jd, "name", name, "dataset");
  const std::string defaults_key = name.empty() && !path.empty() ? sidecar_name(path) : name;

  ExperimentConfig c = default_config(defaults_key, setting);
  c.dataset_name = name;
  c.dataset_path = path;
  read(jd, "normalize_attributes", c.normalize_attributes, "dataset");
  read(jd, "normalize_features", c.normalize_features, "dataset");
  read(jd, "test_fraction", c.test_fraction, "dataset");
  if (jd.contains("class_order_seed") && !jd.at("class_order_seed").is_null()) {
    std::uint64_t s = 0;
    read(jd, "class_order_seed", s, "dataset");
    c.class_order_seed = s;
  }
  if (jd.contains("fixed_recipe") && !jd.at("fixed_recipe").is_null()) {
    FixedRecipe r;
    read(jd, "fixed_recipe", r.classes_per_task, "dataset");
    c.fixed_recipe = r;
  }
  if (jd.contains("dynamic_recipe") && !jd.at("dynamic_recipe").is_null()) {
    std::vector<std::vector<std::size_t>> steps;
    read(jd, "dynamic_recipe", steps, "dataset");
    DynamicRecipe r;
    for (const auto& s : steps) {
      if (s.size() != 2) throw ConfigError("dataset.dynamic_recipe entries must be [seen, unseen] pairs");
      r.steps.push_back({s[0], s[1]});
    }
    c.dynamic_recipe = r;
  }

  read(j, "seed", c.seed, "");
  std::string out = c.output_dir.string();
  read(j, "output_dir", out, "");
  c.output_dir = out;
  read(j, "threads", c.threads, "");
  read(j, "sweep_alphas", c.sweep_alphas, "");

  if (j.contains("arch")) {
    const auto& ja = j.at("arch");
    reject_unknown(ja, {"encoder_hidden", "decoder_hidden", "latent_dim", "dropout_rate"}, "arch");
    read(ja, "encoder_hidden", c.arch.encoder_hidden, "arch");
    read(ja, "decoder_hidden", c.arch.decoder_hidden, "arch");
    read(ja, "latent_dim", c.arch.latent_dim, "arch");
    read(ja, "dropout_rate", c.arch.dropout_rate, "arch");
  }
  if (j.contains("train")) {
    const auto& jt = j.at("train");
    reject_unknown(jt, {"alpha", "epochs", "batch_size", "replay_batch_size", "samples_per_seen_class", "learning_rate",
                        "kl_weight", "exclude_replay"},
                   "train");
    read(jt, "alpha", c.train.alpha, "train");
    read(jt, "epochs", c.train.epochs, "train");
    read(jt, "batch_size", c.train.batch_size, "train");
    read(jt, "replay_batch_size", c.train.replay_batch_size, "train");
    read(jt, "samples_per_seen_class", c.train.samples_per_seen_class, "train");
    read(jt, "learning_rate", c.train.learning_rate, "train");
    read(jt, "kl_weight", c.train.kl_weight, "train");
    read(jt, "exclude_replay", c.train.exclude_replay, "train");
  }
  c.classifier.samples_per_class = c.train.samples_per_seen_class;
  if (j.contains("classifier")) {
    const auto& jc = j.at("classifier");
    reject_unknown(jc, {"hidden", "learning_rate", "weight_decay", "batch_size", "epochs", "samples_per_class"}, "classifier");
    read(jc, "hidden", c.classifier.hidden, "classifier");
    read(jc, "learning_rate", c.classifier.learning_rate, "classifier");
    read(jc, "weight_decay", c.classifier.weight_decay, "classifier");
    read(jc, "batch_size", c.classifier.batch_size, "classifier");
    read(jc, "epochs", c.classifier.epochs, "classifier");
    read(jc, "samples_per_class", c.classifier.samples_per_class, "classifier");
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json dataset = {{"path", c.dataset_path.string()},
                            {"name", c.dataset_name},
                            {"normalize_attributes", c.normalize_attributes},
                            {"normalize_features", c.normalize_features},
                            {"test_fraction", c.test_fraction},
                            {"class_order_seed", nullptr},
                            {"fixed_recipe", nullptr},
                            {"dynamic_recipe", nullptr}};
  if (c.class_order_seed) dataset["class_order_seed"] = *c.class_order_seed;
  if (c.fixed_recipe) dataset["fixed_recipe"] = c.fixed_recipe->classes_per_task;
  if (c.dynamic_recipe) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : c.dynamic_recipe->steps) steps.push_back({s.seen, s.unseen});
    dataset["dynamic_recipe"] = steps;
  }
  return {{"dataset", dataset},
          {"setting", to_string(c.setting)},
          {"seed", c.seed},
          {"output_dir", c.output_dir.string()},
          {"threads", c.threads},
          {"sweep_alphas", c.sweep_alphas},
          {"arch",
           {{"encoder_hidden", c.arch.encoder_hidden},
            {"decoder_hidden", c.arch.decoder_hidden},
            {"latent_dim", c.arch.latent_dim},
            {"dropout_rate", c.arch.dropout_rate}}},
          {"train",
           {{"alpha", c.train.alpha},
            {"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"replay_batch_size", c.train.replay_batch_size},
            {"samples_per_seen_class", c.train.samples_per_seen_class},
            {"learning_rate", c.train.learning_rate},
            {"kl_weight", c.train.kl_weight},
            {"exclude_replay", c.train.exclude_replay}}},
          {"classifier",
           {{"hidden", c.classifier.hidden},
            {"learning_rate", c.classifier.learning_rate},
            {"weight_decay", c.classifier.weight_decay},
            {"batch_size", c.classifier.batch_size},
            {"epochs", c.classifier.epochs},
            {"samples_per_class", c.classifier.samples_per_class}}}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig with_override(const ExperimentConfig& config, const std::string& key, const std::string& value) {
  nlohmann::json j = config_to_json(config);
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;
  }
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (dot == std::string::npos) {
      if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
      (*node)[part] = parsed;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    start = dot + 1;
  }
  // Re-resolving from scratch would reset per-dataset defaults; explicit
  // values in the echo keep every other field as it was.
  return config_from_json(j);
}

void apply_environment(ExperimentConfig& config) {
  if (const char* out = std::getenv("GRCZSL_OUTPUT_DIR"); out != nullptr && *out != '\0') config.output_dir = out;
  if (const char* threads = std::getenv("GRCZSL_THREADS"); threads != nullptr && *threads != '\0') {
    char* end = nullptr;
    const unsigned long n = std::strtoul(threads, &end, 10);
    if (end == threads || *end != '\0' || n == 0) {
      throw ConfigError(std::string("GRCZSL_THREADS must be a positive integer, got '") + threads + "'");
    }
    config.threads = n;
  }
}

}  // namespace grczsl
