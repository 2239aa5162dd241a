#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grczsl/grczsl.h"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(grczsl_status s) {
  switch (s) {
    case GRCZSL_OK: return kExitOk;
    case GRCZSL_ERR_CONFIG:
    case GRCZSL_ERR_ARGUMENT: return kExitConfig;
    case GRCZSL_ERR_DATA:
    case GRCZSL_ERR_IO:
    case GRCZSL_ERR_DIMENSION:
    case GRCZSL_ERR_EVALUATION: return kExitData;
    case GRCZSL_ERR_NUMERIC: return kExitNumeric;
    default: return kExitFailure;
  }
}

struct CliError {
  int code;
  std::string message;
};

void check(grczsl_status s, const std::string& context) {
  if (s != GRCZSL_OK) throw CliError{exit_code(s), context + ": " + grczsl_last_error()};
}

// Flags mirroring ExperimentConfig fields; unset flags leave the config alone.
struct ConfigFlags {
  std::string config_path;
  std::string dataset_path;
  std::string dataset_name;
  std::string setting;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::optional<std::size_t> threads;
  std::optional<double> alpha;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> replay_batch_size;
  std::optional<std::size_t> samples_per_class;
  std::optional<double> learning_rate;
  bool exclude_replay = false;
  std::optional<std::size_t> classifier_hidden;
  std::optional<std::size_t> classifier_epochs;
  std::optional<double> classifier_lr;
  std::optional<double> weight_decay;
  std::optional<std::size_t> classifier_samples;
  std::optional<std::size_t> latent_dim;
  std::optional<std::size_t> encoder_hidden;
  std::optional<std::size_t> decoder_hidden;
  bool normalize_attributes = false;
  bool normalize_features = false;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON config file");
    app->add_option("--dataset", dataset_path, "dataset directory (features.bin + classes.json)");
    app->add_option("--dataset-name", dataset_name, "name used for split recipes and defaults");
    app->add_option("--setting", setting, "fixed or dynamic");
    app->add_option("--seed", seed, "global seed");
    app->add_option("-o,--output-dir", output_dir, "output directory");
    app->add_option("--threads", threads, "worker threads for evaluation");
    app->add_option("--alpha", alpha, "weight of the current task's loss");
    app->add_option("--epochs", epochs, "CVAE epochs per task");
    app->add_option("--batch-size", batch_size, "CVAE batch size");
    app->add_option("--replay-batch-size", replay_batch_size, "replay batch size");
    app->add_option("--samples-per-class", samples_per_class, "replayed samples per past seen class");
    app->add_option("--lr", learning_rate, "CVAE learning rate");
    app->add_flag("--exclude-replay", exclude_replay, "sequential baseline: no replay term");
    app->add_option("--classifier-hidden", classifier_hidden, "classifier hidden width");
    app->add_option("--classifier-epochs", classifier_epochs, "classifier epochs");
    app->add_option("--classifier-lr", classifier_lr, "classifier learning rate");
    app->add_option("--weight-decay", weight_decay, "classifier weight decay");
    app->add_option("--classifier-samples", classifier_samples, "synthetic samples per class for the classifier");
    app->add_option("--latent-dim", latent_dim, "latent dimension");
    app->add_option("--encoder-hidden", encoder_hidden, "encoder hidden width");
    app->add_option("--decoder-hidden", decoder_hidden, "decoder hidden width");
    app->add_flag("--normalize-attributes", normalize_attributes, "L2-normalize class attribute rows");
    app->add_flag("--normalize-features", normalize_features, "L2-normalize feature rows");
    app->add_option("--set", overrides, "dotted key=value override, e.g. train.alpha=0.3");
  }

  grczsl_config* resolve() const {
    nlohmann::json base = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw CliError{kExitConfig, "cannot open config " + config_path};
      try {
        is >> base;
      } catch (const nlohmann::json::exception& e) {
        throw CliError{kExitConfig, config_path + ": " + e.what()};
      }
    }
    // Dataset identity and setting select the defaults, so they go in
    // before resolution; everything else is an override on top.
    if (!dataset_path.empty()) base["dataset"]["path"] = dataset_path;
    if (!dataset_name.empty()) base["dataset"]["name"] = dataset_name;
    if (!setting.empty()) base["setting"] = setting;

    grczsl_config* cfg = nullptr;
    check(grczsl_config_from_json(base.dump().c_str(), &cfg), "config");
    try {
      auto set = [&](const std::string& key, const std::string& value) {
        check(grczsl_config_set(cfg, key.c_str(), value.c_str()), "config " + key);
      };
      auto num = [](auto v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
      };
      if (seed) set("seed", num(*seed));
      if (!output_dir.empty()) set("output_dir", nlohmann::json(output_dir).dump());
      if (threads) set("threads", num(*threads));
      if (alpha) set("train.alpha", num(*alpha));
      if (epochs) set("train.epochs", num(*epochs));
      if (batch_size) set("train.batch_size", num(*batch_size));
      if (replay_batch_size) set("train.replay_batch_size", num(*replay_batch_size));
      if (samples_per_class) set("train.samples_per_seen_class", num(*samples_per_class));
      if (learning_rate) set("train.learning_rate", num(*learning_rate));
      if (exclude_replay) set("train.exclude_replay", "true");
      if (classifier_hidden) set("classifier.hidden", num(*classifier_hidden));
      if (classifier_epochs) set("classifier.epochs", num(*classifier_epochs));
      if (classifier_lr) set("classifier.learning_rate", num(*classifier_lr));
      if (weight_decay) set("classifier.weight_decay", num(*weight_decay));
      if (classifier_samples) set("classifier.samples_per_class", num(*classifier_samples));
      if (latent_dim) set("arch.latent_dim", num(*latent_dim));
      if (encoder_hidden) set("arch.encoder_hidden", num(*encoder_hidden));
      if (decoder_hidden) set("arch.decoder_hidden", num(*decoder_hidden));
      if (normalize_attributes) set("dataset.normalize_attributes", "true");
      if (normalize_features) set("dataset.normalize_features", "true");
      for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw CliError{kExitConfig, "--set expects key=value, got '" + kv + "'"};
        set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      check(grczsl_config_apply_environment(cfg), "environment");
    } catch (...) {
      grczsl_config_free(cfg);
      throw;
    }
    return cfg;
  }
};

struct ConfigHandle {
  grczsl_config* ptr;
  ~ConfigHandle() { grczsl_config_free(ptr); }
};

void print_metrics(const grczsl_metrics& m) {
  std::printf("tasks %zu  mSA %.2f (1..%zu)  mUA %.2f (1..%zu)  mH %.2f (1..%zu)\n", m.tasks, 100.0 * m.mean_seen,
              m.seen_last_task, 100.0 * m.mean_unseen, m.unseen_last_task, 100.0 * m.mean_h, m.unseen_last_task);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative replay continual zero-shot learning"};
  app.require_subcommand(1);

  ConfigFlags split_flags, train_flags, run_flags, sweep_flags, eval_flags;
  std::string manifest_path;
  auto* split = app.add_subcommand("split", "write the task split manifest");
  split_flags.attach(split);
  split->add_option("--manifest", manifest_path, "manifest path (default: <output-dir>/split_manifest.json)");

  auto* train = app.add_subcommand("train", "train all tasks and write checkpoints and the ledger");
  train_flags.attach(train);

  std::string ledger_path, eval_out;
  auto* eval = app.add_subcommand("eval", "score a ledger and write the report files");
  eval_flags.attach(eval);
  eval->add_option("--ledger", ledger_path, "ledger file (default: <output-dir>/ledger.json)");

  auto* run = app.add_subcommand("run", "train, evaluate and report end to end");
  run_flags.attach(run);

  auto* sweep = app.add_subcommand("sweep-alpha", "one full run per alpha value");
  sweep_flags.attach(sweep);

  grczsl_synthetic_spec spec;
  grczsl_synthetic_spec_init(&spec);
  std::string synth_name = "synthetic", synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic Gaussian-cluster dataset");
  synth->add_option("-o,--output", synth_out, "dataset directory")->required();
  synth->add_option("--name", synth_name, "dataset name");
  synth->add_option("--seen", spec.seen_classes, "seen classes");
  synth->add_option("--unseen", spec.unseen_classes, "unseen classes");
  synth->add_option("--feature-dim", spec.feature_dim, "feature dimension");
  synth->add_option("--attribute-dim", spec.attribute_dim, "attribute dimension");
  synth->add_option("--samples", spec.samples_per_class, "samples per class");
  synth->add_option("--attribute-weight", spec.attribute_weight, "scale of the attribute-driven centroid part");
  synth->add_option("--private-weight", spec.private_weight, "scale of the class-private centroid part");
  synth->add_option("--noise", spec.noise, "per-coordinate noise");
  synth->add_option("--seed", spec.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*split) {
      ConfigHandle cfg{split_flags.resolve()};
      std::size_t tasks = 0;
      check(grczsl_split(cfg.ptr, manifest_path.empty() ? nullptr : manifest_path.c_str(), &tasks), "split");
      std::printf("wrote %zu tasks\n", tasks);
    } else if (*train) {
      ConfigHandle cfg{train_flags.resolve()};
      check(grczsl_train(cfg.ptr), "train");
    } else if (*eval) {
      ConfigHandle cfg{eval_flags.resolve()};
      char* text = nullptr;
      check(grczsl_config_to_json(cfg.ptr, &text), "config");
      const auto resolved = nlohmann::json::parse(text);
      grczsl_string_free(text);
      const std::string out = resolved.at("output_dir").get<std::string>();
      const std::string ledger = ledger_path.empty() ? out + "/ledger.json" : ledger_path;
      grczsl_metrics m{};
      check(grczsl_evaluate_ledger(ledger.c_str(), cfg.ptr, out.c_str(), &m), "eval");
      print_metrics(m);
    } else if (*run) {
      ConfigHandle cfg{run_flags.resolve()};
      grczsl_metrics m{};
      check(grczsl_run(cfg.ptr, &m), "run");
      print_metrics(m);
    } else if (*sweep) {
      ConfigHandle cfg{sweep_flags.resolve()};
      std::vector<grczsl_metrics> results(64);
      std::vector<double> alphas(64);
      std::size_t count = 0;
      check(grczsl_sweep_alpha(cfg.ptr, results.data(), alphas.data(), results.size(), &count), "sweep-alpha");
      for (std::size_t i = 0; i < count && i < results.size(); ++i) {
        std::printf("alpha %.2f  ", alphas[i]);
        print_metrics(results[i]);
      }
    } else if (*synth) {
      spec.name = synth_name.c_str();
      check(grczsl_make_synthetic(&spec, synth_out.c_str()), "synth");
      std::printf("wrote %s\n", synth_out.c_str());
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "grczsl: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "grczsl: %s\n", e.what());
    return kExitFailure;
  }
  return kExitOk;
}
