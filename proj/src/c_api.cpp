#include "grczsl/grczsl.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "grczsl/checkpoint.hpp"
#include "grczsl/config.hpp"
#include "grczsl/dataset.hpp"
#include "grczsl/errors.hpp"
#include "grczsl/experiment.hpp"
#include "json.hpp"

struct grczsl_config {
  grczsl::ExperimentConfig value;
};

struct grczsl_decoder {
  grczsl::FrozenDecoder value;
};

namespace {

thread_local std::string last_error;

grczsl_status status_for(grczsl::ErrorKind kind) {
  switch (kind) {
    case grczsl::ErrorKind::Config: return GRCZSL_ERR_CONFIG;
    case grczsl::ErrorKind::Data: return GRCZSL_ERR_DATA;
    case grczsl::ErrorKind::Numeric: return GRCZSL_ERR_NUMERIC;
    case grczsl::ErrorKind::Io: return GRCZSL_ERR_IO;
    case grczsl::ErrorKind::Dimension: return GRCZSL_ERR_DIMENSION;
    case grczsl::ErrorKind::Index: return GRCZSL_ERR_INDEX;
    case grczsl::ErrorKind::Sequencing: return GRCZSL_ERR_SEQUENCING;
    case grczsl::ErrorKind::Evaluation: return GRCZSL_ERR_EVALUATION;
  }
  return GRCZSL_ERR_INTERNAL;
}

template <class F>
grczsl_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return GRCZSL_OK;
  } catch (const grczsl::Error& e) {
    last_error = e.what();
    return status_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return GRCZSL_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GRCZSL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GRCZSL_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return GRCZSL_ERR_INTERNAL;
  }
}

grczsl_status bad_argument(const char* what) {
  last_error = what;
  return GRCZSL_ERR_ARGUMENT;
}

void fill(grczsl_metrics* out, const grczsl::MetricSummary& m) {
  if (out == nullptr) return;
  out->mean_seen = m.mean_seen;
  out->mean_unseen = m.mean_unseen;
  out->mean_h = m.mean_h;
  out->tasks = m.per_task.size();
  out->seen_last_task = m.seen_last_task;
  out->unseen_last_task = m.unseen_last_task;
}

grczsl::DatasetBundle load_for(const grczsl::ExperimentConfig& c) {
  return grczsl::load_dataset(c.dataset_path, grczsl::LoadOptions{c.normalize_attributes, c.normalize_features});
}

}  // namespace

extern "C" {

const char* grczsl_last_error(void) { return last_error.c_str(); }

const char* grczsl_status_name(grczsl_status status) {
  switch (status) {
    case GRCZSL_OK: return "ok";
    case GRCZSL_ERR_INTERNAL: return "internal error";
    case GRCZSL_ERR_CONFIG: return "config error";
    case GRCZSL_ERR_DATA: return "data error";
    case GRCZSL_ERR_NUMERIC: return "numeric error";
    case GRCZSL_ERR_IO: return "io error";
    case GRCZSL_ERR_DIMENSION: return "dimension error";
    case GRCZSL_ERR_INDEX: return "index error";
    case GRCZSL_ERR_SEQUENCING: return "sequencing error";
    case GRCZSL_ERR_EVALUATION: return "evaluation error";
    case GRCZSL_ERR_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

grczsl_status grczsl_config_from_json(const char* json_text, grczsl_config** out) {
  if (json_text == nullptr || out == nullptr) return bad_argument("grczsl_config_from_json: null argument");
  *out = nullptr;
  return guarded([&] {
    auto cfg = std::make_unique<grczsl_config>();
    cfg->value = grczsl::config_from_json(nlohmann::json::parse(json_text));
    *out = cfg.release();
  });
}

grczsl_status grczsl_config_load(const char* path, grczsl_config** out) {
  if (path == nullptr || out == nullptr) return bad_argument("grczsl_config_load: null argument");
  *out = nullptr;
  return guarded([&] {
    auto cfg = std::make_unique<grczsl_config>();
    cfg->value = grczsl::load_config(path);
    *out = cfg.release();
  });
}

grczsl_status grczsl_config_set(grczsl_config* config, const char* key, const char* value) {
  if (config == nullptr || key == nullptr || value == nullptr) return bad_argument("grczsl_config_set: null argument");
  return guarded([&] { config->value = grczsl::with_override(config->value, key, value); });
}

grczsl_status grczsl_config_apply_environment(grczsl_config* config) {
  if (config == nullptr) return bad_argument("grczsl_config_apply_environment: null config");
  return guarded([&] {
    grczsl::ExperimentConfig updated = config->value;
    grczsl::apply_environment(updated);
    config->value = std::move(updated);
  });
}

grczsl_status grczsl_config_to_json(const grczsl_config* config, char** out) {
  if (config == nullptr || out == nullptr) return bad_argument("grczsl_config_to_json: null argument");
  *out = nullptr;
  return guarded([&] {
    const std::string text = grczsl::config_to_json(config->value).dump(2);
    char* buffer = new char[text.size() + 1];
    std::memcpy(buffer, text.c_str(), text.size() + 1);
    *out = buffer;
  });
}

void grczsl_config_free(grczsl_config* config) { delete config; }
void grczsl_string_free(char* text) { delete[] text; }

grczsl_status grczsl_split(const grczsl_config* config, const char* manifest_path, size_t* task_count) {
  if (config == nullptr) return bad_argument("grczsl_split: null config");
  return guarded([&] {
    const auto& c = config->value;
    c.validate();
    const auto data = load_for(c);
    const auto stream = grczsl::build_stream(c, data);
    std::filesystem::path path = manifest_path != nullptr ? std::filesystem::path(manifest_path)
                                                          : c.output_dir / grczsl::kManifestFile;
    if (path.has_parent_path()) grczsl::ensure_writable_directory(path.parent_path());
    grczsl::write_manifest(path, stream);
    if (task_count != nullptr) *task_count = stream.size();
  });
}

grczsl_status grczsl_train(const grczsl_config* config) {
  if (config == nullptr) return bad_argument("grczsl_train: null config");
  return guarded([&] {
    const auto& c = config->value;
    c.validate();
    grczsl::ensure_writable_directory(c.output_dir);
    grczsl::train_experiment(c, load_for(c));
  });
}

grczsl_status grczsl_evaluate_ledger(const char* ledger_path, const grczsl_config* config, const char* out_dir,
                                     grczsl_metrics* metrics) {
  if (ledger_path == nullptr) return bad_argument("grczsl_evaluate_ledger: null ledger path");
  return guarded([&] {
    const grczsl::ExperimentConfig c = config != nullptr ? config->value : grczsl::ExperimentConfig{};
    const std::filesystem::path dir = out_dir != nullptr ? std::filesystem::path(out_dir) : c.output_dir;
    grczsl::ensure_writable_directory(dir);
    const auto ledger = grczsl::read_ledger(ledger_path);
    const auto summary = grczsl::evaluate(ledger);
    grczsl::emit_report(ledger, summary, c, dir);
    fill(metrics, summary);
  });
}

grczsl_status grczsl_run(const grczsl_config* config, grczsl_metrics* metrics) {
  if (config == nullptr) return bad_argument("grczsl_run: null config");
  return guarded([&] { fill(metrics, grczsl::run_experiment(config->value).metrics); });
}

grczsl_status grczsl_sweep_alpha(const grczsl_config* config, grczsl_metrics* results, double* alphas,
                                 size_t capacity, size_t* count) {
  if (config == nullptr) return bad_argument("grczsl_sweep_alpha: null config");
  return guarded([&] {
    const auto entries = grczsl::sweep_alpha(config->value);
    for (std::size_t i = 0; i < entries.size() && i < capacity; ++i) {
      if (results != nullptr) fill(&results[i], entries[i].metrics);
      if (alphas != nullptr) alphas[i] = entries[i].alpha;
    }
    if (count != nullptr) *count = entries.size();
  });
}

void grczsl_synthetic_spec_init(grczsl_synthetic_spec* spec) {
  if (spec == nullptr) return;
  const grczsl::SyntheticSpec d;
  spec->name = "synthetic";
  spec->seen_classes = d.seen_classes;
  spec->unseen_classes = d.unseen_classes;
  spec->feature_dim = d.feature_dim;
  spec->attribute_dim = d.attribute_dim;
  spec->samples_per_class = d.samples_per_class;
  spec->attribute_weight = d.attribute_weight;
  spec->private_weight = d.private_weight;
  spec->noise = d.noise;
  spec->seed = d.seed;
}

grczsl_status grczsl_make_synthetic(const grczsl_synthetic_spec* spec, const char* directory) {
  if (spec == nullptr || directory == nullptr) return bad_argument("grczsl_make_synthetic: null argument");
  return guarded([&] {
    grczsl::SyntheticSpec s;
    s.name = spec->name != nullptr ? spec->name : "synthetic";
    s.seen_classes = spec->seen_classes;
    s.unseen_classes = spec->unseen_classes;
    s.feature_dim = spec->feature_dim;
    s.attribute_dim = spec->attribute_dim;
    s.samples_per_class = spec->samples_per_class;
    s.attribute_weight = spec->attribute_weight;
    s.private_weight = spec->private_weight;
    s.noise = spec->noise;
    s.seed = spec->seed;
    grczsl::write_dataset(directory, grczsl::make_synthetic(s));
  });
}

grczsl_status grczsl_decoder_load(const char* checkpoint_path, grczsl_decoder** out) {
  if (checkpoint_path == nullptr || out == nullptr) return bad_argument("grczsl_decoder_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new grczsl_decoder{grczsl::load_decoder(checkpoint_path)}; });
}

grczsl_status grczsl_decoder_dims(const grczsl_decoder* decoder, size_t* attribute_dim, size_t* feature_dim) {
  if (decoder == nullptr) return bad_argument("grczsl_decoder_dims: null decoder");
  if (attribute_dim != nullptr) *attribute_dim = decoder->value.decoder.attribute_dim();
  if (feature_dim != nullptr) *feature_dim = decoder->value.decoder.feature_dim();
  last_error.clear();
  return GRCZSL_OK;
}

grczsl_status grczsl_decoder_generate(const grczsl_decoder* decoder, const double* attribute, size_t attribute_len,
                                      size_t n, uint64_t seed, double* out, size_t out_len) {
  if (decoder == nullptr || attribute == nullptr || out == nullptr) {
    return bad_argument("grczsl_decoder_generate: null argument");
  }
  const auto& d = decoder->value.decoder;
  if (out_len != n * d.feature_dim()) {
    return bad_argument("grczsl_decoder_generate: out_len must equal n * feature_dim");
  }
  return guarded([&] {
    const grczsl::Matrix m = grczsl::generate(d, std::span<const double>(attribute, attribute_len), n, seed);
    std::memcpy(out, m.data().data(), out_len * sizeof(double));
  });
}

void grczsl_decoder_free(grczsl_decoder* decoder) { delete decoder; }

}  // extern "C"
