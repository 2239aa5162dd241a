#ifndef GRCZSL_H
#define GRCZSL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GRCZSL_API __declspec(dllexport)
#else
#define GRCZSL_API __attribute__((visibility("default")))
#endif

typedef enum grczsl_status {
  GRCZSL_OK = 0,
  GRCZSL_ERR_INTERNAL = 1,
  GRCZSL_ERR_CONFIG = 2,
  GRCZSL_ERR_DATA = 3,
  GRCZSL_ERR_NUMERIC = 4,
  GRCZSL_ERR_IO = 5,
  GRCZSL_ERR_DIMENSION = 6,
  GRCZSL_ERR_INDEX = 7,
  GRCZSL_ERR_SEQUENCING = 8,
  GRCZSL_ERR_EVALUATION = 9,
  GRCZSL_ERR_ARGUMENT = 10
} grczsl_status;

typedef struct grczsl_config grczsl_config;
typedef struct grczsl_decoder grczsl_decoder;

typedef struct grczsl_metrics {
  double mean_seen;
  double mean_unseen;
  double mean_h;
  size_t tasks;
  /* mSA averages tasks 1..seen_last_task, mUA and mH average 1..unseen_last_task */
  size_t seen_last_task;
  size_t unseen_last_task;
} grczsl_metrics;

typedef struct grczsl_synthetic_spec {
  const char* name;
  size_t seen_classes;
  size_t unseen_classes;
  size_t feature_dim;
  size_t attribute_dim;
  size_t samples_per_class;
  double attribute_weight;
  double private_weight;
  double noise;
  uint64_t seed;
} grczsl_synthetic_spec;

/* Message of the last failed call on this thread; empty after a success. */
GRCZSL_API const char* grczsl_last_error(void);
GRCZSL_API const char* grczsl_status_name(grczsl_status status);

/* Config from JSON text. Missing fields take the defaults for the dataset and setting. */
GRCZSL_API grczsl_status grczsl_config_from_json(const char* json_text, grczsl_config** out);
GRCZSL_API grczsl_status grczsl_config_load(const char* path, grczsl_config** out);
/* Dotted key, e.g. "train.alpha" = "0.3". */
GRCZSL_API grczsl_status grczsl_config_set(grczsl_config* config, const char* key, const char* value);
GRCZSL_API grczsl_status grczsl_config_apply_environment(grczsl_config* config);
/* Resolved config as JSON; release with grczsl_string_free. */
GRCZSL_API grczsl_status grczsl_config_to_json(const grczsl_config* config, char** out);
GRCZSL_API void grczsl_config_free(grczsl_config* config);
GRCZSL_API void grczsl_string_free(char* text);

/* Writes the task split manifest for the configured dataset and setting. */
GRCZSL_API grczsl_status grczsl_split(const grczsl_config* config, const char* manifest_path, size_t* task_count);
/* Trains every task and writes checkpoints and the evaluation ledger. */
GRCZSL_API grczsl_status grczsl_train(const grczsl_config* config);
/* Scores a ledger file and writes the report files into out_dir. config may be NULL. */
GRCZSL_API grczsl_status grczsl_evaluate_ledger(const char* ledger_path, const grczsl_config* config,
                                                const char* out_dir, grczsl_metrics* metrics);
GRCZSL_API grczsl_status grczsl_run(const grczsl_config* config, grczsl_metrics* metrics);
/* One run per configured alpha. results may be NULL; otherwise it receives up to capacity entries. */
GRCZSL_API grczsl_status grczsl_sweep_alpha(const grczsl_config* config, grczsl_metrics* results, double* alphas,
                                            size_t capacity, size_t* count);

GRCZSL_API void grczsl_synthetic_spec_init(grczsl_synthetic_spec* spec);
GRCZSL_API grczsl_status grczsl_make_synthetic(const grczsl_synthetic_spec* spec, const char* directory);

GRCZSL_API grczsl_status grczsl_decoder_load(const char* checkpoint_path, grczsl_decoder** out);
GRCZSL_API grczsl_status grczsl_decoder_dims(const grczsl_decoder* decoder, size_t* attribute_dim,
                                             size_t* feature_dim);
/* Writes n rows of feature_dim values into out (out_len must be n * feature_dim). */
GRCZSL_API grczsl_status grczsl_decoder_generate(const grczsl_decoder* decoder, const double* attribute,
                                                 size_t attribute_len, size_t n, uint64_t seed, double* out,
                                                 size_t out_len);
GRCZSL_API void grczsl_decoder_free(grczsl_decoder* decoder);

#ifdef __cplusplus
}
#endif

#endif
