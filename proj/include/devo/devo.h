/* C interface to the DEvo pipeline. Every call returns a devo_status; on
 * failure devo_last_error() describes the cause for the calling thread.
 * Handles are opaque and owned by the caller. */
#ifndef DEVO_DEVO_H
#define DEVO_DEVO_H

#include <stddef.h>

#if defined(DEVO_BUILDING_LIBRARY)
#define DEVO_API __attribute__((visibility("default")))
#else
#define DEVO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum devo_status {
  DEVO_OK = 0,
  DEVO_ERR_INTERNAL = 1,
  DEVO_ERR_CONFIG = 2,
  DEVO_ERR_DATA = 3,
  DEVO_ERR_TRAINING = 4
} devo_status;

typedef enum devo_base { DEVO_BASE_MLP = 0, DEVO_BASE_LSTM = 1 } devo_base;

typedef struct devo_config devo_config;
typedef struct devo_dataset devo_dataset;
typedef struct devo_report devo_report;

DEVO_API const char* devo_version(void);
DEVO_API const char* devo_last_error(void);
DEVO_API void devo_string_free(char* text);

/* Configuration: defaults, a versioned key = value file, single overrides. */
DEVO_API devo_status devo_config_new(devo_config** out);
DEVO_API devo_status devo_config_load(const char* path, devo_config** out);
DEVO_API devo_status devo_config_set(devo_config* config, const char* key, const char* value);
DEVO_API devo_status devo_config_validate(const devo_config* config);
DEVO_API devo_status devo_config_dump(const devo_config* config, char** text);
DEVO_API void devo_config_free(devo_config* config);

/* Feature datasets. */
DEVO_API devo_status devo_dataset_load(const char* feature_csv, devo_dataset** out);
DEVO_API devo_status devo_dataset_extract(const devo_config* config, devo_dataset** out);
DEVO_API devo_status devo_dataset_save(const devo_dataset* data, const char* path);
DEVO_API devo_status devo_dataset_apply_mask(const devo_dataset* data, const char* mask_path, devo_dataset** out);
DEVO_API size_t devo_dataset_rows(const devo_dataset* data);
DEVO_API size_t devo_dataset_cols(const devo_dataset* data);
DEVO_API size_t devo_dataset_classes(const devo_dataset* data);
DEVO_API void devo_dataset_free(devo_dataset* data);

/* Pipeline stages. Artifacts are written into out_dir, which is created. */
DEVO_API devo_status devo_synth(const devo_config* config, const char* out_dir, size_t* files_written);
DEVO_API devo_status devo_select(const devo_config* config, const devo_dataset* data, const char* out_dir,
                                 devo_dataset** selected);
DEVO_API devo_status devo_evolve_mlp(const devo_config* config, const devo_dataset* data, const char* out_dir,
                                     double* accuracy);
DEVO_API devo_status devo_train_lstm(const devo_config* config, const devo_dataset* data, const char* out_dir,
                                     double* accuracy);
DEVO_API devo_status devo_sweep_lstm(const devo_config* config, const devo_dataset* data, const char* out_dir);
DEVO_API devo_status devo_boost(const devo_config* config, const devo_dataset* data, devo_base base,
                                const char* out_dir, double* accuracy);

/* Whole experiment and its report. */
DEVO_API devo_status devo_run(const devo_config* config, const char* out_dir, devo_report** out);
DEVO_API devo_status devo_report_load(const char* path, devo_report** out);
DEVO_API const char* devo_report_json(const devo_report* report);
DEVO_API devo_status devo_report_summary(const devo_report* report, char** text);
/* Pooled accuracy (percent) or training seconds of a named model; negative
 * when the report has no such model. */
DEVO_API double devo_report_accuracy(const devo_report* report, const char* model);
DEVO_API double devo_report_train_seconds(const devo_report* report, const char* model);
DEVO_API void devo_report_free(devo_report* report);

#ifdef __cplusplus
}
#endif

#endif
