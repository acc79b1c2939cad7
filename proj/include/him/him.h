/*
 * Copyright 2026 The HIM Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the HIM library. Every object is an opaque handle owned by
 * the caller and released with the matching *_free function. Functions
 * return HIM_OK or an error code; him_last_error() describes the most recent
 * failure on the calling thread. */

#ifndef HIM_H_
#define HIM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HIM_API __declspec(dllexport)
#else
#define HIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum him_status {
  HIM_OK = 0,
  HIM_E_INVALID_ARGUMENT = 1,
  HIM_E_IO = 2,
  HIM_E_PARSE = 3,
  HIM_E_NUMERIC = 4,
  HIM_E_STATE = 5,
  HIM_E_INTERNAL = 6
} him_status;

typedef enum him_variant { HIM_VARIANT_BASE = 0, HIM_VARIANT_UBP = 1, HIM_VARIANT_HIM = 2 } him_variant;

typedef enum him_segment {
  HIM_SEGMENT_ALL = 0,
  HIM_SEGMENT_TAILED = 1,
  HIM_SEGMENT_BODY = 2,
  HIM_SEGMENT_HEAD = 3
} him_segment;

typedef enum him_baseline { HIM_BASELINE_POPULARITY = 0, HIM_BASELINE_LR = 1 } him_baseline;

typedef struct him_config him_config;
typedef struct him_data him_data;
typedef struct him_model him_model;
typedef struct him_ablation him_ablation;

HIM_API const char* him_version(void);
HIM_API const char* him_last_error(void);
HIM_API const char* him_status_name(him_status s);

/* Strings are copied into `buf` (NUL-terminated) when `cap` is large
 * enough; `needed` receives the full length including the terminator. */

/* ---- Configuration ---- */
HIM_API him_status him_config_default(him_config** out);
HIM_API him_status him_config_load(const char* path, him_config** out);
HIM_API him_status him_config_parse(const char* text, him_config** out);
HIM_API him_status him_config_set(him_config* cfg, const char* key, const char* value);
HIM_API him_status him_config_get(const him_config* cfg, const char* key, char* buf, size_t cap,
                                  size_t* needed);
HIM_API him_status him_config_to_text(const him_config* cfg, char* buf, size_t cap,
                                      size_t* needed);
HIM_API void him_config_free(him_config* cfg);

/* ---- Synthetic data ---- */
/* Writes interactions.csv, items.csv, dataset.json and groups.csv. A
 * non-NULL `seed` overrides the spec's seed. */
HIM_API him_status him_synth_write(const char* spec_path, const char* out_dir,
                                   const uint64_t* seed);
/* Best-permutation purity of `groups_csv` (user,session,group) for the
 * 1-based `session` against `truth_csv` (user_id,group_id). */
HIM_API him_status him_group_recovery(const char* groups_csv, const char* truth_csv,
                                      size_t session, double* out);

/* ---- Data ---- */
typedef struct him_data_stats {
  size_t users;
  size_t items;
  size_t raw_records;
  size_t kept_records;
  size_t train;
  size_t validation;
  size_t test;
  uint64_t split_hash;
  int has_real_negatives;
} him_data_stats;

HIM_API him_status him_data_prepare(const char* dir, const him_config* cfg, him_data** out);
/* Indexes `dir` against the model's item vocabularies. */
HIM_API him_status him_data_prepare_for(const char* dir, const him_model* model,
                                        him_data** out);
HIM_API him_status him_data_stats_get(const him_data* data, him_data_stats* out);
HIM_API him_status him_data_write_split(const him_data* data, const char* dir);
HIM_API void him_data_free(him_data* data);

/* ---- Training and inference ---- */
typedef struct him_epoch {
  size_t epoch;
  double loss;
  double cross_entropy;
  double group_loss;
  double val_auc;
} him_epoch;

typedef void (*him_epoch_fn)(void* user, const him_epoch* epoch);

typedef struct him_train_summary {
  size_t epochs_run;
  size_t best_epoch;
  double best_val_auc;
} him_train_summary;

/* Trains the configured variant on the data's train split with early
 * stopping on validation AUC. `on_epoch` may be NULL. */
HIM_API him_status him_train(const him_config* cfg, const him_data* data, him_epoch_fn on_epoch,
                             void* user, him_model** out, him_train_summary* summary);
HIM_API him_status him_model_save(const him_model* model, const char* path);
HIM_API him_status him_model_load(const char* path, him_model** out);
HIM_API him_status him_model_config(const him_model* model, him_config** out);
HIM_API void him_model_free(him_model* model);

typedef struct him_report {
  double auc[4]; /* indexed by him_segment; NaN when a segment has one class */
  size_t n[4];
} him_report;

/* Test-split AUC overall and per user segment. */
HIM_API him_status him_model_evaluate(him_model* model, const him_data* data, him_report* out);
/* distance.csv, fusion.csv and groups.csv (him variant only) into `dir`. */
HIM_API him_status him_model_write_diagnostics(him_model* model, const him_data* data,
                                               const char* dir);

typedef struct him_query {
  const char* user_id;
  const char* item_id;
  int64_t timestamp;
} him_query;

/* Click probabilities; unknown users have empty histories and unknown items
 * map to the padding row. */
HIM_API him_status him_model_predict(him_model* model, const him_data* data,
                                     const him_query* queries, size_t count, double* out);

HIM_API him_status him_baseline_evaluate(const him_config* cfg, const him_data* data,
                                         him_baseline kind, him_report* out);

/* ---- Ablation ---- */
typedef struct him_run_info {
  him_variant variant;
  size_t repetition;
  uint64_t seed;
  him_report report;
} him_run_info;

typedef void (*him_run_fn)(void* user, const him_run_info* run);

typedef struct him_cell {
  double mean;
  double std;
  size_t n_samples;
} him_cell;

HIM_API him_status him_ablate(const him_config* cfg, const him_data* data, him_run_fn on_run,
                              void* user, him_ablation** out);
HIM_API him_status him_ablation_cell(const him_ablation* a, him_variant variant,
                                     him_segment segment, him_cell* out);
HIM_API him_status him_ablation_split_hash(const him_ablation* a, uint64_t* out);
HIM_API him_status him_ablation_write_csv(const him_ablation* a, const char* path);
HIM_API him_status him_ablation_grid(const him_ablation* a, char* buf, size_t cap,
                                     size_t* needed);
HIM_API void him_ablation_free(him_ablation* a);

#ifdef __cplusplus
}
#endif

#endif /* HIM_H_ */
