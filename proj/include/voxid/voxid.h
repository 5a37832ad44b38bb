/* Copyright 2026 The voxid Authors
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

/* C interface to libvoxid. Every call returns a vx_status; on failure the
 * message for the calling thread is available from vx_last_error(). Strings
 * returned through out-parameters are owned by the caller and released with
 * vx_string_free(). */

#ifndef VOXID_VOXID_H_
#define VOXID_VOXID_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VX_API __declspec(dllexport)
#elif defined(VOXID_BUILDING_LIBRARY)
#define VX_API __attribute__((visibility("default")))
#else
#define VX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vx_status {
  VX_OK = 0,
  VX_ERR_INVALID_ARGUMENT = 1,
  VX_ERR_IO = 2,
  VX_ERR_DECODE = 3,
  VX_ERR_UNSUPPORTED = 4,
  VX_ERR_SHAPE = 5,
  VX_ERR_CONFIG = 6,
  VX_ERR_INDEX = 7,
  VX_ERR_STATE = 8,
  VX_ERR_NUMERIC = 9,
  VX_ERR_BUILD = 10,
  VX_ERR_PARSE = 11,
  VX_ERR_INTERNAL = 12
} vx_status;

typedef enum vx_feature_kind { VX_FEATURES_MEL = 0, VX_FEATURES_MFCC = 1 } vx_feature_kind;

/* Library version as "major.minor.patch". Static storage. */
VX_API const char* vx_version(void);

/* Message of the last failed call on this thread, or "" if none. */
VX_API const char* vx_last_error(void);

VX_API const char* vx_status_name(vx_status status);

VX_API void vx_string_free(char* s);

/* Called with one human-readable progress line. NULL silences logging;
 * the default writes to stderr. */
typedef void (*vx_log_fn)(const char* message, void* user);
VX_API void vx_set_logger(vx_log_fn fn, void* user);

/* --- pipeline stages ---------------------------------------------------
 * Each stage writes artifacts plus <stage>-manifest.json into its output
 * directory. `summary_json` (optional) receives a small JSON object. */

typedef struct vx_synth_options {
  const char* out_dir;
  size_t speakers;
  size_t utterances;
  double duration_s;
  size_t accents;
  uint64_t seed;
  int threads;
} vx_synth_options;
VX_API void vx_synth_options_init(vx_synth_options* opts);
VX_API vx_status vx_synth_corpus(const vx_synth_options* opts, char** summary_json);

typedef struct vx_extract_options {
  const char* corpus_dir;
  const char* out_dir;
  vx_feature_kind kind;
  int threads;
} vx_extract_options;
VX_API void vx_extract_options_init(vx_extract_options* opts);
VX_API vx_status vx_extract(const vx_extract_options* opts, char** summary_json);

typedef struct vx_train_options {
  const char* data_dir;
  const char* model; /* preset name or spec JSON path */
  const char* out_dir;
  double learning_rate;
  size_t batch_size;
  size_t max_epochs;
  size_t patience;
  double split[3]; /* train, validation, test */
  uint64_t seed;
} vx_train_options;
VX_API void vx_train_options_init(vx_train_options* opts);
VX_API vx_status vx_train(const vx_train_options* opts, char** summary_json);

typedef struct vx_evaluate_options {
  const char* checkpoint;
  const char* data_dir;
  const char* out_dir;
  int all_items; /* nonzero: every indexed item, else the held-out test split */
  size_t top_k;
  size_t batch_size;
} vx_evaluate_options;
VX_API void vx_evaluate_options_init(vx_evaluate_options* opts);
VX_API vx_status vx_evaluate(const vx_evaluate_options* opts, char** summary_json);

typedef struct vx_bias_options {
  const char* predictions;
  const char* metadata;
  const char* out_dir;
} vx_bias_options;
VX_API void vx_bias_options_init(vx_bias_options* opts);
VX_API vx_status vx_bias(const vx_bias_options* opts, char** summary_json);

typedef struct vx_tune_options {
  const char* data_dir;
  const char* model;
  const char* out_dir;
  size_t trials;
  size_t batch_size;
  size_t max_epochs;
  size_t patience;
  double split[3];
  uint64_t seed;
} vx_tune_options;
VX_API void vx_tune_options_init(vx_tune_options* opts);
VX_API vx_status vx_tune(const vx_tune_options* opts, char** summary_json);

typedef struct vx_report_options {
  const char* const* metrics;
  size_t metrics_count;
  const char* const* train_logs; /* NULL or metrics_count entries */
  size_t train_logs_count;
  const char* out_file;
} vx_report_options;
VX_API void vx_report_options_init(vx_report_options* opts);
VX_API vx_status vx_report(const vx_report_options* opts);

/* --- model specs -------------------------------------------------------- */

/* NUL-separated list of preset names, terminated by an empty string. */
VX_API const char* vx_preset_names(void);

/* Serialized spec of a preset for `num_classes` speakers. */
VX_API vx_status vx_preset_spec(const char* name, size_t num_classes, vx_feature_kind kind,
                                char** spec_json);

/* Layer-by-layer output shapes as JSON for a spec and input size. */
VX_API vx_status vx_spec_trace(const char* spec_json, size_t bands, size_t frames,
                               char** trace_json);

/* --- trained models ----------------------------------------------------- */

typedef struct vx_model vx_model;

VX_API vx_status vx_model_load(const char* checkpoint_path, vx_model** out);
VX_API void vx_model_free(vx_model* model);
VX_API size_t vx_model_num_classes(const vx_model* model);
/* Borrowed pointer valid until vx_model_free; NULL when out of range. */
VX_API const char* vx_model_class_label(const vx_model* model, size_t index);
VX_API void vx_model_input_shape(const vx_model* model, size_t* bands, size_t* frames);

/* Classifies one raw (unnormalized) feature matrix, bands x frames in
 * row-major order. `probabilities` may be NULL or hold num_classes floats. */
VX_API vx_status vx_model_predict(vx_model* model, const float* features, size_t bands,
                                  size_t frames, size_t* predicted, float* probabilities);

/* Loads a WAV file, chunks it and classifies each chunk with the model's
 * feature configuration. `predicted` receives up to `capacity` class indices;
 * `count` receives the number of chunks. */
VX_API vx_status vx_model_predict_wav(vx_model* model, const char* wav_path, size_t* predicted,
                                      size_t capacity, size_t* count);

#ifdef __cplusplus
}
#endif

#endif /* VOXID_VOXID_H_ */
