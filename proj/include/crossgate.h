/* Copyright 2026 The Crossgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C API for the crossgate library: synthetic-to-real transfer training for
 * pedestrian crossing prediction. All entry points return a cg_status; on
 * failure cg_last_error() carries the message. Strings returned through
 * out-parameters are heap-allocated and must be released with
 * cg_string_free(). Handles are opaque and must be released with their
 * matching *_free function. */

#ifndef CROSSGATE_H_
#define CROSSGATE_H_

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cg_status {
  CG_OK = 0,
  CG_ERROR = 1,          /* generic / IO failure */
  CG_ERR_CONFIG = 2,     /* bad configuration or incompatible inputs */
  CG_ERR_DIVERGED = 3    /* training loss became non-finite */
} cg_status;

typedef struct cg_scene_spec cg_scene_spec;
typedef struct cg_run_config cg_run_config;

const char* cg_version(void);

/* Thread-local message for the most recent failing call. */
const char* cg_last_error(void);
void cg_string_free(char* s);

/* --- dataset generation ------------------------------------------------- */

cg_status cg_scene_spec_default(cg_scene_spec** out);
cg_status cg_scene_spec_load(const char* path, cg_scene_spec** out);
cg_status cg_scene_spec_to_json(const cg_scene_spec* spec, char** json_out);
void cg_scene_spec_free(cg_scene_spec* spec);

/* Writes clips and manifest.json under out_dir. Per-(domain,label) counts:
 * negative counts select the built-in proportions for the given totals. */
cg_status cg_generate_dataset(const cg_scene_spec* spec, int syn_total, int real_total,
                              const char* out_dir, char** manifest_json_out);

/* --- training / evaluation ---------------------------------------------- */

cg_status cg_run_config_load(const char* path, cg_run_config** out);
cg_status cg_run_config_from_text(const char* text, cg_run_config** out);
cg_status cg_run_config_to_text(const cg_run_config* cfg, char** text_out);
void cg_run_config_free(cg_run_config* cfg);

/* Full training run (teacher phase + joint phase); artifacts under the
 * config's out_dir. Returns a JSON summary. */
cg_status cg_train(const cg_run_config* cfg, char** summary_json_out);

/* Evaluates a checkpoint on a dataset split ("test" or "train"); optional
 * out_dir receives predictions.csv / metrics.json; tau = 0 keeps all clips. */
cg_status cg_evaluate(const char* checkpoint_path, const char* data_dir, const char* split,
                      int tau, const char* out_dir, char** metrics_json_out);

/* Branch-subset sweep plus TTC sweep; writes ablation.json / ablation.md. */
cg_status cg_ablate(const cg_run_config* cfg, char** table_json_out);

/* Aggregates run artifacts into report.json / report.md (+ features_2d.csv
 * when exported features are present). */
cg_status cg_report(const char* run_dir, char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* CROSSGATE_H_ */
