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

#include "crossgate.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "crossgate/harness.hpp"

using namespace crossgate;

struct cg_scene_spec {
  syngen::SceneSpec spec;
};

struct cg_run_config {
  harness::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
cg_status guarded(F&& f) {
  try {
    f();
    return CG_OK;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return CG_ERR_CONFIG;
  } catch (const DivergenceError& e) {
    g_last_error = e.what();
    return CG_ERR_DIVERGED;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return CG_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CG_ERROR;
  }
}

}  // namespace

extern "C" {

const char* cg_version(void) { return "0.1.0"; }

const char* cg_last_error(void) { return g_last_error.c_str(); }

void cg_string_free(char* s) { std::free(s); }

cg_status cg_scene_spec_default(cg_scene_spec** out) {
  return guarded([&] { *out = new cg_scene_spec{syngen::SceneSpec{}}; });
}

cg_status cg_scene_spec_load(const char* path, cg_scene_spec** out) {
  return guarded([&] {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(std::string("cannot open scene spec: ") + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    *out = new cg_scene_spec{syngen::scene_spec_from_json(ss.str())};
  });
}

cg_status cg_scene_spec_to_json(const cg_scene_spec* spec, char** json_out) {
  return guarded([&] { *json_out = dup_string(syngen::scene_spec_to_json(spec->spec)); });
}

void cg_scene_spec_free(cg_scene_spec* spec) { delete spec; }

cg_status cg_generate_dataset(const cg_scene_spec* spec, int syn_total, int real_total,
                              const char* out_dir, char** manifest_json_out) {
  return guarded([&] {
    const syngen::CountsMap counts =
        syngen::default_counts(spec->spec, syn_total, real_total);
    syngen::DatasetManifest m = syngen::generate_dataset(spec->spec, counts, out_dir);
    if (manifest_json_out) *manifest_json_out = dup_string(syngen::manifest_to_json(m));
  });
}

cg_status cg_run_config_load(const char* path, cg_run_config** out) {
  return guarded([&] { *out = new cg_run_config{harness::RunConfig::load(path)}; });
}

cg_status cg_run_config_from_text(const char* text, cg_run_config** out) {
  return guarded([&] { *out = new cg_run_config{harness::RunConfig::from_text(text)}; });
}

cg_status cg_run_config_to_text(const cg_run_config* cfg, char** text_out) {
  return guarded([&] { *text_out = dup_string(cfg->cfg.to_text()); });
}

void cg_run_config_free(cg_run_config* cfg) { delete cfg; }

cg_status cg_train(const cg_run_config* cfg, char** summary_json_out) {
  return guarded([&] {
    const std::string summary = harness::train_run(cfg->cfg);
    if (summary_json_out) *summary_json_out = dup_string(summary);
  });
}

cg_status cg_evaluate(const char* checkpoint_path, const char* data_dir, const char* split,
                      int tau, const char* out_dir, char** metrics_json_out) {
  return guarded([&] {
    syngen::DatasetManifest manifest =
        syngen::load_manifest(std::string(data_dir) + "/manifest.json");
    harness::EvalOptions opts;
    if (split && *split) opts.split = split;
    opts.tau_filter = tau;
    if (out_dir && *out_dir) opts.out_dir = out_dir;
    metrics::MetricsReport rep = harness::evaluate(checkpoint_path, manifest, opts);
    if (metrics_json_out) *metrics_json_out = dup_string(rep.to_json());
  });
}

cg_status cg_ablate(const cg_run_config* cfg, char** table_json_out) {
  return guarded([&] {
    const std::string table = harness::ablate_run(cfg->cfg);
    if (table_json_out) *table_json_out = dup_string(table);
  });
}

cg_status cg_report(const char* run_dir, char** report_json_out) {
  return guarded([&] {
    const std::string rep = harness::report_run(run_dir);
    if (report_json_out) *report_json_out = dup_string(rep);
  });
}

}  // extern "C"
