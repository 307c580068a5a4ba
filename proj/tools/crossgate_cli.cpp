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

// Command-line front end; talks to the library exclusively through the C API.

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "crossgate.h"

namespace {

int fail(cg_status st) {
  std::fprintf(stderr, "error: %s\n", cg_last_error());
  return static_cast<int>(st);
}

int print_and_free(char* json) {
  if (json != nullptr) {
    std::fputs(json, stdout);
    cg_string_free(json);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossgate: gated synthetic-to-real transfer for pedestrian crossing prediction"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "generate a two-domain toy dataset");
  std::string gen_spec, gen_out;
  int syn_total = 400, real_total = 300;
  gen->add_option("--spec", gen_spec, "scene spec JSON file (defaults used when omitted)");
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--syn-total", syn_total, "total synthetic clips");
  gen->add_option("--real-total", real_total, "total real clips");

  // train
  auto* train = app.add_subcommand("train", "train a model from a run config");
  std::string train_cfg;
  train->add_option("--config", train_cfg, "run config file (flat key = value)")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  int eval_tau = 0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "split: test or train");
  eval->add_option("--tau", eval_tau, "restrict crossing clips to this TTC (0 = all)");
  eval->add_option("--out", eval_out, "directory for predictions.csv / metrics.json");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "branch-subset and TTC sweeps");
  std::string ablate_cfg;
  ablate->add_option("--config", ablate_cfg, "run config file")->required();

  // report
  auto* report = app.add_subcommand("report", "aggregate run artifacts into a report");
  std::string report_run_dir;
  report->add_option("--run", report_run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    cg_scene_spec* spec = nullptr;
    cg_status st = gen_spec.empty() ? cg_scene_spec_default(&spec)
                                    : cg_scene_spec_load(gen_spec.c_str(), &spec);
    if (st != CG_OK) return fail(st);
    char* manifest = nullptr;
    st = cg_generate_dataset(spec, syn_total, real_total, gen_out.c_str(), &manifest);
    cg_scene_spec_free(spec);
    if (st != CG_OK) return fail(st);
    return print_and_free(manifest);
  }

  if (train->parsed()) {
    cg_run_config* cfg = nullptr;
    cg_status st = cg_run_config_load(train_cfg.c_str(), &cfg);
    if (st != CG_OK) return fail(st);
    char* summary = nullptr;
    st = cg_train(cfg, &summary);
    cg_run_config_free(cfg);
    if (st != CG_OK) return fail(st);
    return print_and_free(summary);
  }

  if (eval->parsed()) {
    char* metrics = nullptr;
    const cg_status st = cg_evaluate(eval_ckpt.c_str(), eval_data.c_str(), eval_split.c_str(),
                                     eval_tau, eval_out.c_str(), &metrics);
    if (st != CG_OK) return fail(st);
    return print_and_free(metrics);
  }

  if (ablate->parsed()) {
    cg_run_config* cfg = nullptr;
    cg_status st = cg_run_config_load(ablate_cfg.c_str(), &cfg);
    if (st != CG_OK) return fail(st);
    char* table = nullptr;
    st = cg_ablate(cfg, &table);
    cg_run_config_free(cfg);
    if (st != CG_OK) return fail(st);
    return print_and_free(table);
  }

  if (report->parsed()) {
    char* rep = nullptr;
    const cg_status st = cg_report(report_run_dir.c_str(), &rep);
    if (st != CG_OK) return fail(st);
    return print_and_free(rep);
  }

  return 0;
}
