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

#ifndef CROSSGATE_HARNESS_HPP_
#define CROSSGATE_HARNESS_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crossgate/dista.hpp"
#include "crossgate/encoders.hpp"
#include "crossgate/errors.hpp"
#include "crossgate/fusion.hpp"
#include "crossgate/knowd.hpp"
#include "crossgate/metrics.hpp"
#include "crossgate/stys.hpp"
#include "crossgate/syngen.hpp"

namespace crossgate::harness {

enum class Mode { kSyn, kReal, kSynPlusReal, kSynToReal };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

// Flat key-value run configuration; every field has a config-file key and
// unknown keys are errors.
struct RunConfig {
  Mode mode = Mode::kSynToReal;
  bool branch_knowd = true, branch_stys = true, branch_dista = true;
  int t_obs = 16;
  int tau = 0;  // evaluation stratification; 0 = all clips
  int p_horizon = 16;
  int batch_size = 2;
  double lr = 1e-5;
  double lr_decay = 0.8;
  int lr_decay_every = 10;
  int epochs = 20;
  bool auto_epoch_scale = true;
  int teacher_epochs = 10;
  double dropout = 0.5;
  uint64_t seed = 1;
  int feature_dim = 64;
  int region_size = 64;
  int patch_size = 8;
  int psi_depth = 2;
  int psi_heads = 8;
  int teacher_layers = 3;
  int teacher_heads = 8;
  int student_channels = 8;
  int student_lstm_hidden = 100;
  double lambda_grl = 1.0;
  int grl_warmup_epochs = 0;
  double alpha_style = 10.0;
  double beta_crop = 1.5;
  int adain_block = 1;
  std::string gate_norm = "softmax";  // softmax | l1
  double eta_gumbel = 1.0;
  bool fol = true;
  std::string data_dir, out_dir;
  bool export_features = false;
  std::string tau_sweep;        // comma-separated tau list for ablate
  std::string ablate_subsets;   // e.g. "knowd;stys,knowd"; empty = all 8

  void validate() const;  // throws ConfigError
  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::string& path);
  EncoderConfig encoder_config() const;
  std::vector<std::string> enabled_branches() const;
};

// All trainable modules; always constructed in a fixed order so a seed pins
// every initial weight regardless of which branches are enabled.
struct Model {
  EncoderConfig enc;
  std::unique_ptr<TeacherEncoder> teacher;
  std::unique_ptr<StudentEncoder> student;
  std::unique_ptr<PsiBackbone> psi;
  std::unique_ptr<dista::DomainDiscriminator> disc;
  std::unique_ptr<fusion::GatedFusion> lgu;
  std::unique_ptr<fusion::CrossingPredictor> predictor;

  static Model build(const RunConfig& cfg, Rng& rng);
  std::vector<std::pair<std::string, nn::ParamStore*>> stores();
};

struct LossBreakdown {
  double l_st = 0, l_con = 0, l_sty = 0;
  double l_dom = 0;
  double l_kd = 0, l_fea = 0, l_loc = 0, l_pre = 0;
  double l_cla = 0;
  double total = 0;
};

// In-memory dataset view grouped by (domain, split).
struct Dataset {
  syngen::DatasetManifest manifest;
  std::vector<Clip> syn_train, real_train, real_test;

  static Dataset load(const syngen::DatasetManifest& manifest);
  void check_mode(Mode mode) const;  // throws ConfigError on missing domains
};

class Trainer {
 public:
  Trainer(RunConfig cfg, const syngen::DatasetManifest& manifest);

  // Phase 1 of syn-to-real: trains the teacher on synthetic tracks, then
  // freezes it. No-op in other modes or when knowd is disabled.
  void teacher_phase();

  // One optimization step over explicit batches. Always runs backward (so
  // gradients are inspectable); applies the update when apply is true.
  LossBreakdown joint_step(const std::vector<const Clip*>& cls_batch,
                           const std::vector<const Clip*>& syn_batch, bool apply);

  // Full training: teacher phase, epoch loop, loss log, per-epoch checkpoint.
  // Throws DivergenceError on non-finite loss (last epoch checkpoint remains).
  void run();

  // Deterministic single step over the leading clips, without applying.
  LossBreakdown debug_step();

  Model& model() { return model_; }
  const RunConfig& config() const { return cfg_; }
  const Dataset& dataset() const { return data_; }
  Rng& rng() { return rng_; }
  int effective_epochs() const { return effective_epochs_; }
  const std::vector<LossBreakdown>& step_log() const { return step_log_; }
  const std::vector<double>& teacher_loss_log() const { return teacher_loss_log_; }

 private:
  std::vector<const Clip*> classification_pool();
  void build_optimizer();

  RunConfig cfg_;
  Dataset data_;
  Rng rng_;
  Model model_;
  std::unique_ptr<stys::StyleShifter> shifter_;
  std::unique_ptr<nn::Adam> opt_;
  std::vector<LossBreakdown> step_log_;
  std::vector<double> teacher_loss_log_;
  int effective_epochs_ = 0;
  bool teacher_ready_ = false;
};

// Checkpointing: binary format, bit-exact round trip (raw float64 payloads,
// RNG state string, config echo, optimizer state).
void save_checkpoint(const std::string& path, const RunConfig& cfg, Model& model, int epoch,
                     const std::string& rng_state, nn::Adam* opt);

struct LoadedCheckpoint {
  RunConfig cfg;
  std::unique_ptr<Model> model;
  int epoch = 0;
  std::string rng_state;
  bool has_opt = false;
  int64_t opt_t = 0;
  std::vector<nn::Adam::Slot> opt_slots;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// Ties the whole run together; returns a short JSON summary.
std::string train_run(const RunConfig& cfg);

struct EvalOptions {
  std::string split = "test";   // "test" or "train" (real domain only)
  int tau_filter = 0;           // 0 = all; else crossing clips with ttc == tau
  std::string out_dir;          // when set: predictions.csv, metrics.json, ...
  bool export_features = false;
};

metrics::MetricsReport evaluate_model(Model& model, const RunConfig& cfg, const Dataset& data,
                                      const EvalOptions& opts);
metrics::MetricsReport evaluate(const std::string& checkpoint_path,
                                const syngen::DatasetManifest& manifest, const EvalOptions& opts);

// Table-2-style branch-subset sweep plus the TTC sweep; writes ablation.json
// and ablation.md under base.out_dir and returns the JSON text.
std::string ablate_run(const RunConfig& base);

// Aggregates run artifacts into report.json / report.md; projects exported
// features to 2D (PCA) when features.csv is present.
std::string report_run(const std::string& run_dir);

}  // namespace crossgate::harness

#endif  // CROSSGATE_HARNESS_HPP_
