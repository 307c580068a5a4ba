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

#ifndef CROSSGATE_KNOWD_HPP_
#define CROSSGATE_KNOWD_HPP_

#include <memory>
#include <vector>

#include "crossgate/encoders.hpp"

namespace crossgate::knowd {

struct TrackSample {
  Tensor track;   // (T,4)
  Tensor future;  // (P,4) ground truth
  CrossLabel label = CrossLabel::kNotCrossing;
};

struct DistillLossReport {
  double l_fea = 0, l_loc = 0, l_pre = 0, l_kd = 0;
};

// KLD(softmax(f_t) || softmax(f_s)); zero iff the softmaxed embeddings match.
Var loss_fea(const Var& f_t, const Var& f_s);
// MSE over all P x 4 coordinates between student and teacher predictions.
Var loss_loc(const Var& pred_s, const Var& pred_t);
// MSE between student predictions and the ground-truth future track.
Var loss_pre(const Var& pred_s, const Tensor& gt);

struct TeacherTrainOptions {
  int epochs = 10;
  double lr = 1e-5;
  double lr_decay = 0.8;
  int lr_decay_every = 10;
  int batch_size = 2;
  bool fol = true;
};

// Trains the teacher on synthetic tracks (crossing classification + FOL
// regression), freezes it, and returns it. Appends the per-epoch mean loss to
// *loss_log when given. Throws DivergenceError on non-finite loss.
std::unique_ptr<TeacherEncoder> train_teacher(const EncoderConfig& cfg,
                                              const std::vector<TrackSample>& syn_tracks,
                                              const TeacherTrainOptions& opt, Rng& rng,
                                              std::vector<double>* loss_log = nullptr);

// Same training loop over an already constructed teacher; freezes it at the
// end. Used when the teacher's initialization order must be pinned externally.
void train_teacher_inplace(TeacherEncoder& teacher, const std::vector<TrackSample>& syn_tracks,
                           const TeacherTrainOptions& opt, Rng& rng,
                           std::vector<double>* loss_log = nullptr);

// One distillation step on a real-track batch: runs the frozen teacher and
// the student, forms the three losses, and (when opt is non-null) applies a
// student update. Gradients flow only into the student.
DistillLossReport distill_step(const std::vector<TrackSample>& real_batch,
                               const TeacherEncoder& teacher, StudentEncoder& student,
                               nn::Adam* opt, bool fol = true);

}  // namespace crossgate::knowd

#endif  // CROSSGATE_KNOWD_HPP_
