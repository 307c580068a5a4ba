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

#include "crossgate/knowd.hpp"

#include <cmath>

#include "crossgate/errors.hpp"

namespace crossgate::knowd {

Var loss_fea(const Var& f_t, const Var& f_s) {
  if (!f_t->val.same_shape(f_s->val))
    throw std::invalid_argument("loss_fea: embedding dimension mismatch");
  return ag::kld_softmax(f_t, f_s);
}

Var loss_loc(const Var& pred_s, const Var& pred_t) {
  if (!pred_s->val.same_shape(pred_t->val))
    throw std::invalid_argument("loss_loc: prediction shape mismatch");
  return ag::mse(pred_s, pred_t);
}

Var loss_pre(const Var& pred_s, const Tensor& gt) {
  if (!pred_s->val.same_shape(gt))
    throw std::invalid_argument("loss_pre: ground-truth shape mismatch");
  return ag::mse(pred_s, ag::constant(gt));
}

void train_teacher_inplace(TeacherEncoder& teacher, const std::vector<TrackSample>& syn_tracks,
                           const TeacherTrainOptions& opt, Rng& rng,
                           std::vector<double>* loss_log) {
  if (syn_tracks.empty()) throw ConfigError("train_teacher: empty synthetic track set");
  nn::Adam adam(teacher.params().params(), opt.lr);

  std::vector<size_t> order(syn_tracks.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    adam.set_lr(opt.lr * std::pow(opt.lr_decay, epoch / opt.lr_decay_every));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
      std::vector<Var> items;
      for (size_t i = start; i < end; ++i) {
        const TrackSample& s = syn_tracks[order[i]];
        TrackEncodeOut out = teacher.encode(s.track);
        Tensor y({1, 2});
        y.at(0, static_cast<int64_t>(s.label)) = 1.0;
        Var item = ag::bce_probs(ag::softmax_rows(out.cls_logits), ag::constant(y));
        if (opt.fol) item = ag::add(item, loss_pre(out.future, s.future));
        items.push_back(item);
      }
      Var batch_loss = ag::mean(ag::concat_cols(items));
      const double lv = batch_loss->val.item();
      if (!std::isfinite(lv)) throw DivergenceError("train_teacher: loss diverged (non-finite)");
      epoch_loss += lv;
      ++batches;
      adam.zero_grads();
      ag::backward(batch_loss);
      adam.step();
    }
    if (loss_log) loss_log->push_back(epoch_loss / std::max(1, batches));
  }
  adam.zero_grads();
  teacher.freeze();
}

std::unique_ptr<TeacherEncoder> train_teacher(const EncoderConfig& cfg,
                                              const std::vector<TrackSample>& syn_tracks,
                                              const TeacherTrainOptions& opt, Rng& rng,
                                              std::vector<double>* loss_log) {
  auto teacher = std::make_unique<TeacherEncoder>(cfg, rng);
  train_teacher_inplace(*teacher, syn_tracks, opt, rng, loss_log);
  return teacher;
}

DistillLossReport distill_step(const std::vector<TrackSample>& real_batch,
                               const TeacherEncoder& teacher, StudentEncoder& student,
                               nn::Adam* opt, bool fol) {
  if (!teacher.frozen())
    throw std::logic_error("distill_step: teacher must be frozen before distillation");
  if (real_batch.empty()) throw std::invalid_argument("distill_step: empty batch");

  std::vector<Var> feas, locs, pres;
  for (const TrackSample& s : real_batch) {
    TrackEncodeOut t_out = teacher.encode(s.track);
    TrackEncodeOut s_out = student.encode(s.track);
    feas.push_back(loss_fea(t_out.embedding, s_out.embedding));
    if (fol) {
      locs.push_back(loss_loc(s_out.future, t_out.future));
      pres.push_back(loss_pre(s_out.future, s.future));
    }
  }
  auto batch_mean = [&](const std::vector<Var>& v) {
    return ag::mean(ag::concat_cols(v));
  };
  Var fea = batch_mean(feas);
  Var total = fea;
  Var loc, pre;
  if (fol) {
    loc = batch_mean(locs);
    pre = batch_mean(pres);
    total = ag::add(ag::add(fea, loc), pre);
  }

  if (opt != nullptr) {
    opt->zero_grads();
    ag::backward(total);
    opt->step();
  }

  DistillLossReport rep;
  rep.l_fea = fea->val.item();
  rep.l_loc = fol ? loc->val.item() : 0.0;
  rep.l_pre = fol ? pre->val.item() : 0.0;
  rep.l_kd = rep.l_fea + rep.l_loc + rep.l_pre;
  return rep;
}

}  // namespace crossgate::knowd
