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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crossgate/knowd.hpp"
#include "crossgate/syngen.hpp"
#include "support/test_util.hpp"

using namespace crossgate;
using namespace crossgate::knowd;

namespace {

EncoderConfig track_config() {
  EncoderConfig cfg;
  cfg.feature_dim = 32;
  cfg.t_obs = 8;
  cfg.p_horizon = 8;
  cfg.teacher_layers = 2;
  cfg.teacher_heads = 4;
  cfg.teacher_mlp = 64;
  cfg.student_channels = 4;
  cfg.student_lstm_hidden = 24;
  cfg.psi_depth = 1;
  cfg.psi_heads = 2;
  cfg.psi_mlp = 32;
  cfg.patch_size = 4;
  cfg.region_h = 8;
  cfg.region_w = 8;
  return cfg;
}

syngen::SceneSpec track_scene(uint64_t seed) {
  syngen::SceneSpec s;
  s.seed = seed;
  s.frame_h = 16;
  s.frame_w = 16;
  s.t_obs = 8;
  s.p_horizon = 8;
  s.ttc_min = 4;
  s.ttc_max = 8;
  return s;
}

TrackSample sample_from_clip(const Clip& c) {
  TrackSample s;
  s.track = track_to_tensor(c.track);
  s.future = track_to_tensor(c.future_track);
  s.label = c.label;
  return s;
}

std::vector<TrackSample> make_tracks(const syngen::SceneSpec& spec, Domain domain, int n,
                                     int offset = 0) {
  std::vector<TrackSample> out;
  for (int i = 0; i < n; ++i) {
    const CrossLabel l = i % 2 ? CrossLabel::kCrossing : CrossLabel::kNotCrossing;
    out.push_back(sample_from_clip(syngen::generate_clip(spec, domain, l, offset + i)));
  }
  return out;
}

double held_out_lpre(StudentEncoder& student, const std::vector<TrackSample>& held) {
  double sum = 0;
  for (const auto& s : held) {
    const TrackEncodeOut out = student.encode(s.track);
    sum += loss_pre(out.future, s.future)->val.item();
  }
  return sum / static_cast<double>(held.size());
}

}  // namespace

TEST_CASE("loss_fea examples and oracle") {
  Rng rng(41);
  Var same = ag::leaf(rng.normal_tensor({1, 6}, 1.0), "f");
  CHECK(loss_fea(same, same)->val.item() == 0.0);

  for (int i = 0; i < 50; ++i) {
    Var a = ag::leaf(rng.normal_tensor({1, 6}, 1.0), "a");
    Var b = ag::leaf(rng.normal_tensor({1, 6}, 1.0), "b");
    CHECK(loss_fea(a, b)->val.item() >= 0.0);
  }

  // hand-computed KLD of softmax([1,0]) vs softmax([0,1]) with explicit exp/log
  Var ft = ag::leaf(Tensor::row({1.0, 0.0}), "ft");
  Var fs = ag::leaf(Tensor::row({0.0, 1.0}), "fs");
  const double e = std::exp(1.0);
  const double p0 = e / (e + 1.0), p1 = 1.0 / (e + 1.0);
  const double q0 = 1.0 / (1.0 + e), q1 = e / (1.0 + e);
  const double expect = p0 * std::log(p0 / q0) + p1 * std::log(p1 / q1);
  CHECK(loss_fea(ft, fs)->val.item() == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS(loss_fea(ag::leaf(Tensor::row({1.0}), "x"), fs));
}

TEST_CASE("loss_loc and loss_pre match the MSE definition") {
  const int P = 8;
  Tensor a({P, 4}), b({P, 4});
  Var va = ag::leaf(a, "a"), vb = ag::leaf(b, "b");
  CHECK(loss_loc(va, vb)->val.item() == 0.0);

  Tensor c({P, 4});
  c.at(3, 2) = 1.0;  // unit offset on one coordinate of one box
  CHECK(loss_loc(ag::leaf(c, "c"), vb)->val.item() ==
        doctest::Approx(1.0 / (4.0 * P)).epsilon(1e-12));
  // symmetric in argument swap
  CHECK(loss_loc(vb, ag::leaf(c, "c"))->val.item() ==
        doctest::Approx(1.0 / (4.0 * P)).epsilon(1e-12));

  CHECK(loss_pre(ag::leaf(c, "c"), b)->val.item() ==
        doctest::Approx(1.0 / (4.0 * P)).epsilon(1e-12));
  CHECK(loss_pre(vb, b)->val.item() == 0.0);
}

TEST_CASE("train_teacher: loss decreases, retrain deterministic, freeze enforced") {
  const EncoderConfig cfg = track_config();
  const syngen::SceneSpec scene = track_scene(50);
  const std::vector<TrackSample> tracks = make_tracks(scene, Domain::kSynthetic, 40);

  TeacherTrainOptions opt;
  opt.epochs = 10;
  opt.lr = 1e-3;
  opt.batch_size = 4;

  Rng rng1(42);
  std::vector<double> log1;
  auto t1 = train_teacher(cfg, tracks, opt, rng1, &log1);
  REQUIRE(log1.size() == 10);
  CHECK(log1.back() < log1.front());
  CHECK(t1->frozen());

  Rng rng2(42);
  std::vector<double> log2;
  auto t2 = train_teacher(cfg, tracks, opt, rng2, &log2);
  CHECK(t1->param_hash() == t2->param_hash());
  CHECK(log1 == log2);

  // gradient application to a frozen teacher raises
  CHECK_THROWS_AS(nn::Adam(t1->params().params(), 1e-3).step(), std::logic_error);

  CHECK_THROWS_AS(train_teacher(cfg, {}, opt, rng1, nullptr), ConfigError);
}

TEST_CASE("distill_step: freeze contract, additivity, gradient routing") {
  const EncoderConfig cfg = track_config();
  const syngen::SceneSpec scene = track_scene(51);
  const std::vector<TrackSample> syn = make_tracks(scene, Domain::kSynthetic, 30);
  const std::vector<TrackSample> real = make_tracks(scene, Domain::kReal, 8);

  Rng rng(43);
  TeacherTrainOptions topt;
  topt.epochs = 4;
  topt.lr = 1e-3;
  topt.batch_size = 4;
  auto teacher = train_teacher(cfg, syn, topt, rng, nullptr);
  StudentEncoder student(cfg, rng);

  // unfrozen teacher rejected
  TeacherEncoder unfrozen(cfg, rng);
  CHECK_THROWS_AS(distill_step(real, unfrozen, student, nullptr), std::logic_error);

  const uint64_t teacher_hash = teacher->param_hash();
  nn::Adam opt(student.params().params(), 1e-3);
  DistillLossReport last{};
  for (int i = 0; i < 100; ++i) {
    last = distill_step(real, *teacher, student, &opt);
    CHECK(last.l_fea >= 0.0);
    CHECK(last.l_loc >= 0.0);
    CHECK(last.l_pre >= 0.0);
    CHECK(last.l_kd == last.l_fea + last.l_loc + last.l_pre);  // exact
  }
  CHECK(std::isfinite(last.l_kd));
  // teacher parameters bitwise unchanged across 100 distill steps
  CHECK(teacher->param_hash() == teacher_hash);
}

TEST_CASE("distillation reaches the teacher-matching fixed point on a small set") {
  const EncoderConfig cfg = track_config();
  const syngen::SceneSpec scene = track_scene(52);
  const std::vector<TrackSample> syn = make_tracks(scene, Domain::kSynthetic, 40);
  const std::vector<TrackSample> real = make_tracks(scene, Domain::kReal, 4);

  Rng rng(44);
  TeacherTrainOptions topt;
  topt.epochs = 8;
  topt.lr = 1e-3;
  topt.batch_size = 4;
  auto teacher = train_teacher(cfg, syn, topt, rng, nullptr);
  StudentEncoder student(cfg, rng);
  nn::Adam opt(student.params().params(), 2e-3);

  DistillLossReport rep{};
  for (int i = 0; i < 800; ++i) rep = distill_step(real, *teacher, student, &opt);
  // self-distillation fixed point: teacher-matching terms driven toward zero
  CHECK(rep.l_fea < 5e-3);
  CHECK(rep.l_loc < 5e-4);
}

TEST_CASE("FOL head output stays a valid track of length P") {
  const EncoderConfig cfg = track_config();
  Rng rng(45);
  StudentEncoder student(cfg, rng);
  const syngen::SceneSpec scene = track_scene(53);
  const auto tracks = make_tracks(scene, Domain::kReal, 5);
  for (const auto& s : tracks) {
    const TrackEncodeOut out = student.encode(s.track);
    CHECK(out.future->val.rows() == cfg.p_horizon);
    for (int64_t i = 0; i < out.future->val.numel(); ++i) {
      CHECK(out.future->val[i] >= 0.0);
      CHECK(out.future->val[i] <= 1.0);
    }
  }
}

TEST_CASE("distillation lowers held-out FOL error versus training without it") {
  const EncoderConfig cfg = track_config();
  double distilled_sum = 0.0, plain_sum = 0.0;

  for (uint64_t seed : {60, 61, 62}) {
    const syngen::SceneSpec scene = track_scene(seed);
    const std::vector<TrackSample> syn = make_tracks(scene, Domain::kSynthetic, 150);
    const std::vector<TrackSample> real_train = make_tracks(scene, Domain::kReal, 24);
    const std::vector<TrackSample> real_held = make_tracks(scene, Domain::kReal, 60, 1000);

    Rng rng(seed);
    TeacherTrainOptions topt;
    topt.epochs = 12;
    topt.lr = 1e-3;
    topt.batch_size = 8;
    auto teacher = train_teacher(cfg, syn, topt, rng, nullptr);

    // distilled student: all three losses
    StudentEncoder s_distilled(cfg, rng);
    {
      nn::Adam opt(s_distilled.params().params(), 1e-3);
      for (int epoch = 0; epoch < 30; ++epoch)
        for (size_t i = 0; i < real_train.size(); i += 4) {
          std::vector<TrackSample> batch(real_train.begin() + static_cast<long>(i),
                                         real_train.begin() +
                                             static_cast<long>(std::min(i + 4, real_train.size())));
          distill_step(batch, *teacher, s_distilled, &opt);
        }
    }
    // control: same schedule, FOL-accuracy term only
    StudentEncoder s_plain(cfg, rng);
    {
      nn::Adam opt(s_plain.params().params(), 1e-3);
      for (int epoch = 0; epoch < 30; ++epoch)
        for (size_t i = 0; i < real_train.size(); i += 4) {
          std::vector<Var> terms;
          for (size_t j = i; j < std::min(i + 4, real_train.size()); ++j) {
            const TrackEncodeOut out = s_plain.encode(real_train[j].track);
            terms.push_back(loss_pre(out.future, real_train[j].future));
          }
          Var loss = ag::mean(ag::concat_cols(terms));
          opt.zero_grads();
          ag::backward(loss);
          opt.step();
        }
    }
    distilled_sum += held_out_lpre(s_distilled, real_held);
    plain_sum += held_out_lpre(s_plain, real_held);
  }
  CHECK(distilled_sum / 3.0 <= plain_sum / 3.0);
}
