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

#include "crossgate/encoders.hpp"
#include "crossgate/knowd.hpp"
#include "support/test_util.hpp"

using namespace crossgate;
using testutil::gradcheck;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.feature_dim = 16;
  cfg.t_obs = 4;
  cfg.p_horizon = 8;
  cfg.teacher_layers = 2;
  cfg.teacher_heads = 2;
  cfg.teacher_mlp = 32;
  cfg.student_channels = 4;
  cfg.student_lstm_hidden = 12;
  cfg.psi_depth = 1;
  cfg.psi_heads = 2;
  cfg.psi_mlp = 32;
  cfg.patch_size = 4;
  cfg.region_h = 8;
  cfg.region_w = 8;
  return cfg;
}

BoxTrack random_track(Rng& rng, int t) {
  std::vector<BoundingBox> boxes;
  for (int i = 0; i < t; ++i)
    boxes.emplace_back(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.3),
                       rng.uniform(0.05, 0.3));
  return BoxTrack(std::move(boxes));
}

Tensor random_regions(Rng& rng, const EncoderConfig& cfg, int64_t c) {
  Tensor t({cfg.t_obs, c, cfg.region_h, cfg.region_w});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("teacher and student output shapes and clamped futures") {
  const EncoderConfig cfg = tiny_config();
  Rng rng(31);
  TeacherEncoder teacher(cfg, rng);
  StudentEncoder student(cfg, rng);
  const BoxTrack track = random_track(rng, cfg.t_obs);

  const TrackEncodeOut t_out = teacher.encode(track);
  CHECK(t_out.embedding->val.rows() == 1);
  CHECK(t_out.embedding->val.cols() == cfg.feature_dim);
  CHECK(t_out.future->val.rows() == cfg.p_horizon);
  CHECK(t_out.future->val.cols() == 4);
  CHECK(t_out.cls_logits->val.cols() == 2);
  for (int64_t i = 0; i < t_out.future->val.numel(); ++i) {
    CHECK(t_out.future->val[i] > 0.0);
    CHECK(t_out.future->val[i] < 1.0);
  }

  const TrackEncodeOut s_out = student.encode(track);
  CHECK(s_out.embedding->val.cols() == cfg.feature_dim);
  CHECK(s_out.future->val.rows() == cfg.p_horizon);
  CHECK(s_out.embedding->val.all_finite());

  // no accidental weight sharing between untrained teacher and student
  bool differ = false;
  for (int64_t i = 0; i < cfg.feature_dim; ++i)
    differ |= t_out.embedding->val[i] != s_out.embedding->val[i];
  CHECK(differ);

  CHECK_THROWS(teacher.encode(random_track(rng, cfg.t_obs + 1)));
  CHECK_THROWS(student.encode(random_track(rng, cfg.t_obs - 1)));
}

TEST_CASE("per-item outputs are independent of batch order") {
  const EncoderConfig cfg = tiny_config();
  Rng rng(32);
  TeacherEncoder teacher(cfg, rng);
  std::vector<BoxTrack> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_track(rng, cfg.t_obs));

  std::vector<Tensor> fwd;
  for (const auto& t : batch) fwd.push_back(teacher.encode(t).embedding->val);
  for (int i = 3; i >= 0; --i) {
    const Tensor again = teacher.encode(batch[static_cast<size_t>(i)]).embedding->val;
    for (int64_t j = 0; j < again.numel(); ++j)
      CHECK(again[j] == fwd[static_cast<size_t>(i)][j]);
  }
}

TEST_CASE("forward pass is bitwise deterministic for a fixed seed") {
  const EncoderConfig cfg = tiny_config();
  const BoxTrack track = random_track(*std::make_unique<Rng>(7), cfg.t_obs);
  Rng rng_a(33), rng_b(33);
  TeacherEncoder ta(cfg, rng_a), tb(cfg, rng_b);
  const Tensor ea = ta.encode(track).embedding->val;
  const Tensor eb = tb.encode(track).embedding->val;
  for (int64_t i = 0; i < ea.numel(); ++i) CHECK(ea[i] == eb[i]);

  Rng rng_c(33), rng_d(33);
  PsiBackbone pa(cfg, rng_c), pb(cfg, rng_d);
  Rng data_rng(5);
  const Tensor regions = random_regions(data_rng, cfg, 3);
  const Tensor fa = pa.encode(regions)->val;
  const Tensor fb = pb.encode(regions)->val;
  for (int64_t i = 0; i < fa.numel(); ++i) CHECK(fa[i] == fb[i]);
}

TEST_CASE("student is lighter than the teacher at the default configuration") {
  EncoderConfig cfg;  // defaults
  Rng rng(34);
  TeacherEncoder teacher(cfg, rng);
  StudentEncoder student(cfg, rng);
  // oracle: count parameters
  int64_t teacher_n = 0, student_n = 0;
  for (const auto& p : teacher.params().params()) teacher_n += p->val.numel();
  for (const auto& p : student.params().params()) student_n += p->val.numel();
  CHECK(teacher_n == teacher.params().param_count());
  CHECK(student_n == student.params().param_count());
  CHECK(student_n < teacher_n);
}

TEST_CASE("psi token grid matches the patch arithmetic oracle") {
  EncoderConfig cfg;  // defaults: 64x64 regions, patch 8, T=16
  Rng rng(35);
  PsiBackbone psi(cfg, rng);
  Rng data_rng(6);
  Tensor regions({cfg.t_obs, 3, cfg.region_h, cfg.region_w});
  for (int64_t i = 0; i < regions.numel(); ++i) regions[i] = data_rng.uniform();
  const Var tokens = psi.embed_tokens(regions);
  const int64_t per_frame = (cfg.region_h / cfg.patch_size) * (cfg.region_w / cfg.patch_size);
  CHECK(per_frame == 64);
  CHECK(tokens->val.rows() == cfg.t_obs * per_frame);
  CHECK(tokens->val.cols() == cfg.feature_dim);
}

TEST_CASE("psi handles degenerate input and replicates single channels") {
  const EncoderConfig cfg = tiny_config();
  Rng rng(36);
  PsiBackbone psi(cfg, rng);

  Tensor zeros({cfg.t_obs, 3, cfg.region_h, cfg.region_w});
  const Var f = psi.encode(zeros);
  CHECK(f->val.all_finite());

  Rng data_rng(8);
  const Tensor depth = random_regions(data_rng, cfg, 1);
  Tensor replicated({cfg.t_obs, 3, cfg.region_h, cfg.region_w});
  const int64_t plane = cfg.region_h * cfg.region_w;
  for (int64_t t = 0; t < cfg.t_obs; ++t)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < plane; ++i)
        replicated[(t * 3 + c) * plane + i] = depth[t * plane + i];
  const Tensor f1 = psi.encode(depth)->val;
  const Tensor f3 = psi.encode(replicated)->val;
  for (int64_t i = 0; i < f1.numel(); ++i) CHECK(f1[i] == f3[i]);

  CHECK_THROWS(psi.encode(Tensor({cfg.t_obs, 2, cfg.region_h, cfg.region_w})));
  CHECK_THROWS(psi.encode(Tensor({cfg.t_obs, 3, cfg.region_h + 1, cfg.region_w})));
}

TEST_CASE("embedding dimensions agree across the three encoders") {
  const EncoderConfig cfg = tiny_config();
  Rng rng(37);
  TeacherEncoder teacher(cfg, rng);
  StudentEncoder student(cfg, rng);
  PsiBackbone psi(cfg, rng);
  Rng data_rng(9);
  const BoxTrack track = random_track(data_rng, cfg.t_obs);
  const Tensor regions = random_regions(data_rng, cfg, 3);
  const int64_t d_t = teacher.encode(track).embedding->val.cols();
  const int64_t d_s = student.encode(track).embedding->val.cols();
  const int64_t d_p = psi.encode(regions)->val.cols();
  CHECK(d_t == d_s);
  CHECK(d_s == d_p);
}

TEST_CASE("analytic gradients match central differences for every encoder") {
  const EncoderConfig cfg = tiny_config();
  Rng rng(38);
  TeacherEncoder teacher(cfg, rng);
  StudentEncoder student(cfg, rng);
  PsiBackbone psi(cfg, rng);
  Rng data_rng(10);
  const Tensor track = track_to_tensor(random_track(data_rng, cfg.t_obs));
  const Tensor regions = random_regions(data_rng, cfg, 3);

  auto teacher_loss = [&] {
    const TrackEncodeOut out = teacher.encode(track);
    return ag::add(ag::mean(ag::square(out.embedding)), ag::mean(ag::square(out.future)));
  };
  auto student_loss = [&] {
    const TrackEncodeOut out = student.encode(track);
    return ag::add(ag::mean(ag::square(out.embedding)), ag::mean(ag::square(out.future)));
  };
  auto psi_loss = [&] { return ag::mean(ag::square(psi.encode(regions))); };

  Rng slice_rng(11);
  auto check_store = [&](const nn::ParamStore& ps, const std::function<Var()>& loss) {
    // a spread of parameters: first, middle, last
    const auto& params = ps.params();
    for (size_t idx : {size_t{0}, params.size() / 2, params.size() - 1}) {
      const Var& p = params[idx];
      const double err = gradcheck(loss, p, testutil::param_slice(p, slice_rng, 5));
      CHECK(err < 1e-3);
    }
  };
  check_store(teacher.params(), teacher_loss);
  check_store(student.params(), student_loss);
  check_store(psi.params(), psi_loss);
}

TEST_CASE("teacher trained on constant tracks reproduces the input box") {
  EncoderConfig cfg = tiny_config();
  cfg.t_obs = 8;
  cfg.p_horizon = 8;
  cfg.feature_dim = 32;
  cfg.teacher_heads = 4;
  cfg.teacher_mlp = 64;
  Rng rng(39);

  std::vector<knowd::TrackSample> samples;
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0.2, 0.8), y = rng.uniform(0.2, 0.8);
    const double w = rng.uniform(0.1, 0.3), h = rng.uniform(0.1, 0.3);
    std::vector<BoundingBox> obs(8, BoundingBox(x, y, w, h));
    std::vector<BoundingBox> fut(8, BoundingBox(x, y, w, h));
    knowd::TrackSample s;
    s.track = track_to_tensor(BoxTrack(obs));
    s.future = track_to_tensor(BoxTrack(fut));
    s.label = CrossLabel::kCrossing;
    samples.push_back(std::move(s));
  }

  knowd::TeacherTrainOptions opt;
  opt.epochs = 350;
  opt.lr = 2e-3;
  opt.batch_size = 8;
  opt.lr_decay = 0.85;
  opt.lr_decay_every = 30;
  std::vector<double> log;
  auto teacher = knowd::train_teacher(cfg, samples, opt, rng, &log);

  REQUIRE(log.size() == 350);
  CHECK(log.back() < log.front());

  double worst = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const TrackEncodeOut out = teacher->encode(samples[i].track);
    for (int64_t j = 0; j < out.future->val.numel(); ++j)
      worst = std::max(worst, std::abs(out.future->val[j] - samples[i].future[j]));
  }
  CHECK(worst <= 1e-2);
}
