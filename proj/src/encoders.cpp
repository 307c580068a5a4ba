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

#include "crossgate/encoders.hpp"

#include <stdexcept>

namespace crossgate {

void EncoderConfig::validate() const {
  if (feature_dim <= 0) throw std::invalid_argument("EncoderConfig: feature_dim must be > 0");
  if (feature_dim % teacher_heads != 0 || feature_dim % psi_heads != 0)
    throw std::invalid_argument("EncoderConfig: heads must divide feature_dim");
  if (region_h % patch_size != 0 || region_w % patch_size != 0)
    throw std::invalid_argument("EncoderConfig: region dims must be divisible by patch size");
  if (t_obs < 1 || p_horizon < 1) throw std::invalid_argument("EncoderConfig: T,P must be >= 1");
}

Tensor track_to_tensor(const BoxTrack& t) {
  Tensor out({static_cast<int64_t>(t.size()), 4});
  for (size_t i = 0; i < t.size(); ++i) {
    out.at(static_cast<int64_t>(i), 0) = t[i].x();
    out.at(static_cast<int64_t>(i), 1) = t[i].y();
    out.at(static_cast<int64_t>(i), 2) = t[i].w();
    out.at(static_cast<int64_t>(i), 3) = t[i].h();
  }
  return out;
}

BoxTrack tensor_to_track(const Tensor& t) {
  std::vector<BoundingBox> boxes;
  boxes.reserve(static_cast<size_t>(t.rows()));
  for (int64_t i = 0; i < t.rows(); ++i)
    boxes.emplace_back(t.at(i, 0), t.at(i, 1), std::max(t.at(i, 2), 1e-9),
                       std::max(t.at(i, 3), 1e-9));
  return BoxTrack(std::move(boxes));
}

// ---------------------------------------------------------------------------
// TeacherEncoder

TeacherEncoder::TeacherEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int64_t d = cfg_.feature_dim;
  input_proj_ = nn::Linear(ps_, rng, 4, d, "input_proj");
  pos_ = ps_.create({cfg_.t_obs, d}, "pos", rng, 0.02);
  for (int i = 0; i < cfg_.teacher_layers; ++i)
    blocks_.emplace_back(ps_, rng, d, cfg_.teacher_heads, cfg_.teacher_mlp,
                         "blk" + std::to_string(i));
  ln_final_ = nn::LayerNorm(ps_, d, "ln_final");
  emb_head_ = nn::Linear(ps_, rng, d, d, "emb_head");
  fol_head_ = nn::Linear(ps_, rng, d, 4 * cfg_.p_horizon, "fol_head");
  cls_head_ = nn::Linear(ps_, rng, d, 2, "cls_head");
}

TrackEncodeOut TeacherEncoder::encode(const BoxTrack& track) const {
  return encode(track_to_tensor(track));
}

TrackEncodeOut TeacherEncoder::encode(const Tensor& track) const {
  if (track.rows() != cfg_.t_obs)
    throw std::invalid_argument("teacher_encode: track length " + std::to_string(track.rows()) +
                                " != T=" + std::to_string(cfg_.t_obs));
  Var x = ag::add(input_proj_(ag::constant(track)), pos_);
  for (const auto& blk : blocks_) x = blk(x, 1);
  Var pooled = ag::group_mean(ln_final_(x), 1);
  TrackEncodeOut out;
  out.embedding = emb_head_(pooled);
  out.future = ag::reshape(ag::sigmoid(fol_head_(pooled)), {cfg_.p_horizon, 4});
  out.cls_logits = cls_head_(pooled);
  return out;
}

// ---------------------------------------------------------------------------
// StudentEncoder

StudentEncoder::StudentEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int64_t c = cfg_.student_channels;
  conv_in_ = nn::Conv2dLayer(ps_, rng, 1, c, 3, "conv_in");
  res1_ = nn::Conv2dLayer(ps_, rng, c, c, 3, "res1");
  res2_ = nn::Conv2dLayer(ps_, rng, c, c, 3, "res2");
  lstm1_ = nn::LstmLayer(ps_, rng, c * 4, cfg_.student_lstm_hidden, "lstm1");
  lstm2_ = nn::LstmLayer(ps_, rng, cfg_.student_lstm_hidden, cfg_.student_lstm_hidden, "lstm2");
  emb_head_ = nn::Linear(ps_, rng, cfg_.student_lstm_hidden, cfg_.feature_dim, "emb_head");
  fol_head_ = nn::Linear(ps_, rng, cfg_.student_lstm_hidden, 4 * cfg_.p_horizon, "fol_head");
}

TrackEncodeOut StudentEncoder::encode(const BoxTrack& track) const {
  return encode(track_to_tensor(track));
}

TrackEncodeOut StudentEncoder::encode(const Tensor& track) const {
  if (track.rows() != cfg_.t_obs)
    throw std::invalid_argument("student_encode: track length mismatch");
  Var fmap = ag::constant(track.reshaped({1, cfg_.t_obs, 4}));
  Var h = ag::gelu(conv_in_(fmap));
  Var r = res2_(ag::gelu(res1_(h)));
  h = ag::gelu(ag::add(h, r));
  Var seq = ag::chw_to_rows(h);  // (T, C*4)
  Var s1 = lstm1_.run(seq);
  Var s2 = lstm2_.run(s1);
  Var last = ag::slice_rows(s2, cfg_.t_obs - 1, cfg_.t_obs);
  TrackEncodeOut out;
  out.embedding = emb_head_(last);
  out.future = ag::reshape(ag::sigmoid(fol_head_(last)), {cfg_.p_horizon, 4});
  return out;
}

// ---------------------------------------------------------------------------
// PsiBackbone

PsiBackbone::PsiBackbone(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int64_t d = cfg_.feature_dim;
  const int64_t n = cfg_.tokens_per_frame();
  const int64_t t = cfg_.t_obs;
  const int64_t patch_dim = 3 * cfg_.patch_size * cfg_.patch_size;
  patch_embed_ = nn::Linear(ps_, rng, patch_dim, d, "patch_embed");
  pos_spatial_ = ps_.create({n, d}, "pos_spatial", rng, 0.02);
  pos_temporal_ = ps_.create({t, d}, "pos_temporal", rng, 0.02);
  blocks_.reserve(cfg_.psi_depth);
  for (int i = 0; i < cfg_.psi_depth; ++i) {
    const std::string nm = "blk" + std::to_string(i);
    DividedBlock b{nn::LayerNorm(ps_, d, nm + ".ln_t"),
                   nn::LayerNorm(ps_, d, nm + ".ln_s"),
                   nn::LayerNorm(ps_, d, nm + ".ln_m"),
                   nn::MultiHeadAttention(ps_, rng, d, cfg_.psi_heads, nm + ".attn_t"),
                   nn::MultiHeadAttention(ps_, rng, d, cfg_.psi_heads, nm + ".attn_s"),
                   nn::Linear(ps_, rng, d, cfg_.psi_mlp, nm + ".fc1"),
                   nn::Linear(ps_, rng, cfg_.psi_mlp, d, nm + ".fc2")};
    blocks_.push_back(std::move(b));
  }
  ln_final_ = nn::LayerNorm(ps_, d, "ln_final");
  head_ = nn::Linear(ps_, rng, d, d, "head");

  to_temporal_.resize(static_cast<size_t>(n * t));
  to_spatial_.resize(static_cast<size_t>(n * t));
  for (int64_t p = 0; p < n; ++p)
    for (int64_t tt = 0; tt < t; ++tt) to_temporal_[static_cast<size_t>(p * t + tt)] = tt * n + p;
  for (int64_t tt = 0; tt < t; ++tt)
    for (int64_t p = 0; p < n; ++p) to_spatial_[static_cast<size_t>(tt * n + p)] = p * t + tt;
}

Var PsiBackbone::embed_tokens(const RasterStack& regions) const {
  Tensor d({regions.t, regions.c, regions.h, regions.w});
  for (int64_t i = 0; i < d.numel(); ++i) d[i] = static_cast<double>(regions.data[static_cast<size_t>(i)]);
  return embed_tokens(d);
}

Var PsiBackbone::embed_tokens(const Tensor& regions) const {
  if (regions.ndim() != 4)
    throw std::invalid_argument("psi_encode: expected (T,c,h,w) region stack");
  const int64_t t = regions.dim(0), c = regions.dim(1), h = regions.dim(2), w = regions.dim(3);
  if (c != 1 && c != 3) throw std::invalid_argument("psi_encode: channels must be 1 or 3");
  if (t != cfg_.t_obs || h != cfg_.region_h || w != cfg_.region_w)
    throw std::invalid_argument("psi_encode: region stack dims mismatch config");
  const int64_t p = cfg_.patch_size;
  const int64_t gh = h / p, gw = w / p, n = gh * gw;

  Tensor patches({t * n, 3 * p * p});
  auto px = [&](int64_t ti, int64_t ci, int64_t y, int64_t x) {
    const int64_t src_c = (c == 1) ? 0 : ci;  // channel replication for c=1
    return regions[((ti * c + src_c) * h + y) * w + x];
  };
  for (int64_t ti = 0; ti < t; ++ti)
    for (int64_t gy = 0; gy < gh; ++gy)
      for (int64_t gx = 0; gx < gw; ++gx) {
        const int64_t row = ti * n + gy * gw + gx;
        int64_t col = 0;
        for (int64_t ci = 0; ci < 3; ++ci)
          for (int64_t dy = 0; dy < p; ++dy)
            for (int64_t dx = 0; dx < p; ++dx)
              patches.at(row, col++) = px(ti, ci, gy * p + dy, gx * p + dx);
      }

  std::vector<int64_t> sp_idx(static_cast<size_t>(t * n)), tm_idx(static_cast<size_t>(t * n));
  for (int64_t ti = 0; ti < t; ++ti)
    for (int64_t pi = 0; pi < n; ++pi) {
      sp_idx[static_cast<size_t>(ti * n + pi)] = pi;
      tm_idx[static_cast<size_t>(ti * n + pi)] = ti;
    }
  Var x = patch_embed_(ag::constant(std::move(patches)));
  x = ag::add(x, ag::index_rows(pos_spatial_, sp_idx));
  x = ag::add(x, ag::index_rows(pos_temporal_, tm_idx));
  return x;
}

Var PsiBackbone::run_blocks(const Var& tokens, int from, int to) const {
  const int64_t n = cfg_.tokens_per_frame();
  const int64_t t = cfg_.t_obs;
  Var x = tokens;
  for (int i = from; i < to; ++i) {
    const DividedBlock& b = blocks_[static_cast<size_t>(i)];
    // temporal attention over same-position tokens across frames
    Var xt = ag::index_rows(b.ln_t(x), to_temporal_);
    Var ht = b.attn_t(xt, n);
    x = ag::add(x, ag::index_rows(ht, to_spatial_));
    // spatial attention within each frame
    x = ag::add(x, b.attn_s(b.ln_s(x), t));
    x = ag::add(x, b.fc2(ag::gelu(b.fc1(b.ln_m(x)))));
  }
  return x;
}

Var PsiBackbone::finish(const Var& tokens) const {
  return head_(ag::group_mean(ln_final_(tokens), 1));
}

Var PsiBackbone::encode(const RasterStack& regions) const {
  return finish(run_blocks(embed_tokens(regions), 0, cfg_.psi_depth));
}

Var PsiBackbone::encode(const Tensor& regions) const {
  return finish(run_blocks(embed_tokens(regions), 0, cfg_.psi_depth));
}

}  // namespace crossgate
