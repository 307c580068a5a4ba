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

#include "crossgate/stys.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crossgate::stys {

namespace {

// Clamped bilinear lookup at continuous (y,x) in pixel coordinates.
double sample_bilinear(const RasterStack& r, int64_t t, int64_t c, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(r.h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(r.w - 1));
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const int64_t y1 = std::min(y0 + 1, r.h - 1);
  const int64_t x1 = std::min(x0 + 1, r.w - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double v00 = r.at(t, c, y0, x0), v01 = r.at(t, c, y0, x1);
  const double v10 = r.at(t, c, y1, x0), v11 = r.at(t, c, y1, x1);
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

}  // namespace

RegionStack crop_raster(const RasterStack& frames, const BoxTrack& track, double beta, int out_h,
                        int out_w) {
  if (track.size() == 0) throw std::invalid_argument("crop_local_region: empty track");
  if (track.size() != static_cast<size_t>(frames.t))
    throw std::invalid_argument("crop_local_region: track/frame count mismatch");
  if (beta < 1.0) throw std::invalid_argument("crop_local_region: beta must be >= 1");

  RegionStack out;
  out.beta = beta;
  out.trace = track;
  out.regions = Tensor({frames.t, frames.c, out_h, out_w});
  const double W = static_cast<double>(frames.w), H = static_cast<double>(frames.h);
  for (int64_t t = 0; t < frames.t; ++t) {
    const BoundingBox& b = track[static_cast<size_t>(t)];
    // beta-scaled window around the box center, clipped to frame bounds
    double x0 = (b.x() - beta * b.w() / 2.0) * W;
    double x1 = (b.x() + beta * b.w() / 2.0) * W;
    double y0 = (b.y() - beta * b.h() / 2.0) * H;
    double y1 = (b.y() + beta * b.h() / 2.0) * H;
    x0 = std::max(x0, 0.0);
    y0 = std::max(y0, 0.0);
    x1 = std::min(x1, W);
    y1 = std::min(y1, H);
    const double sw = std::max(x1 - x0, 1.0), sh = std::max(y1 - y0, 1.0);
    for (int64_t c = 0; c < frames.c; ++c)
      for (int64_t oy = 0; oy < out_h; ++oy)
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const double sy = y0 + (static_cast<double>(oy) + 0.5) / out_h * sh - 0.5;
          const double sx = x0 + (static_cast<double>(ox) + 0.5) / out_w * sw - 0.5;
          out.regions[((t * frames.c + c) * out_h + oy) * out_w + ox] =
              sample_bilinear(frames, t, c, sy, sx);
        }
  }
  return out;
}

RegionStack crop_local_region(const Clip& clip, double beta, int out_h, int out_w) {
  if (clip.frames.empty()) throw std::invalid_argument("crop_local_region: clip has no frames");
  return crop_raster(clip.frames, clip.track, beta, out_h, out_w);
}

Var adain(const Var& content_feat, const Var& style_feat, int64_t frames, double eps_num) {
  if (content_feat->val.cols() != style_feat->val.cols())
    throw std::invalid_argument("adain: channel count mismatch");
  if (content_feat->val.rows() % frames != 0 || style_feat->val.rows() % frames != 0)
    throw std::invalid_argument("adain: rows not divisible into frames");
  const int64_t rep_c = content_feat->val.rows() / frames;
  const int64_t rep_s = style_feat->val.rows() / frames;
  const double eps2 = eps_num * eps_num;

  Var mu_c = ag::group_mean(content_feat, frames);
  Var mu_s = ag::group_mean(style_feat, frames);
  Var sd_c = ag::sqrt(ag::scalar_add(ag::group_var(content_feat, frames), eps2));
  Var sd_s = ag::sqrt(ag::scalar_add(ag::group_var(style_feat, frames), eps2));
  Var scale = ag::div(sd_s, sd_c);
  Var centered = ag::sub(content_feat, ag::group_expand(mu_c, rep_c));
  (void)rep_s;
  return ag::add(ag::mul(centered, ag::group_expand(scale, rep_c)),
                 ag::group_expand(mu_s, rep_c));
}

StyleShifter::StyleShifter(PsiBackbone& psi, double beta, double alpha, int insert_block)
    : psi_(&psi), beta_(beta), alpha_(alpha), insert_block_(insert_block) {
  if (insert_block_ < 0 || insert_block_ > psi.depth())
    throw std::invalid_argument("StyleShifter: insert_block outside backbone depth");
}

StyleTransferOut StyleShifter::encode_regions(const Tensor& content, const Tensor& style) const {
  const int64_t t = content.dim(0);
  Var xc = psi_->run_blocks(psi_->embed_tokens(content), 0, insert_block_);
  Var xs = psi_->run_blocks(psi_->embed_tokens(style), 0, insert_block_);
  Var x_st = adain(xc, xs, t);

  StyleTransferOut out;
  out.f_st = psi_->finish(psi_->run_blocks(x_st, insert_block_, psi_->depth()));
  out.f_real = psi_->finish(psi_->run_blocks(xc, insert_block_, psi_->depth()));
  Var f_syn = ag::detach(psi_->finish(psi_->run_blocks(xs, insert_block_, psi_->depth())));

  out.loss_con = ag::mse(out.f_real, out.f_st);
  // "MSE of the vector mean and variance" over the embedding entries; the
  // style side is a fixed target.
  auto stats = [](const Var& v) {
    Var m = ag::mean(v);
    Var var = ag::sub(ag::mean(ag::square(v)), ag::square(m));
    return std::pair<Var, Var>(m, var);
  };
  auto [m_syn, v_syn] = stats(f_syn);
  auto [m_st, v_st] = stats(out.f_st);
  out.loss_sty = ag::scalar_mul(
      ag::add(ag::square(ag::sub(m_syn, m_st)), ag::square(ag::sub(v_syn, v_st))), 0.5);
  out.l_st = ag::add(out.loss_con, ag::scalar_mul(out.loss_sty, alpha_));
  return out;
}

StyleTransferOut StyleShifter::encode(const Clip& real_clip, const Clip& syn_clip) const {
  if (syn_clip.frames.empty() || syn_clip.frames.c != 3)
    throw std::invalid_argument("style_transfer_encode: style clip must carry RGB frames");
  if (real_clip.frames.empty())
    throw std::invalid_argument("style_transfer_encode: content clip has no frames");
  RegionStack content = crop_local_region(real_clip, beta_, psi_->region_h(), psi_->region_w());
  RegionStack style = crop_local_region(syn_clip, beta_, psi_->region_h(), psi_->region_w());
  return encode_regions(content.regions, style.regions);
}

}  // namespace crossgate::stys
