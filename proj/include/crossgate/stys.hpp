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

#ifndef CROSSGATE_STYS_HPP_
#define CROSSGATE_STYS_HPP_

#include "crossgate/datamodel.hpp"
#include "crossgate/encoders.hpp"

namespace crossgate::stys {

// Pedestrian-centric crop stack; each region is the beta-scaled box rectangle
// clipped to the frame and bilinearly resampled to (h,w).
struct RegionStack {
  Tensor regions;  // (T,c,h,w) double
  BoxTrack trace;
  double beta = 1.5;
};

RegionStack crop_local_region(const Clip& clip, double beta, int out_h, int out_w);
// Same crop pipeline over an arbitrary raster stack (depth/semantic streams).
RegionStack crop_raster(const RasterStack& frames, const BoxTrack& track, double beta, int out_h,
                        int out_w);

// Re-targets per-channel statistics of content to those of style; statistics
// are taken over spatial positions per frame (rows grouped into `frames`
// consecutive blocks). eps_num guards degenerate (constant) channels.
Var adain(const Var& content_feat, const Var& style_feat, int64_t frames, double eps_num = 1e-5);

struct StyleTransferOut {
  Var f_st;      // f_psi of the style-transferred stack
  Var f_real;    // f_psi of the content (real) stack; reused by DistA and LGU
  Var loss_con;  // MSE(f_psi(real), f_psi(st))
  Var loss_sty;  // MSE of (mean, variance) of f_psi(syn) vs f_psi(st)
  Var l_st;      // loss_con + alpha * loss_sty
};

class StyleShifter {
 public:
  StyleShifter(PsiBackbone& psi, double beta = 1.5, double alpha = 10.0, int insert_block = 1);

  StyleTransferOut encode(const Clip& real_clip, const Clip& syn_clip) const;
  // Region-level entry point shared with tests; content/style are (T,3,h,w).
  StyleTransferOut encode_regions(const Tensor& content, const Tensor& style) const;

  double beta() const { return beta_; }
  double alpha() const { return alpha_; }

 private:
  PsiBackbone* psi_;
  double beta_, alpha_;
  int insert_block_;
};

}  // namespace crossgate::stys

#endif  // CROSSGATE_STYS_HPP_
