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

#ifndef CROSSGATE_ENCODERS_HPP_
#define CROSSGATE_ENCODERS_HPP_

#include <memory>
#include <string>

#include "crossgate/datamodel.hpp"
#include "crossgate/nn.hpp"

namespace crossgate {

struct EncoderConfig {
  int64_t feature_dim = 64;  // shared embedding dimension D
  int t_obs = 16;
  int p_horizon = 16;
  // teacher (box-sequence transformer)
  int teacher_layers = 3;
  int teacher_heads = 8;
  int64_t teacher_mlp = 256;
  // student (conv + LSTM)
  int student_channels = 8;
  int64_t student_lstm_hidden = 100;
  // shared backbone psi (divided space-time attention)
  int psi_depth = 2;
  int psi_heads = 8;
  int64_t psi_mlp = 256;
  int patch_size = 8;
  int region_h = 64, region_w = 64;
  double dropout = 0.5;

  void validate() const;
  int64_t tokens_per_frame() const {
    return static_cast<int64_t>(region_h / patch_size) * (region_w / patch_size);
  }
};

Tensor track_to_tensor(const BoxTrack& t);
BoxTrack tensor_to_track(const Tensor& t);

struct TrackEncodeOut {
  Var embedding;   // (1,D)
  Var future;      // (P,4), coordinates in (0,1) via sigmoid
  Var cls_logits;  // (1,2); teacher only (empty Var for the student)
};

// Box-sequence transformer; pretrained on synthetic tracks and then frozen
// for distillation.
class TeacherEncoder {
 public:
  TeacherEncoder(const EncoderConfig& cfg, Rng& rng);

  TrackEncodeOut encode(const BoxTrack& track) const;
  TrackEncodeOut encode(const Tensor& track) const;

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  void freeze() { ps_.freeze(); }
  bool frozen() const { return ps_.frozen(); }
  uint64_t param_hash() const { return ps_.content_hash(); }

 private:
  EncoderConfig cfg_;
  nn::ParamStore ps_;
  nn::Linear input_proj_;
  Var pos_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm ln_final_;
  nn::Linear emb_head_, fol_head_, cls_head_;
};

// Lightweight conv + LSTM encoder over the box sequence rendered as a
// (1, T, 4) feature map; mirrors the teacher's output heads.
class StudentEncoder {
 public:
  StudentEncoder(const EncoderConfig& cfg, Rng& rng);

  TrackEncodeOut encode(const BoxTrack& track) const;
  TrackEncodeOut encode(const Tensor& track) const;

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

 private:
  EncoderConfig cfg_;
  nn::ParamStore ps_;
  nn::Conv2dLayer conv_in_, res1_, res2_;
  nn::LstmLayer lstm1_, lstm2_;
  nn::Linear emb_head_, fol_head_;
};

// Divided space-time attention backbone shared by the style and distribution
// pathways. Single-channel stacks are channel-replicated to 3 before
// patching.
class PsiBackbone {
 public:
  PsiBackbone(const EncoderConfig& cfg, Rng& rng);

  // Patch + position embedding; regions shaped (T,c,h,w), c in {1,3}.
  Var embed_tokens(const RasterStack& regions) const;
  Var embed_tokens(const Tensor& regions) const;
  Var run_blocks(const Var& tokens, int from, int to) const;
  Var finish(const Var& tokens) const;  // final LN, token mean-pool, head
  Var encode(const RasterStack& regions) const;
  Var encode(const Tensor& regions) const;

  int depth() const { return cfg_.psi_depth; }
  int region_h() const { return cfg_.region_h; }
  int region_w() const { return cfg_.region_w; }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

 private:
  struct DividedBlock {
    nn::LayerNorm ln_t, ln_s, ln_m;
    nn::MultiHeadAttention attn_t, attn_s;
    nn::Linear fc1, fc2;
  };

  EncoderConfig cfg_;
  nn::ParamStore ps_;
  nn::Linear patch_embed_;
  Var pos_spatial_, pos_temporal_;
  std::vector<DividedBlock> blocks_;
  nn::LayerNorm ln_final_;
  nn::Linear head_;
  std::vector<int64_t> to_temporal_, to_spatial_;  // token permutations
};

}  // namespace crossgate

#endif  // CROSSGATE_ENCODERS_HPP_
