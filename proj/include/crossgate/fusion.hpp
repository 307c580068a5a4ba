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

#ifndef CROSSGATE_FUSION_HPP_
#define CROSSGATE_FUSION_HPP_

#include "crossgate/nn.hpp"

namespace crossgate::fusion {

enum class GateNorm { kSoftmax, kL1 };

// Learnable Gated Unit: three linear layers score the stacked branch
// embeddings and a normalization maps the scores onto the 3-simplex; the
// fused feature is the weighted sum of the branch embeddings.
class GatedFusion {
 public:
  GatedFusion(int64_t feature_dim, Rng& rng, GateNorm norm = GateNorm::kSoftmax);

  struct Out {
    Var f_gate;   // (1,D)
    Var weights;  // (1,3) on the probability simplex
  };
  Out fuse(const Var& f_s, const Var& f_st, const Var& f_real) const;

  // Weighted sum with externally supplied weights; the one-hot / oracle path.
  static Var fuse_with_weights(const Var& weights, const Var& f_s, const Var& f_st,
                               const Var& f_real);

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

 private:
  nn::ParamStore ps_;
  nn::Linear l1_, l2_, l3_;
  GateNorm norm_;
};

// sigma_i = exp((l_i - log(-log eps_i))/eta) / sum_j ...; eps strictly in (0,1).
Var gumbel_softmax(const Var& logits, const Tensor& eps, double eta);

// Crossing determiner G: three linear layers then Gumbel-softmax. In eval
// mode the noise is fixed so the perturbation cancels and prediction is
// deterministic.
class CrossingPredictor {
 public:
  CrossingPredictor(int64_t feature_dim, Rng& rng, double eta = 1.0, double dropout = 0.5);

  Var predict(const Var& f_gate, bool train, Rng& noise_rng) const;

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  double eta() const { return eta_; }

 private:
  nn::ParamStore ps_;
  nn::Linear g1_, g2_, g3_;
  double eta_, dropout_;
};

// BCE between a probability 2-vector and a one-hot target, summed over both
// classes, logs clamped at 1e-12.
Var loss_cla(const Var& p_hat, const Tensor& y_onehot);

Tensor onehot2(int cls);

}  // namespace crossgate::fusion

#endif  // CROSSGATE_FUSION_HPP_
