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

#include "crossgate/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace crossgate::fusion {

GatedFusion::GatedFusion(int64_t feature_dim, Rng& rng, GateNorm norm) : norm_(norm) {
  l1_ = nn::Linear(ps_, rng, 3 * feature_dim, feature_dim, "lgu.l1");
  l2_ = nn::Linear(ps_, rng, feature_dim, feature_dim / 2, "lgu.l2");
  l3_ = nn::Linear(ps_, rng, feature_dim / 2, 3, "lgu.l3");
}

GatedFusion::Out GatedFusion::fuse(const Var& f_s, const Var& f_st, const Var& f_real) const {
  if (!f_s->val.same_shape(f_st->val) || !f_s->val.same_shape(f_real->val))
    throw std::invalid_argument("lgu: branch embedding dimensions differ");
  Var scores = l3_(ag::gelu(l2_(ag::gelu(l1_(ag::concat_cols({f_s, f_st, f_real}))))));
  Var w;
  if (norm_ == GateNorm::kSoftmax) {
    w = ag::softmax_rows(scores);
  } else {
    // softplus activations normalized by their L1 mass
    Var sp = ag::log_clamped(ag::scalar_add(ag::exp(scores), 1.0), 1e-300);
    Var total = ag::sum(sp);
    w = ag::div(sp, ag::concat_cols({total, total, total}));
  }
  Out out;
  out.weights = w;
  out.f_gate = fuse_with_weights(w, f_s, f_st, f_real);
  return out;
}

Var GatedFusion::fuse_with_weights(const Var& weights, const Var& f_s, const Var& f_st,
                                   const Var& f_real) {
  return ag::matmul(weights, ag::concat_rows({f_s, f_st, f_real}));
}

Var gumbel_softmax(const Var& logits, const Tensor& eps, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("gumbel_softmax: eta must be > 0");
  if (!eps.same_shape(logits->val))
    throw std::invalid_argument("gumbel_softmax: eps shape mismatch");
  Tensor g(eps.shape());
  for (int64_t i = 0; i < eps.numel(); ++i) {
    const double e = eps[i];
    if (!(e > 0.0 && e < 1.0))
      throw std::invalid_argument("gumbel_softmax: eps must lie strictly in (0,1)");
    g[i] = -std::log(-std::log(e));
  }
  return ag::softmax_rows(ag::scalar_mul(ag::add(logits, ag::constant(std::move(g))), 1.0 / eta));
}

CrossingPredictor::CrossingPredictor(int64_t feature_dim, Rng& rng, double eta, double dropout)
    : eta_(eta), dropout_(dropout) {
  g1_ = nn::Linear(ps_, rng, feature_dim, feature_dim, "g.l1");
  g2_ = nn::Linear(ps_, rng, feature_dim, feature_dim / 2, "g.l2");
  g3_ = nn::Linear(ps_, rng, feature_dim / 2, 2, "g.l3");
}

Var CrossingPredictor::predict(const Var& f_gate, bool train, Rng& noise_rng) const {
  Var h = ag::dropout(ag::gelu(g1_(f_gate)), dropout_, noise_rng, train);
  h = ag::dropout(ag::gelu(g2_(h)), dropout_, noise_rng, train);
  Var logits = g3_(h);
  Tensor eps({1, 2});
  if (train) {
    for (int64_t i = 0; i < 2; ++i)
      eps[i] = std::clamp(noise_rng.uniform(), 1e-6, 1.0 - 1e-6);
  } else {
    // equal noise cancels inside the softmax, making eval deterministic
    eps[0] = eps[1] = std::exp(-1.0);
  }
  return gumbel_softmax(logits, eps, eta_);
}

Var loss_cla(const Var& p_hat, const Tensor& y_onehot) {
  return ag::bce_probs(p_hat, ag::constant(y_onehot), 1e-12);
}

Tensor onehot2(int cls) {
  Tensor y({1, 2});
  y.at(0, cls) = 1.0;
  return y;
}

}  // namespace crossgate::fusion
