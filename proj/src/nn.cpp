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

#include "crossgate/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace crossgate::nn {

Var ParamStore::create(std::vector<int64_t> shape, const std::string& name, Rng& rng,
                       double stddev) {
  Var p = ag::leaf(rng.normal_tensor(shape, stddev), name);
  params_.push_back(p);
  return p;
}

Var ParamStore::create_const(std::vector<int64_t> shape, const std::string& name, double fill) {
  Var p = ag::leaf(Tensor::full(std::move(shape), fill), name);
  params_.push_back(p);
  return p;
}

Var ParamStore::create_from(Tensor init, const std::string& name) {
  Var p = ag::leaf(std::move(init), name);
  params_.push_back(p);
  return p;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

void ParamStore::freeze() {
  frozen_ = true;
  for (auto& p : params_) {
    p->frozen = true;
    p->requires_grad = false;
    p->zero_grad();
  }
}

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->val.numel();
  return n;
}

uint64_t ParamStore::content_hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& p : params_) {
    h = fnv1a(p->name.data(), p->name.size(), h);
    h = fnv1a(p->val.data(), static_cast<size_t>(p->val.numel()) * sizeof(double), h);
  }
  return h;
}

Linear::Linear(ParamStore& ps, Rng& rng, int64_t in, int64_t out, const std::string& name) {
  W = ps.create({in, out}, name + ".W", rng, std::sqrt(1.0 / static_cast<double>(in)));
  b = ps.create_const({1, out}, name + ".b", 0.0);
}

LayerNorm::LayerNorm(ParamStore& ps, int64_t dim, const std::string& name) {
  g = ps.create_const({1, dim}, name + ".g", 1.0);
  b = ps.create_const({1, dim}, name + ".b", 0.0);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, Rng& rng, int64_t dim, int heads_,
                                       const std::string& name)
    : wq(ps, rng, dim, dim, name + ".q"),
      wk(ps, rng, dim, dim, name + ".k"),
      wv(ps, rng, dim, dim, name + ".v"),
      wo(ps, rng, dim, dim, name + ".o"),
      heads(heads_),
      dim(dim) {
  if (dim % heads_ != 0) throw std::invalid_argument("attention: heads must divide dim");
}

Var MultiHeadAttention::operator()(const Var& x, int64_t groups) const {
  const int64_t s = x->val.rows();
  if (s % groups != 0) throw std::invalid_argument("attention: rows not divisible by groups");
  const int64_t gsz = s / groups;
  const int64_t dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Var q = wq(x), k = wk(x), v = wv(x);
  std::vector<Var> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = ag::slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = ag::slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = ag::slice_cols(v, h * dh, (h + 1) * dh);
    if (groups == 1) {
      Var att = ag::softmax_rows(ag::scalar_mul(ag::matmul_nt(qh, kh), scale));
      head_outs.push_back(ag::matmul(att, vh));
    } else {
      std::vector<Var> blocks;
      blocks.reserve(groups);
      for (int64_t g = 0; g < groups; ++g) {
        Var qg = ag::slice_rows(qh, g * gsz, (g + 1) * gsz);
        Var kg = ag::slice_rows(kh, g * gsz, (g + 1) * gsz);
        Var vg = ag::slice_rows(vh, g * gsz, (g + 1) * gsz);
        Var att = ag::softmax_rows(ag::scalar_mul(ag::matmul_nt(qg, kg), scale));
        blocks.push_back(ag::matmul(att, vg));
      }
      head_outs.push_back(ag::concat_rows(blocks));
    }
  }
  return wo(ag::concat_cols(head_outs));
}

TransformerBlock::TransformerBlock(ParamStore& ps, Rng& rng, int64_t dim, int heads,
                                   int64_t mlp_dim, const std::string& name)
    : ln1(ps, dim, name + ".ln1"),
      ln2(ps, dim, name + ".ln2"),
      attn(ps, rng, dim, heads, name + ".attn"),
      fc1(ps, rng, dim, mlp_dim, name + ".fc1"),
      fc2(ps, rng, mlp_dim, dim, name + ".fc2") {}

Var TransformerBlock::operator()(const Var& x, int64_t groups) const {
  Var h = ag::add(x, attn(ln1(x), groups));
  return ag::add(h, fc2(ag::gelu(fc1(ln2(h)))));
}

LstmLayer::LstmLayer(ParamStore& ps, Rng& rng, int64_t in, int64_t hidden_,
                     const std::string& name)
    : hidden(hidden_) {
  wx = ps.create({in, 4 * hidden_}, name + ".wx", rng, std::sqrt(1.0 / static_cast<double>(in)));
  wh = ps.create({hidden_, 4 * hidden_}, name + ".wh", rng,
                 std::sqrt(1.0 / static_cast<double>(hidden_)));
  Tensor bias({1, 4 * hidden_});
  for (int64_t j = hidden_; j < 2 * hidden_; ++j) bias.at(0, j) = 1.0;  // forget gate bias
  b = ps.create_from(std::move(bias), name + ".b");
}

Var LstmLayer::run(const Var& seq) const {
  const int64_t t_len = seq->val.rows();
  Var h = ag::constant(Tensor({1, hidden}));
  Var c = ag::constant(Tensor({1, hidden}));
  std::vector<Var> outs;
  outs.reserve(t_len);
  for (int64_t t = 0; t < t_len; ++t) {
    Var xt = ag::slice_rows(seq, t, t + 1);
    Var gates = ag::add(ag::add_rowvec(ag::matmul(xt, wx), b), ag::matmul(h, wh));
    Var i = ag::sigmoid(ag::slice_cols(gates, 0, hidden));
    Var f = ag::sigmoid(ag::slice_cols(gates, hidden, 2 * hidden));
    Var g = ag::tanh(ag::slice_cols(gates, 2 * hidden, 3 * hidden));
    Var o = ag::sigmoid(ag::slice_cols(gates, 3 * hidden, 4 * hidden));
    c = ag::add(ag::mul(f, c), ag::mul(i, g));
    h = ag::mul(o, ag::tanh(c));
    outs.push_back(h);
  }
  return ag::concat_rows(outs);
}

Conv2dLayer::Conv2dLayer(ParamStore& ps, Rng& rng, int64_t ci, int64_t co, int64_t ksize,
                         const std::string& name) {
  const double stddev = std::sqrt(1.0 / static_cast<double>(ci * ksize * ksize));
  k = ps.create({co, ci, ksize, ksize}, name + ".k", rng, stddev);
  b = ps.create_const({1, co}, name + ".b", 0.0);
}

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  slots_.reserve(params_.size());
  for (const auto& p : params_) slots_.push_back({Tensor(p->val.shape()), Tensor(p->val.shape())});
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (p->frozen) throw std::logic_error("Adam::step: gradient application to frozen parameter " + p->name);
    if (!p->has_grad()) continue;
    Slot& s = slots_[i];
    for (int64_t j = 0; j < p->val.numel(); ++j) {
      const double g = p->grad[j];
      s.m[j] = beta1_ * s.m[j] + (1.0 - beta1_) * g;
      s.v[j] = beta2_ * s.v[j] + (1.0 - beta2_) * g * g;
      const double mhat = s.m[j] / bc1;
      const double vhat = s.v[j] / bc2;
      p->val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

}  // namespace crossgate::nn
