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

#ifndef CROSSGATE_NN_HPP_
#define CROSSGATE_NN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "crossgate/graph.hpp"

namespace crossgate::nn {

// Registry of the trainable leaves of one module; registration order is the
// serialization order, so construction must be deterministic.
class ParamStore {
 public:
  Var create(std::vector<int64_t> shape, const std::string& name, Rng& rng, double stddev);
  Var create_const(std::vector<int64_t> shape, const std::string& name, double fill);
  Var create_from(Tensor init, const std::string& name);

  const std::vector<Var>& params() const { return params_; }
  void zero_grads();
  void freeze();
  bool frozen() const { return frozen_; }
  int64_t param_count() const;
  uint64_t content_hash() const;

 private:
  std::vector<Var> params_;
  bool frozen_ = false;
};

struct Linear {
  Var W, b;  // (in,out), (1,out)
  Linear() = default;
  Linear(ParamStore& ps, Rng& rng, int64_t in, int64_t out, const std::string& name);
  Var operator()(const Var& x) const { return ag::add_rowvec(ag::matmul(x, W), b); }
};

struct LayerNorm {
  Var g, b;
  double eps = 1e-5;
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, int64_t dim, const std::string& name);
  Var operator()(const Var& x) const { return ag::layer_norm(x, g, b, eps); }
};

// Multi-head self-attention restricted to consecutive row blocks: with
// `groups` > 1 the (S,D) input is treated as `groups` independent sequences
// of S/groups tokens (divided space-time attention builds on this).
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;
  int64_t dim = 0;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, Rng& rng, int64_t dim, int heads, const std::string& name);
  Var operator()(const Var& x, int64_t groups) const;
};

// Pre-norm encoder block: x += attn(ln(x)); x += mlp(ln(x)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear fc1, fc2;
  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, Rng& rng, int64_t dim, int heads, int64_t mlp_dim,
                   const std::string& name);
  Var operator()(const Var& x, int64_t groups) const;
};

struct LstmLayer {
  Var wx, wh, b;  // (in,4H), (H,4H), (1,4H); gate order i,f,g,o
  int64_t hidden = 0;
  LstmLayer() = default;
  LstmLayer(ParamStore& ps, Rng& rng, int64_t in, int64_t hidden, const std::string& name);
  Var run(const Var& seq) const;  // (T,in) -> (T,H)
};

struct Conv2dLayer {
  Var k, b;  // (co,ci,kh,kw), (1,co)
  Conv2dLayer() = default;
  Conv2dLayer(ParamStore& ps, Rng& rng, int64_t ci, int64_t co, int64_t ksize,
              const std::string& name);
  Var operator()(const Var& x) const { return ag::conv2d(x, k, b); }
};

class Adam {
 public:
  explicit Adam(std::vector<Var> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step();  // throws on frozen parameters
  void zero_grads();

  struct Slot {
    Tensor m, v;
  };
  std::vector<Slot>& slots() { return slots_; }
  int64_t& step_count() { return t_; }
  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace crossgate::nn

#endif  // CROSSGATE_NN_HPP_
