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

#ifndef CROSSGATE_GRAPH_HPP_
#define CROSSGATE_GRAPH_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "crossgate/tensor.hpp"

namespace crossgate {

// Reverse-mode autodiff over a dynamically built tape. Parameters are
// long-lived leaf nodes; each forward pass builds fresh interior nodes on top
// of them and frees them when the last Var goes out of scope. All math is
// sequential and double precision, so a fixed seed gives a bitwise-stable
// forward and backward pass.
class Node {
 public:
  Tensor val;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool is_leaf = false;
  bool frozen = false;  // leaf refuses optimizer updates when set
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // pulls this->grad into parents

  void ensure_grad() {
    if (!grad.same_shape(val)) grad = Tensor(val.shape());
  }
  void zero_grad() { grad = Tensor(); }
  bool has_grad() const { return grad.same_shape(val); }
};

using Var = std::shared_ptr<Node>;

namespace ag {

Var constant(Tensor t);
Var leaf(Tensor t, std::string name);  // trainable parameter

// Runs reverse accumulation from a scalar loss node.
void backward(const Var& loss);

// elementwise / scalar
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scalar_mul(const Var& a, double c);
Var scalar_add(const Var& a, double c);
Var exp(const Var& a);
Var log_clamped(const Var& a, double floor);  // log(max(a, floor))
Var sqrt(const Var& a);
Var square(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var gelu(const Var& a);  // exact erf form; smooth for gradient checks
Var relu(const Var& a);

// shape & indexing
Var reshape(const Var& a, std::vector<int64_t> shape);
Var slice_rows(const Var& a, int64_t r0, int64_t r1);
Var slice_cols(const Var& a, int64_t c0, int64_t c1);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var index_rows(const Var& a, std::vector<int64_t> idx);  // gather; scatter-add backward

// linear algebra
Var matmul(const Var& a, const Var& b);     // (m,k)x(k,n)
Var matmul_nt(const Var& a, const Var& b);  // (m,k)x(n,k)^T -> (m,n)
Var add_rowvec(const Var& a, const Var& b); // b is (1,n), broadcast over rows

// reductions / normalization
Var sum(const Var& a);   // -> (1,1)
Var mean(const Var& a);  // -> (1,1)
// Mean / population variance over each consecutive block of `rows/groups` rows.
Var group_mean(const Var& a, int64_t groups);
Var group_var(const Var& a, int64_t groups);
Var group_expand(const Var& a, int64_t repeat);  // tile each row `repeat` times
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps);

// structured
// x: (C,H,W), k: (Cout,Cin,kh,kw), b: (1,Cout); stride 1, zero padding kh/2.
Var conv2d(const Var& x, const Var& k, const Var& b);
Var chw_to_rows(const Var& x);  // (C,H,W) -> (H, C*W)

// training utilities
Var dropout(const Var& a, double p, Rng& rng, bool train);
// Identity forward; backward multiplies the incoming gradient by -lambda.
Var grl(const Var& a, double lambda);
Var detach(const Var& a);

// composites
Var mse(const Var& a, const Var& b);
// -sum_k [ y log p + (1-y) log(1-p) ], logs clamped at `floor`.
Var bce_probs(const Var& p, const Var& y, double floor = 1e-12);
Var bce_logit(const Var& logit, double target);  // scalar logit vs 0/1 target
// KLD(softmax(a) || softmax(b)) summed over entries of a (1,D) pair.
Var kld_softmax(const Var& a, const Var& b);

}  // namespace ag
}  // namespace crossgate

#endif  // CROSSGATE_GRAPH_HPP_
