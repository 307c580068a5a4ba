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

#include "crossgate/graph.hpp"
#include "support/test_util.hpp"

using namespace crossgate;
using testutil::gradcheck;

namespace {

Var make_param(Rng& rng, std::vector<int64_t> shape, const char* name) {
  return ag::leaf(rng.normal_tensor(std::move(shape), 0.8), name);
}

}  // namespace

TEST_CASE("elementwise and scalar op gradients match finite differences") {
  Rng rng(11);
  Var a = make_param(rng, {3, 4}, "a");
  Var b = make_param(rng, {3, 4}, "b");
  std::vector<int64_t> slice = {0, 1, 5, 11};

  auto check = [&](const std::function<Var()>& f) {
    CHECK(gradcheck(f, a, slice) < 1e-6);
    CHECK(gradcheck(f, b, slice) < 1e-6);
  };

  check([&] { return ag::sum(ag::add(a, b)); });
  check([&] { return ag::sum(ag::sub(a, b)); });
  check([&] { return ag::sum(ag::mul(a, b)); });
  check([&] { return ag::mean(ag::div(a, ag::scalar_add(ag::square(b), 1.0))); });
  check([&] { return ag::sum(ag::exp(ag::scalar_mul(a, 0.3))); });
  check([&] { return ag::sum(ag::sqrt(ag::scalar_add(ag::square(a), 0.5))); });
  check([&] { return ag::sum(ag::tanh(a)); });
  check([&] { return ag::sum(ag::sigmoid(ag::mul(a, b))); });
  check([&] { return ag::sum(ag::gelu(a)); });
}

TEST_CASE("matmul family gradients") {
  Rng rng(12);
  Var a = make_param(rng, {3, 5}, "a");
  Var b = make_param(rng, {5, 2}, "b");
  Var c = make_param(rng, {4, 5}, "c");
  Var bias = make_param(rng, {1, 2}, "bias");
  std::vector<int64_t> sa = {0, 7, 14};

  auto f1 = [&] { return ag::mean(ag::square(ag::matmul(a, b))); };
  CHECK(gradcheck(f1, a, sa) < 1e-6);
  CHECK(gradcheck(f1, b, {0, 5, 9}) < 1e-6);

  auto f2 = [&] { return ag::mean(ag::square(ag::matmul_nt(a, c))); };
  CHECK(gradcheck(f2, a, sa) < 1e-6);
  CHECK(gradcheck(f2, c, {0, 11, 19}) < 1e-6);

  auto f3 = [&] { return ag::mean(ag::square(ag::add_rowvec(ag::matmul(a, b), bias))); };
  CHECK(gradcheck(f3, bias, {0, 1}) < 1e-6);
}

TEST_CASE("shape, slicing, and gather gradients") {
  Rng rng(13);
  Var a = make_param(rng, {4, 6}, "a");
  std::vector<int64_t> slice = {0, 9, 23};

  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::reshape(a, {2, 12}))); }, a, slice) < 1e-6);
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::slice_rows(a, 1, 3))); }, a, slice) < 1e-6);
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::slice_cols(a, 2, 5))); }, a, slice) < 1e-6);
  CHECK(gradcheck(
            [&] {
              return ag::mean(ag::square(
                  ag::concat_rows({ag::slice_rows(a, 0, 2), ag::slice_rows(a, 2, 4)})));
            },
            a, slice) < 1e-6);
  CHECK(gradcheck(
            [&] {
              return ag::mean(ag::square(
                  ag::concat_cols({ag::slice_cols(a, 0, 3), ag::slice_cols(a, 3, 6)})));
            },
            a, slice) < 1e-6);
  // gather with repeated rows exercises scatter-add accumulation
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::index_rows(a, {0, 2, 2, 3, 1, 0}))); }, a,
                  slice) < 1e-6);
}

TEST_CASE("reductions and normalization gradients") {
  Rng rng(14);
  Var a = make_param(rng, {6, 4}, "a");
  Var g = make_param(rng, {1, 4}, "g");
  Var b = make_param(rng, {1, 4}, "b");
  std::vector<int64_t> slice = {0, 7, 13, 23};

  CHECK(gradcheck([&] { return ag::square(ag::mean(a)); }, a, slice) < 1e-6);
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::group_mean(a, 3))); }, a, slice) < 1e-6);
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::group_var(a, 3))); }, a, slice) < 1e-5);
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::group_expand(ag::group_mean(a, 2), 2))); },
                  a, slice) < 1e-6);
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::softmax_rows(a))); }, a, slice) < 1e-5);
  CHECK(gradcheck([&] { return ag::mean(ag::square(ag::log_softmax_rows(a))); }, a, slice) < 1e-5);

  auto ln = [&] { return ag::mean(ag::square(ag::layer_norm(a, g, b, 1e-5))); };
  CHECK(gradcheck(ln, a, slice) < 1e-5);
  CHECK(gradcheck(ln, g, {0, 1, 2, 3}) < 1e-6);
  CHECK(gradcheck(ln, b, {0, 1, 2, 3}) < 1e-6);
}

TEST_CASE("conv2d and chw_to_rows gradients") {
  Rng rng(15);
  Var x = make_param(rng, {2, 5, 3}, "x");
  Var k = make_param(rng, {3, 2, 3, 3}, "k");
  Var b = make_param(rng, {1, 3}, "b");

  auto f = [&] { return ag::mean(ag::square(ag::conv2d(x, k, b))); };
  CHECK(gradcheck(f, x, {0, 10, 29}) < 1e-5);
  CHECK(gradcheck(f, k, {0, 25, 53}) < 1e-5);
  CHECK(gradcheck(f, b, {0, 1, 2}) < 1e-6);

  auto f2 = [&] { return ag::mean(ag::square(ag::chw_to_rows(ag::conv2d(x, k, b)))); };
  CHECK(gradcheck(f2, x, {0, 10, 29}) < 1e-5);
}

TEST_CASE("composite losses") {
  Rng rng(16);
  Var a = make_param(rng, {1, 5}, "a");
  Var b = make_param(rng, {1, 5}, "b");

  CHECK(gradcheck([&] { return ag::mse(a, b); }, a, {0, 2, 4}) < 1e-6);
  CHECK(gradcheck([&] { return ag::kld_softmax(a, b); }, a, {0, 2, 4}) < 1e-5);
  CHECK(gradcheck([&] { return ag::kld_softmax(a, b); }, b, {0, 2, 4}) < 1e-5);

  Var p = ag::leaf(Tensor::row({0.3, 0.7}), "p");
  Var y = ag::constant(Tensor::row({1.0, 0.0}));
  CHECK(gradcheck([&] { return ag::bce_probs(p, y); }, p, {0, 1}) < 1e-6);

  Var logit = ag::leaf(Tensor::scalar(0.37), "logit");
  CHECK(gradcheck([&] { return ag::bce_logit(logit, 1.0); }, logit, {0}) < 1e-6);
  const double z = 0.37;
  const double expect = std::log1p(std::exp(-z)) + 0.0;  // -log(sigmoid(z))
  CHECK(ag::bce_logit(logit, 1.0)->val.item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("dropout scales kept entries and zeroes dropped ones") {
  Rng rng(17);
  Var a = ag::leaf(Tensor::full({4, 8}, 1.0), "a");
  Var out = ag::dropout(a, 0.5, rng, true);
  int kept = 0;
  for (int64_t i = 0; i < out->val.numel(); ++i) {
    const double v = out->val[i];
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 0);
  CHECK(kept < 32);
  Rng rng2(18);
  Var out_eval = ag::dropout(a, 0.5, rng2, false);
  CHECK(out_eval.get() == a.get());
}

TEST_CASE("backward is deterministic and accumulates over shared subgraphs") {
  Rng rng(19);
  Var a = make_param(rng, {2, 3}, "a");
  Var shared = ag::mul(a, a);
  Var loss = ag::add(ag::sum(shared), ag::sum(ag::scalar_mul(shared, 2.0)));
  ag::backward(loss);
  // d/da [3 * a^2] = 6a
  for (int64_t i = 0; i < a->val.numel(); ++i)
    CHECK(a->grad[i] == doctest::Approx(6.0 * a->val[i]).epsilon(1e-12));
}

TEST_CASE("grl is identity forward") {
  Rng rng(20);
  Var a = make_param(rng, {2, 4}, "a");
  Var out = ag::grl(a, 0.7);
  for (int64_t i = 0; i < a->val.numel(); ++i) CHECK(out->val[i] == a->val[i]);
}

TEST_CASE("log_clamped floors the argument") {
  Var a = ag::constant(Tensor::row({1e-20, 0.5}));
  Var out = ag::log_clamped(a, 1e-12);
  CHECK(out->val[0] == doctest::Approx(std::log(1e-12)));
  CHECK(out->val[1] == doctest::Approx(std::log(0.5)));
}
