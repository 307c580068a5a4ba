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

#ifndef CROSSGATE_TESTS_SUPPORT_TEST_UTIL_HPP_
#define CROSSGATE_TESTS_SUPPORT_TEST_UTIL_HPP_

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crossgate/graph.hpp"
#include "crossgate/nn.hpp"

namespace crossgate::testutil {

// Central-difference gradient check of `loss_fn` (which must rebuild the graph
// from current leaf values) against the analytic gradient at `param`, over a
// slice of entry indices. Returns the worst relative error.
inline double gradcheck(const std::function<Var()>& loss_fn, const Var& param,
                        const std::vector<int64_t>& slice, double h = 1e-6) {
  Var loss = loss_fn();
  param->zero_grad();
  ag::backward(loss);
  Tensor analytic = param->has_grad() ? param->grad : Tensor(param->val.shape());

  double worst = 0.0;
  for (int64_t idx : slice) {
    const double orig = param->val[idx];
    const double step = h * std::max(1.0, std::abs(orig));
    param->val[idx] = orig + step;
    const double fp = loss_fn()->val.item();
    param->val[idx] = orig - step;
    const double fm = loss_fn()->val.item();
    param->val[idx] = orig;
    const double fd = (fp - fm) / (2.0 * step);
    const double a = analytic[idx];
    // the 1e-4 floor keeps central-difference roundoff from dominating the
    // ratio when the true gradient is ~0
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4});
    worst = std::max(worst, rel);
  }
  param->zero_grad();
  return worst;
}

// Deterministic slice of parameter indices.
inline std::vector<int64_t> param_slice(const Var& p, Rng& rng, int64_t count = 8) {
  std::vector<int64_t> out;
  const int64_t n = p->val.numel();
  for (int64_t i = 0; i < std::min(count, n); ++i) out.push_back(rng.index(n));
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    base_ = std::filesystem::temp_directory_path() /
            ("crossgate_" + tag + "_" + std::to_string(std::rand()));
    std::filesystem::create_directories(base_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(base_, ec);
  }
  std::string path() const { return base_.string(); }
  std::string sub(const std::string& name) const { return (base_ / name).string(); }

 private:
  std::filesystem::path base_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace crossgate::testutil

#endif  // CROSSGATE_TESTS_SUPPORT_TEST_UTIL_HPP_
